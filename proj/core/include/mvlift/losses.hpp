#pragma once

#include <vector>

#include "mvlift/geometry.hpp"
#include "mvlift/types.hpp"

namespace mvlift {

/// Weighting factors of the total objective.
struct LossWeights {
    double w_in = 1.0;
    double w_proj = 1.0;
    double w_con = 0.001;
    double w_out = 0.01;

    void validate() const;
};

/// One multi-view training batch. Detections are root-centered, scale-divided
/// 2D poses; predictions are root-relative 3D poses in their own camera frame.
/// The input triangulation and the per-view anchors (camera-frame position of
/// the triangulated root landmark) are constants w.r.t. the model parameters.
struct MultiViewBatch {
    struct Sample {
        std::vector<Landmarks2D> detections;    // per camera, N x 2, normalized
        std::vector<Landmarks3D> predictions;   // per camera, N x 3, root-relative
        Landmarks3D input_triangulation;        // N x 3, world frame
        std::vector<Vec3> anchors;              // per camera
    };

    std::vector<int> camera_ids;  // column order of the per-sample vectors
    std::vector<Sample> samples;

    Eigen::Index n_cameras() const { return static_cast<Eigen::Index>(camera_ids.size()); }
    Eigen::Index n_samples() const { return static_cast<Eigen::Index>(samples.size()); }
    Eigen::Index n_landmarks() const;
    void validate(const CameraRig& rig) const;
};

struct LossOptions {
    Eigen::Index root_index = 0;
    double norm_scale = 1.0;  // 2D normalization divisor used by the re-projection loss
    /// When set, the output-triangulation loss also propagates gradients
    /// through the DLT solve instead of detaching the pseudo-labels.
    bool differentiate_through_dlt = false;
    /// When set, the consistency loss sends gradients into both sides of each
    /// view pair instead of treating the untransformed side as a constant.
    bool symmetric_consistency = false;
};

/// Scalar loss value plus its gradient w.r.t. every prediction tensor,
/// indexed [sample][camera], each N x 3.
struct LossResult {
    double value = 0.0;
    std::vector<std::vector<Landmarks3D>> grad;
};

/// Mean squared distance between predictions and the camera-frame,
/// root-centered views of the input triangulation. Mean over S*C*N.
LossResult loss_input_triangulation(const MultiViewBatch& batch, const CameraRig& rig,
                                    const LossOptions& options);

/// L1 distance in normalized image coordinates between each detection and the
/// projections of every view's anchored prediction. Mean over S*C*C*2N.
LossResult loss_reprojection(const MultiViewBatch& batch, const CameraRig& rig,
                             const LossOptions& options);

/// L1 distance between each view's prediction and every other view's
/// prediction transformed into its frame and re-root-centered; the
/// untransformed side is the target. Mean over S*C*(C-1)*3N.
LossResult loss_consistency(const MultiViewBatch& batch, const CameraRig& rig,
                            const LossOptions& options);

/// Consistency loss against an explicit frozen copy of the target-side
/// predictions, indexed [sample][camera]. loss_consistency uses the batch's
/// own predictions as targets and keeps them detached; this variant makes
/// that stop-gradient side explicit (and finite-difference checkable).
LossResult loss_consistency_fixed(const MultiViewBatch& batch, const CameraRig& rig,
                                  const LossOptions& options,
                                  const std::vector<std::vector<Landmarks3D>>& targets);

/// World-frame DLT triangulations of the anchored, per-view-projected
/// predictions, one per sample. These are the output-loss pseudo-labels.
std::vector<Landmarks3D> output_pseudo_labels(const MultiViewBatch& batch, const CameraRig& rig,
                                              const LossOptions& options);

/// Squared-distance loss against fixed output pseudo-labels (stop-gradient
/// side already applied). Mean over S*C*N.
LossResult loss_output_triangulation_fixed(const MultiViewBatch& batch, const CameraRig& rig,
                                           const LossOptions& options,
                                           const std::vector<Landmarks3D>& pseudo_labels);

/// Computes the pseudo-labels from the batch and evaluates the output loss.
/// With options.differentiate_through_dlt the DLT path contributes gradients.
LossResult loss_output_triangulation(const MultiViewBatch& batch, const CameraRig& rig,
                                     const LossOptions& options);

struct TotalLossResult {
    double value = 0.0;
    double l_in = 0.0;
    double l_proj = 0.0;
    double l_con = 0.0;
    double l_out = 0.0;
    std::vector<std::vector<Landmarks3D>> grad;
};

/// Weighted sum of the four losses. Components with zero weight are skipped;
/// the output loss only enters when `with_out` is set (its value is still
/// reported when `report_inactive_out` is set, without contributing).
TotalLossResult total_objective(const MultiViewBatch& batch, const CameraRig& rig,
                                const LossWeights& weights, bool with_out,
                                const LossOptions& options, bool report_inactive_out = false);

}  // namespace mvlift
