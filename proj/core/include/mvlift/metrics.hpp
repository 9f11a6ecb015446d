#pragma once

#include <vector>

#include "mvlift/types.hpp"

namespace mvlift {

/// Similarity transform aligning a prediction onto a reference pose.
struct AlignmentResult {
    Mat3 rotation = Mat3::Identity();
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();
    Pose3D aligned_pose;
};

/// Mean Euclidean landmark distance. Both poses must use the same frame
/// convention (both root-relative or both absolute).
double mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Least-squares similarity alignment (rotation, uniform scale, translation)
/// of pred onto gt, reflection-corrected so det(R) = +1.
AlignmentResult procrustes_align(const Pose3D& pred, const Pose3D& gt);

/// mpjpe after Procrustes alignment.
double p_mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Fraction of landmarks within `threshold` over all pose pairs. Expects
/// already-aligned pairs; see align_pose_pairs for the alignment policies.
double pck3d(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold);

/// Mean pck3d over an evenly spaced threshold grid from 0 to max_threshold
/// (inclusive). The defaults are the 3DPCK convention: 0-150 mm in 31 steps.
double auc3d(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
             double max_threshold = 150.0, int n_steps = 31);

enum class PckAlignment { Root, Procrustes };

/// Applies the configured alignment to each (pred, gt) pair in place:
/// Root re-centers both poses at the root landmark, Procrustes similarity-
/// aligns each prediction onto its ground truth.
void align_pose_pairs(std::vector<Pose3D>& preds, std::vector<Pose3D>& gts,
                      PckAlignment alignment, Eigen::Index root_index = 0);

}  // namespace mvlift
