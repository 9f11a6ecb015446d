#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvlift/dataset.hpp"
#include "mvlift/io.hpp"
#include "mvlift/losses.hpp"
#include "mvlift/optim.hpp"

namespace mvlift {

struct TrainConfig {
    int batch_size = 256;
    double learning_rate = 1e-3;
    int epochs = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    LossWeights weights;
    /// Fraction of final epochs during which the output-triangulation loss
    /// contributes to the objective.
    double out_loss_fraction = 0.1;
    std::uint64_t seed = 0;
    int eval_every = 10;
    std::string checkpoint_dir;  // empty: no checkpoints written
    int width = 1024;
    int n_blocks = 4;
    double output_scale = 1.0;
    bool differentiate_through_dlt = false;
    bool symmetric_consistency = false;

    /// Benchmark-scale settings: batch 8192, learning rate 1e-3, 500 epochs,
    /// full 1024-wide network.
    static TrainConfig paper_preset();
    /// CPU desk-scale settings for the synthetic rig: batch 256, 200 epochs,
    /// reduced width.
    static TrainConfig desk_preset();

    void validate() const;
    /// First epoch index (0-based) at which the output loss is active.
    int out_loss_start_epoch() const;
};

struct TrainResult {
    ModelParams params;
    OptimizerState optimizer;
    std::vector<EpochRecord> history;
};

/// Mini-batch Adam training of the lifter under the four-loss objective.
/// Shuffling is seeded per epoch, the last incomplete batch is dropped, and
/// the whole loop is single-threaded and bit-reproducible for a fixed seed.
/// P-MPJPE is logged every `eval_every` epochs against `eval_dataset` (or the
/// training set when it carries ground truth). Passing `resume` continues a
/// checkpointed run bit-exactly.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const Dataset* eval_dataset = nullptr, const Checkpoint* resume = nullptr);

/// Single-view inference: normalize the detection, run an eval-mode forward,
/// return the root-relative camera-frame pose. No camera parameters are used.
Pose3D infer(const ModelParams& params, const Pose2D& detection, const Norm2DParams& norm,
             Eigen::Index root_index);

/// Mean P-MPJPE of eval-mode predictions over every (sample, camera) pair
/// with ground truth. Ground truth is compared in the camera frame,
/// root-centered.
double evaluate_p_mpjpe(const ModelParams& params, const Dataset& dataset);

}  // namespace mvlift
