#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvlift/types.hpp"

namespace mvlift {

enum class Mode { Train, Eval };

struct ModelConfig {
    int n_landmarks = 16;
    int width = 1024;
    int n_blocks = 4;
    int root_index = 0;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
    /// Fixed multiplier on the output layer activations. Keeps the learned
    /// weights O(1) when the regression targets live at millimeter scale.
    double output_scale = 1.0;

    int input_dim() const { return 2 * n_landmarks; }
    int output_dim() const { return 3 * n_landmarks; }
    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // in x out
    Eigen::VectorXd bias;    // out
};

struct BatchNormLayer {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

struct ResidualBlock {
    DenseLayer fc1;
    BatchNormLayer bn1;
    DenseLayer fc2;
    BatchNormLayer bn2;
};

/// All learnable parameters of the lifter plus batch-norm running statistics.
/// Topology: dense -> [dense -> BN -> ReLU -> dense -> BN -> ReLU -> skip] x n_blocks -> dense,
/// with the output root-centered so predictions are root-relative by construction.
struct ModelParams {
    ModelConfig config;
    DenseLayer input;
    std::vector<ResidualBlock> blocks;
    DenseLayer output;
    Mode mode = Mode::Train;

    std::int64_t parameter_count() const;
};

struct DenseGrad {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

struct BatchNormGrad {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
};

struct BlockGrad {
    DenseGrad fc1;
    BatchNormGrad bn1;
    DenseGrad fc2;
    BatchNormGrad bn2;
};

/// Gradient w.r.t. every learnable tensor, shape-congruent with ModelParams.
struct GradientSet {
    DenseGrad input;
    std::vector<BlockGrad> blocks;
    DenseGrad output;

    static GradientSet zeros_like(const ModelParams& params);
    void add(const GradientSet& other);
    void scale(double factor);
};

/// Flat view over one tensor, used by the optimizer and serialization.
struct TensorView {
    std::string name;
    double* data = nullptr;
    Eigen::Index size = 0;
};

/// Learnable tensors in a fixed, documented order (weights, biases, gamma, beta).
std::vector<TensorView> learnable_tensors(ModelParams& params);
std::vector<TensorView> learnable_tensors(GradientSet& grads);
/// Batch-norm running statistics, same ordering convention.
std::vector<TensorView> running_stat_tensors(ModelParams& params);

/// Per-batch activations captured by a train-mode forward, consumed by backward().
struct BlockCache {
    Eigen::MatrixXd block_input;  // B x W
    Eigen::MatrixXd xhat1;        // B x W
    Eigen::VectorXd inv_std1;     // W
    Eigen::MatrixXd post_bn1;     // B x W
    Eigen::MatrixXd relu1;        // B x W
    Eigen::MatrixXd xhat2;
    Eigen::VectorXd inv_std2;
    Eigen::MatrixXd post_bn2;
};

struct ForwardCache {
    Eigen::MatrixXd input;    // B x 2N
    Eigen::MatrixXd h0;       // B x W
    std::vector<BlockCache> blocks;
    Eigen::MatrixXd h_last;   // B x W, input of the output layer
};

/// Deterministic fan-in-scaled uniform initialization; gamma = 1, beta = 0,
/// running mean = 0, running variance = 1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Runs the network on a batch of flattened 2D poses (B x 2N, row layout
/// x1 y1 x2 y2 ...). Returns root-relative 3D poses as B x 3N (X1 Y1 Z1 ...).
/// In train mode batch statistics are used and running statistics updated;
/// train mode requires B >= 2. In eval mode running statistics are used.
Eigen::MatrixXd forward(ModelParams& params, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

/// Eval-mode forward over immutable parameters; params.mode must be Eval.
Eigen::MatrixXd forward_eval(const ModelParams& params, const Eigen::MatrixXd& input);

/// Exact gradients w.r.t. every learnable tensor for a scalar loss whose
/// gradient w.r.t. the forward output is `upstream` (B x 3N). `cache` must
/// come from a train-mode forward over the same parameters.
GradientSet backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& upstream);

/// Reshape helpers between B x 3N batches and per-sample N x 3 landmark blocks.
Landmarks3D output_row_to_landmarks(const Eigen::Ref<const Eigen::RowVectorXd>& row);
Eigen::RowVectorXd landmarks_to_output_row(const Landmarks3D& landmarks);
Eigen::RowVectorXd landmarks_to_input_row(const Landmarks2D& landmarks);

}  // namespace mvlift
