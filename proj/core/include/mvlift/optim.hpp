#pragma once

#include <cstdint>
#include <vector>

#include "mvlift/model.hpp"

namespace mvlift {

struct AdamParams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates per learnable tensor plus the step count.
struct OptimizerState {
    std::vector<Eigen::VectorXd> m;
    std::vector<Eigen::VectorXd> v;
    std::int64_t step = 0;

    static OptimizerState zeros_like(ModelParams& params);
};

/// One bias-corrected Adam update. Throws NumericalError naming the tensor if
/// any gradient entry is non-finite.
void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& state,
               const AdamParams& hyper);

}  // namespace mvlift
