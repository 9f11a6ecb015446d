#include "mvlift/optim.hpp"

#include <cmath>

namespace mvlift {

OptimizerState OptimizerState::zeros_like(ModelParams& params) {
    OptimizerState state;
    for (const auto& t : learnable_tensors(params)) {
        state.m.push_back(Eigen::VectorXd::Zero(t.size));
        state.v.push_back(Eigen::VectorXd::Zero(t.size));
    }
    return state;
}

void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& state,
               const AdamParams& hyper) {
    auto param_views = learnable_tensors(params);
    auto grad_views = learnable_tensors(const_cast<GradientSet&>(grads));
    if (param_views.size() != grad_views.size() || param_views.size() != state.m.size()) {
        throw ContractViolation("adam_step: parameter, gradient and state layouts differ");
    }

    state.step += 1;
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));

    for (size_t i = 0; i < param_views.size(); ++i) {
        if (param_views[i].size != grad_views[i].size) {
            throw ContractViolation("adam_step: shape mismatch at tensor " + param_views[i].name);
        }
        Eigen::Map<Eigen::VectorXd> p(param_views[i].data, param_views[i].size);
        Eigen::Map<const Eigen::VectorXd> g(grad_views[i].data, grad_views[i].size);
        if (!g.allFinite()) {
            throw NumericalError("adam_step: non-finite gradient in tensor " +
                                 param_views[i].name);
        }
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g.cwiseProduct(g);
        const Eigen::VectorXd m_hat = state.m[i] / bias1;
        const Eigen::VectorXd v_hat = state.v[i] / bias2;
        p -= hyper.learning_rate *
             (m_hat.array() / (v_hat.array().sqrt() + hyper.epsilon)).matrix();
    }
}

}  // namespace mvlift
