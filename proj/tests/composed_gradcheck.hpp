#pragma once

// Gradient checking of the four losses composed through the lifter network:
// finite differences w.r.t. every learnable parameter against the analytic
// backward path. The output-triangulation loss is checked against its
// stop-gradient contract, i.e. with the pseudo-labels frozen at the
// unperturbed parameters.

#include <algorithm>
#include <random>
#include <vector>

#include "mvlift/losses.hpp"
#include "mvlift/model.hpp"
#include "test_helpers.hpp"

namespace mvlift::test {

enum class LossKind { In, Proj, Con, Out, Total };

struct ComposedFixture {
    BatchFixture base;
    std::vector<Eigen::MatrixXd> inputs;  // per camera, B x 2N
    LossWeights weights;
};

inline ComposedFixture make_composed_fixture(int n_samples, int n_cameras,
                                             Eigen::Index n_landmarks, std::mt19937_64& rng) {
    ComposedFixture fix;
    fix.base = make_consistent_batch(n_samples, n_cameras, n_landmarks, rng);
    fix.inputs.resize(n_cameras);
    for (int c = 0; c < n_cameras; ++c) {
        fix.inputs[c].resize(n_samples, 2 * n_landmarks);
        for (int s = 0; s < n_samples; ++s) {
            fix.inputs[c].row(s) =
                landmarks_to_input_row(fix.base.batch.samples[s].detections[c]);
        }
    }
    return fix;
}

inline void fill_predictions(const Eigen::MatrixXd& outputs, MultiViewBatch& batch, size_t cam) {
    for (Eigen::Index s = 0; s < outputs.rows(); ++s) {
        batch.samples[s].predictions[cam] = output_row_to_landmarks(outputs.row(s));
    }
}

/// Stop-gradient sides captured at the unperturbed parameters: the output
/// pseudo-labels and the consistency target predictions.
struct FrozenSides {
    std::vector<Landmarks3D> labels;
    std::vector<std::vector<Landmarks3D>> con_targets;
};

inline double composed_value(const ModelParams& params, ComposedFixture& fix, LossKind kind,
                             const FrozenSides* frozen) {
    ModelParams scratch = params;  // train-mode forward updates running stats
    for (size_t c = 0; c < fix.inputs.size(); ++c) {
        fill_predictions(forward(scratch, fix.inputs[c]), fix.base.batch, c);
    }
    const auto& batch = fix.base.batch;
    const auto& rig = fix.base.rig;
    const auto& options = fix.base.options;
    switch (kind) {
        case LossKind::In:
            return loss_input_triangulation(batch, rig, options).value;
        case LossKind::Proj:
            return loss_reprojection(batch, rig, options).value;
        case LossKind::Con:
            return loss_consistency_fixed(batch, rig, options, frozen->con_targets).value;
        case LossKind::Out:
            return loss_output_triangulation_fixed(batch, rig, options, frozen->labels).value;
        case LossKind::Total:
            return fix.weights.w_in * loss_input_triangulation(batch, rig, options).value +
                   fix.weights.w_proj * loss_reprojection(batch, rig, options).value +
                   fix.weights.w_con *
                       loss_consistency_fixed(batch, rig, options, frozen->con_targets).value +
                   fix.weights.w_out *
                       loss_output_triangulation_fixed(batch, rig, options, frozen->labels)
                           .value;
    }
    return 0.0;
}

inline GradientSet composed_gradient(const ModelParams& params, ComposedFixture& fix,
                                     LossKind kind, FrozenSides& frozen) {
    ModelParams scratch = params;
    std::vector<ForwardCache> caches(fix.inputs.size());
    for (size_t c = 0; c < fix.inputs.size(); ++c) {
        fill_predictions(forward(scratch, fix.inputs[c], &caches[c]), fix.base.batch, c);
    }
    const auto& batch = fix.base.batch;
    const auto& rig = fix.base.rig;
    const auto& options = fix.base.options;

    frozen.con_targets.clear();
    for (const auto& sample : batch.samples) frozen.con_targets.push_back(sample.predictions);
    if (kind == LossKind::Out || kind == LossKind::Total) {
        frozen.labels = output_pseudo_labels(batch, rig, options);
    }

    std::vector<std::vector<Landmarks3D>> grad;
    switch (kind) {
        case LossKind::In:
            grad = loss_input_triangulation(batch, rig, options).grad;
            break;
        case LossKind::Proj:
            grad = loss_reprojection(batch, rig, options).grad;
            break;
        case LossKind::Con:
            grad = loss_consistency(batch, rig, options).grad;
            break;
        case LossKind::Out:
            grad = loss_output_triangulation_fixed(batch, rig, options, frozen.labels).grad;
            break;
        case LossKind::Total: {
            const TotalLossResult total =
                total_objective(batch, rig, fix.weights, /*with_out=*/true, options);
            grad = total.grad;
            break;
        }
    }

    GradientSet result = GradientSet::zeros_like(scratch);
    const Eigen::Index out_dim = 3 * batch.n_landmarks();
    for (size_t c = 0; c < fix.inputs.size(); ++c) {
        Eigen::MatrixXd upstream(batch.n_samples(), out_dim);
        for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
            upstream.row(s) = landmarks_to_output_row(grad[s][c]);
        }
        result.add(backward(scratch, caches[c], upstream));
    }
    return result;
}

struct GradCheckReport {
    double worst_rel_err = 0.0;
    std::string worst_tensor;
    long checked = 0;
};

/// Checks up to `max_entries_per_tensor` entries of every learnable tensor
/// (all of them when the tensor is small) with central differences.
inline GradCheckReport composed_grad_check(ModelParams& params, ComposedFixture& fix,
                                           LossKind kind, double step = 1e-5,
                                           Eigen::Index max_entries_per_tensor = 0,
                                           std::uint64_t sample_seed = 0) {
    FrozenSides frozen;
    const GradientSet analytic = composed_gradient(params, fix, kind, frozen);

    auto param_views = learnable_tensors(params);
    auto grad_views = learnable_tensors(const_cast<GradientSet&>(analytic));
    std::mt19937_64 rng(sample_seed);

    GradCheckReport report;
    for (size_t t = 0; t < param_views.size(); ++t) {
        std::vector<Eigen::Index> entries;
        if (max_entries_per_tensor <= 0 || param_views[t].size <= max_entries_per_tensor) {
            entries.resize(param_views[t].size);
            std::iota(entries.begin(), entries.end(), 0);
        } else {
            std::uniform_int_distribution<Eigen::Index> pick(0, param_views[t].size - 1);
            for (Eigen::Index i = 0; i < max_entries_per_tensor; ++i) {
                entries.push_back(pick(rng));
            }
        }
        for (const Eigen::Index j : entries) {
            double& value = param_views[t].data[j];
            const double orig = value;
            value = orig + step;
            const double fp = composed_value(params, fix, kind, &frozen);
            value = orig - step;
            const double fm = composed_value(params, fix, kind, &frozen);
            value = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic_value = grad_views[t].data[j];
            ++report.checked;
            if (std::abs(numeric) < 1e-8 && std::abs(analytic_value) < 1e-8) continue;
            const double err = rel_err(analytic_value, numeric);
            if (err > report.worst_rel_err) {
                report.worst_rel_err = err;
                report.worst_tensor = param_views[t].name;
            }
        }
    }
    return report;
}

}  // namespace mvlift::test
