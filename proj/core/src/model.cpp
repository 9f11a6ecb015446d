#include "mvlift/model.hpp"

#include <cmath>
#include <random>

namespace mvlift {

namespace {

Eigen::MatrixXd dense_forward(const DenseLayer& layer, const Eigen::MatrixXd& x) {
    return (x * layer.weight).rowwise() + layer.bias.transpose();
}

// Train-mode batch normalization over the batch dimension. Fills xhat and
// inv_std for the backward pass and updates the running statistics.
Eigen::MatrixXd bn_forward_train(BatchNormLayer& bn, const Eigen::MatrixXd& x, double momentum,
                                 double epsilon, Eigen::MatrixXd& xhat, Eigen::VectorXd& inv_std) {
    const double batch = static_cast<double>(x.rows());
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    inv_std = (var.transpose().array() + epsilon).rsqrt().matrix();
    xhat = (centered.array().rowwise() * inv_std.transpose().array()).matrix();

    const Eigen::RowVectorXd var_unbiased = var * (batch / (batch - 1.0));
    bn.running_mean = (1.0 - momentum) * bn.running_mean + momentum * mean.transpose();
    bn.running_var = (1.0 - momentum) * bn.running_var + momentum * var_unbiased.transpose();

    Eigen::MatrixXd y = (xhat.array().rowwise() * bn.gamma.transpose().array()).matrix();
    y.rowwise() += bn.beta.transpose();
    return y;
}

Eigen::MatrixXd bn_forward_eval(const BatchNormLayer& bn, const Eigen::MatrixXd& x,
                                double epsilon) {
    const Eigen::ArrayXd inv_std = (bn.running_var.array() + epsilon).rsqrt();
    Eigen::MatrixXd y = ((x.rowwise() - bn.running_mean.transpose()).array().rowwise() *
                         (bn.gamma.array() * inv_std).transpose())
                            .matrix();
    y.rowwise() += bn.beta.transpose();
    return y;
}

// Gradient through train-mode batch normalization (through the batch
// statistics as well). Returns dL/dx and fills the parameter gradients.
Eigen::MatrixXd bn_backward(const BatchNormLayer& bn, const Eigen::MatrixXd& xhat,
                            const Eigen::VectorXd& inv_std, const Eigen::MatrixXd& g,
                            BatchNormGrad& grad) {
    const double batch = static_cast<double>(g.rows());
    grad.gamma = (g.array() * xhat.array()).colwise().sum().transpose();
    grad.beta = g.colwise().sum().transpose();

    const Eigen::MatrixXd dxhat = (g.array().rowwise() * bn.gamma.transpose().array()).matrix();
    const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum();

    Eigen::MatrixXd dx =
        (batch * dxhat.array() - (Eigen::MatrixXd::Ones(g.rows(), 1) * sum_dxhat).array() -
         xhat.array() * (Eigen::MatrixXd::Ones(g.rows(), 1) * sum_dxhat_xhat).array())
            .matrix();
    dx.array().rowwise() *= (inv_std / batch).transpose().array();
    return dx;
}

void center_output(Eigen::MatrixXd& out, int root_index, int n_landmarks) {
    const Eigen::MatrixXd root = out.middleCols(3 * root_index, 3);
    for (int n = 0; n < n_landmarks; ++n) {
        out.middleCols(3 * n, 3) -= root;
    }
}

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(rng);
    }
}

DenseLayer init_dense(int in, int out, std::mt19937_64& rng) {
    DenseLayer layer;
    layer.weight.resize(in, out);
    layer.bias.resize(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    fill_uniform(layer.weight, bound, rng);
    fill_uniform(layer.bias, bound, rng);
    return layer;
}

BatchNormLayer init_bn(int width) {
    BatchNormLayer bn;
    bn.gamma = Eigen::VectorXd::Ones(width);
    bn.beta = Eigen::VectorXd::Zero(width);
    bn.running_mean = Eigen::VectorXd::Zero(width);
    bn.running_var = Eigen::VectorXd::Ones(width);
    return bn;
}

}  // namespace

void ModelConfig::validate() const {
    if (n_landmarks < 2) throw ValidationError("model: n_landmarks must be >= 2");
    if (width < 1) throw ValidationError("model: width must be >= 1");
    if (n_blocks < 0) throw ValidationError("model: n_blocks must be >= 0");
    if (root_index < 0 || root_index >= n_landmarks) {
        throw ValidationError("model: root index out of range");
    }
    if (bn_momentum <= 0.0 || bn_momentum > 1.0) {
        throw ValidationError("model: bn_momentum must be in (0, 1]");
    }
    if (bn_epsilon <= 0.0) throw ValidationError("model: bn_epsilon must be > 0");
    if (!(output_scale > 0.0)) throw ValidationError("model: output_scale must be > 0");
}

std::int64_t ModelParams::parameter_count() const {
    std::int64_t count = 0;
    auto& self = const_cast<ModelParams&>(*this);
    for (const auto& t : learnable_tensors(self)) count += t.size;
    return count;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    ModelParams params;
    params.config = config;
    params.input = init_dense(config.input_dim(), config.width, rng);
    params.blocks.resize(config.n_blocks);
    for (auto& block : params.blocks) {
        block.fc1 = init_dense(config.width, config.width, rng);
        block.bn1 = init_bn(config.width);
        block.fc2 = init_dense(config.width, config.width, rng);
        block.bn2 = init_bn(config.width);
    }
    params.output = init_dense(config.width, config.output_dim(), rng);
    params.mode = Mode::Train;
    return params;
}

GradientSet GradientSet::zeros_like(const ModelParams& params) {
    GradientSet g;
    auto zero_dense = [](const DenseLayer& d) {
        return DenseGrad{Eigen::MatrixXd::Zero(d.weight.rows(), d.weight.cols()),
                         Eigen::VectorXd::Zero(d.bias.size())};
    };
    auto zero_bn = [](const BatchNormLayer& b) {
        return BatchNormGrad{Eigen::VectorXd::Zero(b.gamma.size()),
                             Eigen::VectorXd::Zero(b.beta.size())};
    };
    g.input = zero_dense(params.input);
    g.blocks.reserve(params.blocks.size());
    for (const auto& block : params.blocks) {
        g.blocks.push_back(BlockGrad{zero_dense(block.fc1), zero_bn(block.bn1),
                                     zero_dense(block.fc2), zero_bn(block.bn2)});
    }
    g.output = zero_dense(params.output);
    return g;
}

void GradientSet::add(const GradientSet& other) {
    auto self = learnable_tensors(*this);
    auto rhs = learnable_tensors(const_cast<GradientSet&>(other));
    for (size_t i = 0; i < self.size(); ++i) {
        Eigen::Map<Eigen::VectorXd>(self[i].data, self[i].size) +=
            Eigen::Map<const Eigen::VectorXd>(rhs[i].data, rhs[i].size);
    }
}

void GradientSet::scale(double factor) {
    for (auto& t : learnable_tensors(*this)) {
        Eigen::Map<Eigen::VectorXd>(t.data, t.size) *= factor;
    }
}

namespace {

std::string tensor_name(const char* part, int block, const char* leaf) {
    if (block == -1) return std::string("input.") + leaf;
    if (block == -2) return std::string("output.") + leaf;
    return "block" + std::to_string(block) + "." + part + "." + leaf;
}

}  // namespace

std::vector<TensorView> learnable_tensors(ModelParams& params) {
    std::vector<TensorView> out;
    auto push = [&out](const std::string& name, auto& tensor) {
        out.push_back(TensorView{name, tensor.data(), tensor.size()});
    };
    auto push_dense = [&](const char* part, int block, DenseLayer& d) {
        push(tensor_name(part, block, "weight"), d.weight);
        push(tensor_name(part, block, "bias"), d.bias);
    };
    push_dense("input", -1, params.input);
    for (size_t i = 0; i < params.blocks.size(); ++i) {
        const int bi = static_cast<int>(i);
        auto& b = params.blocks[i];
        push_dense("fc1", bi, b.fc1);
        push(tensor_name("bn1", bi, "gamma"), b.bn1.gamma);
        push(tensor_name("bn1", bi, "beta"), b.bn1.beta);
        push_dense("fc2", bi, b.fc2);
        push(tensor_name("bn2", bi, "gamma"), b.bn2.gamma);
        push(tensor_name("bn2", bi, "beta"), b.bn2.beta);
    }
    push_dense("output", -2, params.output);
    return out;
}

std::vector<TensorView> learnable_tensors(GradientSet& grads) {
    std::vector<TensorView> out;
    auto push = [&out](const std::string& name, auto& tensor) {
        out.push_back(TensorView{name, tensor.data(), tensor.size()});
    };
    auto push_dense = [&](const char* part, int block, DenseGrad& d) {
        push(tensor_name(part, block, "weight"), d.weight);
        push(tensor_name(part, block, "bias"), d.bias);
    };
    push_dense("input", -1, grads.input);
    for (size_t i = 0; i < grads.blocks.size(); ++i) {
        const int bi = static_cast<int>(i);
        auto& b = grads.blocks[i];
        push_dense("fc1", bi, b.fc1);
        push(tensor_name("bn1", bi, "gamma"), b.bn1.gamma);
        push(tensor_name("bn1", bi, "beta"), b.bn1.beta);
        push_dense("fc2", bi, b.fc2);
        push(tensor_name("bn2", bi, "gamma"), b.bn2.gamma);
        push(tensor_name("bn2", bi, "beta"), b.bn2.beta);
    }
    push_dense("output", -2, grads.output);
    return out;
}

std::vector<TensorView> running_stat_tensors(ModelParams& params) {
    std::vector<TensorView> out;
    for (size_t i = 0; i < params.blocks.size(); ++i) {
        auto& b = params.blocks[i];
        const std::string prefix = "block" + std::to_string(i) + ".";
        out.push_back({prefix + "bn1.running_mean", b.bn1.running_mean.data(),
                       b.bn1.running_mean.size()});
        out.push_back(
            {prefix + "bn1.running_var", b.bn1.running_var.data(), b.bn1.running_var.size()});
        out.push_back({prefix + "bn2.running_mean", b.bn2.running_mean.data(),
                       b.bn2.running_mean.size()});
        out.push_back(
            {prefix + "bn2.running_var", b.bn2.running_var.data(), b.bn2.running_var.size()});
    }
    return out;
}

Eigen::MatrixXd forward(ModelParams& params, const Eigen::MatrixXd& input, ForwardCache* cache) {
    if (input.cols() != params.config.input_dim()) {
        throw ContractViolation("forward: expected " +
                                std::to_string(params.config.input_dim()) +
                                " input columns, got " + std::to_string(input.cols()));
    }
    if (params.mode == Mode::Eval) {
        if (cache != nullptr) {
            throw ContractViolation("forward: backward caches require train mode");
        }
        return forward_eval(params, input);
    }
    if (input.rows() < 2) {
        throw ContractViolation(
            "forward: train mode needs a batch of >= 2 samples (batch variance undefined)");
    }

    const double momentum = params.config.bn_momentum;
    const double epsilon = params.config.bn_epsilon;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.input = input;
    c.blocks.resize(params.blocks.size());

    c.h0 = dense_forward(params.input, input);
    Eigen::MatrixXd h = c.h0;
    for (size_t i = 0; i < params.blocks.size(); ++i) {
        auto& block = params.blocks[i];
        auto& bc = c.blocks[i];
        bc.block_input = h;
        const Eigen::MatrixXd a1 = dense_forward(block.fc1, h);
        bc.post_bn1 = bn_forward_train(block.bn1, a1, momentum, epsilon, bc.xhat1, bc.inv_std1);
        bc.relu1 = bc.post_bn1.cwiseMax(0.0);
        const Eigen::MatrixXd a2 = dense_forward(block.fc2, bc.relu1);
        bc.post_bn2 = bn_forward_train(block.bn2, a2, momentum, epsilon, bc.xhat2, bc.inv_std2);
        h += bc.post_bn2.cwiseMax(0.0);
    }
    c.h_last = h;

    Eigen::MatrixXd out = params.config.output_scale * dense_forward(params.output, h);
    center_output(out, params.config.root_index, params.config.n_landmarks);
    return out;
}

Eigen::MatrixXd forward_eval(const ModelParams& params, const Eigen::MatrixXd& input) {
    if (input.cols() != params.config.input_dim()) {
        throw ContractViolation("forward_eval: expected " +
                                std::to_string(params.config.input_dim()) +
                                " input columns, got " + std::to_string(input.cols()));
    }
    const double epsilon = params.config.bn_epsilon;
    Eigen::MatrixXd h = dense_forward(params.input, input);
    for (const auto& block : params.blocks) {
        const Eigen::MatrixXd r1 =
            bn_forward_eval(block.bn1, dense_forward(block.fc1, h), epsilon).cwiseMax(0.0);
        const Eigen::MatrixXd r2 =
            bn_forward_eval(block.bn2, dense_forward(block.fc2, r1), epsilon).cwiseMax(0.0);
        h += r2;
    }
    Eigen::MatrixXd out = params.config.output_scale * dense_forward(params.output, h);
    center_output(out, params.config.root_index, params.config.n_landmarks);
    return out;
}

GradientSet backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& upstream) {
    if (upstream.rows() != cache.input.rows() ||
        upstream.cols() != params.config.output_dim()) {
        throw ContractViolation("backward: upstream gradient shape mismatch");
    }
    if (cache.blocks.size() != params.blocks.size()) {
        throw ContractViolation("backward: cache does not match the parameter topology");
    }

    GradientSet grads = GradientSet::zeros_like(params);

    // Root-centering: d y_n / d o_m = delta_nm - delta_{m,root}.
    Eigen::MatrixXd g_out = upstream;
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(upstream.rows(), 3);
    for (int n = 0; n < params.config.n_landmarks; ++n) {
        total += upstream.middleCols(3 * n, 3);
    }
    g_out.middleCols(3 * params.config.root_index, 3) -= total;
    g_out *= params.config.output_scale;

    // Output dense layer.
    grads.output.weight = cache.h_last.transpose() * g_out;
    grads.output.bias = g_out.colwise().sum().transpose();
    Eigen::MatrixXd g_h = g_out * params.output.weight.transpose();

    for (int i = static_cast<int>(params.blocks.size()) - 1; i >= 0; --i) {
        const auto& block = params.blocks[i];
        const auto& bc = cache.blocks[i];
        auto& bg = grads.blocks[i];

        // Skip connection: h_out = h_in + relu(bn2(fc2(relu(bn1(fc1(h_in)))))).
        const Eigen::MatrixXd g_r2 =
            ((bc.post_bn2.array() > 0.0).cast<double>() * g_h.array()).matrix();
        const Eigen::MatrixXd g_a2 = bn_backward(block.bn2, bc.xhat2, bc.inv_std2, g_r2, bg.bn2);
        bg.fc2.weight = bc.relu1.transpose() * g_a2;
        bg.fc2.bias = g_a2.colwise().sum().transpose();
        const Eigen::MatrixXd g_r1_pre = g_a2 * block.fc2.weight.transpose();
        const Eigen::MatrixXd g_n1 =
            ((bc.post_bn1.array() > 0.0).cast<double>() * g_r1_pre.array()).matrix();
        const Eigen::MatrixXd g_a1 = bn_backward(block.bn1, bc.xhat1, bc.inv_std1, g_n1, bg.bn1);
        bg.fc1.weight = bc.block_input.transpose() * g_a1;
        bg.fc1.bias = g_a1.colwise().sum().transpose();
        g_h = g_a1 * block.fc1.weight.transpose() + g_h;
    }

    grads.input.weight = cache.input.transpose() * g_h;
    grads.input.bias = g_h.colwise().sum().transpose();
    return grads;
}

Landmarks3D output_row_to_landmarks(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const Eigen::Index n = row.size() / 3;
    Landmarks3D out(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, 0) = row(3 * i);
        out(i, 1) = row(3 * i + 1);
        out(i, 2) = row(3 * i + 2);
    }
    return out;
}

Eigen::RowVectorXd landmarks_to_output_row(const Landmarks3D& landmarks) {
    Eigen::RowVectorXd row(landmarks.rows() * 3);
    for (Eigen::Index i = 0; i < landmarks.rows(); ++i) {
        row(3 * i) = landmarks(i, 0);
        row(3 * i + 1) = landmarks(i, 1);
        row(3 * i + 2) = landmarks(i, 2);
    }
    return row;
}

Eigen::RowVectorXd landmarks_to_input_row(const Landmarks2D& landmarks) {
    Eigen::RowVectorXd row(landmarks.rows() * 2);
    for (Eigen::Index i = 0; i < landmarks.rows(); ++i) {
        row(2 * i) = landmarks(i, 0);
        row(2 * i + 1) = landmarks(i, 1);
    }
    return row;
}

}  // namespace mvlift
