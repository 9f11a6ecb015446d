#include <doctest.h>

#include <random>

#include "mvlift/model.hpp"
#include "test_helpers.hpp"

using namespace mvlift;
using namespace mvlift::test;

namespace {

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
}

ModelConfig tiny_config(int n_landmarks = 3) {
    ModelConfig config;
    config.n_landmarks = n_landmarks;
    config.width = 8;
    config.n_blocks = 1;
    config.root_index = 0;
    return config;
}

// Scalar loss used by the parameter gradient checks: weighted sum of squares
// of the network output, a smooth function with a dense, nontrivial gradient.
double quadratic_loss(const Eigen::MatrixXd& out, const Eigen::MatrixXd& weights) {
    return 0.5 * (out.array().square() * weights.array()).sum();
}

Eigen::MatrixXd quadratic_loss_grad(const Eigen::MatrixXd& out, const Eigen::MatrixXd& weights) {
    return (out.array() * weights.array()).matrix();
}

}  // namespace

TEST_CASE("init_params is deterministic and seed-sensitive") {
    ModelConfig config;
    config.n_landmarks = 16;
    ModelParams a = init_params(config, 42);
    ModelParams b = init_params(config, 42);
    ModelParams c = init_params(config, 43);

    CHECK(a.input.weight.rows() == 32);
    CHECK(a.input.weight.cols() == 1024);
    CHECK(a.output.weight.rows() == 1024);
    CHECK(a.output.weight.cols() == 48);
    CHECK(a.blocks.size() == 4);

    auto va = learnable_tensors(a);
    auto vb = learnable_tensors(b);
    auto vc = learnable_tensors(c);
    bool identical = true;
    bool different = false;
    for (size_t i = 0; i < va.size(); ++i) {
        for (Eigen::Index j = 0; j < va[i].size; ++j) {
            if (va[i].data[j] != vb[i].data[j]) identical = false;
            if (va[i].data[j] != vc[i].data[j]) different = true;
        }
    }
    CHECK(identical);
    CHECK(different);

    // Batch-norm initialization: identity transform, fresh statistics.
    CHECK((a.blocks[0].bn1.gamma.array() == 1.0).all());
    CHECK((a.blocks[0].bn1.beta.array() == 0.0).all());
    CHECK((a.blocks[0].bn1.running_mean.array() == 0.0).all());
    CHECK((a.blocks[0].bn1.running_var.array() == 1.0).all());

    CHECK_THROWS_AS(init_params(ModelConfig{1, 8, 1, 0, 0.1, 1e-5}, 0), ValidationError);
}

TEST_CASE("parameter count follows the configured topology") {
    ModelConfig config = tiny_config(4);
    ModelParams params = init_params(config, 0);
    const std::int64_t dense_in = 8 * 8 + 8;
    const std::int64_t block = 2 * (8 * 8 + 8) + 2 * (8 + 8);
    const std::int64_t dense_out = 8 * 12 + 12;
    CHECK(params.parameter_count() == dense_in + block + dense_out);
}

TEST_CASE("eval forward is deterministic and batch-consistent") {
    std::mt19937_64 rng(5);
    ModelParams params = init_params(tiny_config(), 7);
    params.mode = Mode::Eval;

    const Eigen::MatrixXd x = random_batch(2, 6, rng);
    const Eigen::MatrixXd a = forward_eval(params, x);
    const Eigen::MatrixXd b = forward_eval(params, x);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    // Per-sample oracle: a 2-sample eval batch equals the two single-sample
    // forwards stacked.
    const Eigen::MatrixXd first = forward_eval(params, x.row(0));
    const Eigen::MatrixXd second = forward_eval(params, x.row(1));
    CHECK((a.row(0) - first.row(0)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.row(1) - second.row(0)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("forward output is root-centered by construction") {
    std::mt19937_64 rng(7);
    ModelConfig config = tiny_config(4);
    config.root_index = 2;
    ModelParams params = init_params(config, 1);

    Eigen::MatrixXd x = random_batch(5, 8, rng);
    const Eigen::MatrixXd train_out = forward(params, x);
    params.mode = Mode::Eval;
    const Eigen::MatrixXd eval_out = forward_eval(params, x);
    for (Eigen::Index r = 0; r < 5; ++r) {
        CHECK(train_out.row(r).segment(3 * 2, 3).norm() == 0.0);
        CHECK(eval_out.row(r).segment(3 * 2, 3).norm() == 0.0);
    }
}

TEST_CASE("train mode rejects batches of one") {
    std::mt19937_64 rng(9);
    ModelParams params = init_params(tiny_config(), 2);
    const Eigen::MatrixXd x = random_batch(1, 6, rng);
    CHECK_THROWS_AS(forward(params, x), ContractViolation);
    params.mode = Mode::Eval;
    CHECK_NOTHROW(forward(params, x));
}

TEST_CASE("train forward updates running statistics, eval forward does not") {
    std::mt19937_64 rng(11);
    ModelParams params = init_params(tiny_config(), 3);
    const Eigen::VectorXd before = params.blocks[0].bn1.running_mean;
    forward(params, random_batch(8, 6, rng));
    CHECK((params.blocks[0].bn1.running_mean - before).cwiseAbs().maxCoeff() > 0.0);

    params.mode = Mode::Eval;
    const Eigen::VectorXd frozen = params.blocks[0].bn1.running_mean;
    forward(params, random_batch(8, 6, rng));
    CHECK((params.blocks[0].bn1.running_mean - frozen).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zeroed blocks reduce to the identity in eval mode") {
    std::mt19937_64 rng(13);
    ModelConfig config;
    config.n_landmarks = 4;
    config.width = 16;
    config.n_blocks = 3;
    ModelParams full = init_params(config, 21);
    full.mode = Mode::Eval;

    ModelConfig flat_config = config;
    flat_config.n_blocks = 0;
    ModelParams flat = init_params(flat_config, 99);
    flat.mode = Mode::Eval;
    flat.input = full.input;
    flat.output = full.output;

    // Default running stats (gamma=1=sqrt(var), beta=0=mean): exact identity.
    for (auto& block : full.blocks) {
        block.fc1.weight.setZero();
        block.fc1.bias.setZero();
        block.fc2.weight.setZero();
        block.fc2.bias.setZero();
    }
    const Eigen::MatrixXd x = random_batch(6, 8, rng);
    CHECK((forward_eval(full, x) - forward_eval(flat, x)).cwiseAbs().maxCoeff() == 0.0);

    // gamma = sqrt(running var), beta = running mean with nontrivial stats:
    // identity up to the epsilon inside the normalization.
    std::uniform_real_distribution<double> var_dist(0.5, 2.0);
    std::normal_distribution<double> mean_dist(0.0, 1.0);
    for (auto& block : full.blocks) {
        for (BatchNormLayer* bn : {&block.bn1, &block.bn2}) {
            for (Eigen::Index i = 0; i < bn->gamma.size(); ++i) {
                bn->running_var[i] = var_dist(rng);
                bn->running_mean[i] = mean_dist(rng);
                bn->gamma[i] = std::sqrt(bn->running_var[i]);
                bn->beta[i] = bn->running_mean[i];
            }
        }
    }
    CHECK((forward_eval(full, x) - forward_eval(flat, x)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("backward basics: zero upstream, linearity, shape checks") {
    std::mt19937_64 rng(17);
    ModelParams params = init_params(tiny_config(), 4);
    const Eigen::MatrixXd x = random_batch(4, 6, rng);
    ForwardCache cache;
    forward(params, x, &cache);

    const GradientSet zero = backward(params, cache, Eigen::MatrixXd::Zero(4, 9));
    for (const auto& t : learnable_tensors(const_cast<GradientSet&>(zero))) {
        CHECK(Eigen::Map<Eigen::VectorXd>(t.data, t.size).cwiseAbs().maxCoeff() == 0.0);
    }

    const Eigen::MatrixXd upstream = random_batch(4, 9, rng);
    GradientSet g1 = backward(params, cache, upstream);
    GradientSet g2 = backward(params, cache, 2.0 * upstream);
    auto v1 = learnable_tensors(g1);
    auto v2 = learnable_tensors(g2);
    for (size_t i = 0; i < v1.size(); ++i) {
        for (Eigen::Index j = 0; j < v1[i].size; ++j) {
            CHECK(v2[i].data[j] == doctest::Approx(2.0 * v1[i].data[j]).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(backward(params, cache, Eigen::MatrixXd::Zero(4, 6)), ContractViolation);
}

TEST_CASE("analytic parameter gradients match central finite differences") {
    std::mt19937_64 rng(19);
    ModelConfig config = tiny_config(3);
    ModelParams params = init_params(config, 5);
    const Eigen::MatrixXd x = random_batch(4, config.input_dim(), rng);
    const Eigen::MatrixXd loss_weights = random_batch(4, config.output_dim(), rng);

    ForwardCache cache;
    const Eigen::MatrixXd out = forward(params, x, &cache);
    GradientSet analytic = backward(params, cache, quadratic_loss_grad(out, loss_weights));

    auto param_views = learnable_tensors(params);
    auto grad_views = learnable_tensors(analytic);
    const double step = 1e-5;
    double worst = 0.0;
    for (size_t t = 0; t < param_views.size(); ++t) {
        for (Eigen::Index j = 0; j < param_views[t].size; ++j) {
            double& value = param_views[t].data[j];
            const double orig = value;
            value = orig + step;
            ModelParams plus = params;  // copy so running stats stay put
            const double fp = quadratic_loss(forward(plus, x), loss_weights);
            value = orig - step;
            ModelParams minus = params;
            const double fm = quadratic_loss(forward(minus, x), loss_weights);
            value = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic_value = grad_views[t].data[j];
            if (std::abs(numeric) < 1e-8 && std::abs(analytic_value) < 1e-8) continue;
            worst = std::max(worst, rel_err(analytic_value, numeric));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("eval forward treats params as immutable state") {
    std::mt19937_64 rng(23);
    ModelParams params = init_params(tiny_config(), 6);
    params.mode = Mode::Eval;
    const ModelParams snapshot = params;
    forward_eval(params, random_batch(3, 6, rng));

    auto va = learnable_tensors(params);
    auto vb = learnable_tensors(const_cast<ModelParams&>(snapshot));
    for (size_t i = 0; i < va.size(); ++i) {
        for (Eigen::Index j = 0; j < va[i].size; ++j) {
            CHECK(va[i].data[j] == vb[i].data[j]);
        }
    }
}
