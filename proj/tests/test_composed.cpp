#include <doctest.h>

#include <random>

#include "composed_gradcheck.hpp"

using namespace mvlift;
using namespace mvlift::test;

// Gradient checks of each loss composed through a tiny network
// (width 8, one block), exhaustive over every learnable parameter.
TEST_CASE("composed gradients: four losses through a tiny network") {
    std::mt19937_64 rng(211);
    ComposedFixture fix = make_composed_fixture(4, 3, 5, rng);

    ModelConfig config;
    config.n_landmarks = 5;
    config.width = 8;
    config.n_blocks = 1;
    config.root_index = 0;
    ModelParams params = init_params(config, 77);

    SUBCASE("input triangulation") {
        const auto report = composed_grad_check(params, fix, LossKind::In);
        CAPTURE(report.worst_tensor);
        CHECK(report.worst_rel_err < 1e-4);
    }
    SUBCASE("re-projection") {
        const auto report = composed_grad_check(params, fix, LossKind::Proj);
        CAPTURE(report.worst_tensor);
        CHECK(report.worst_rel_err < 1e-4);
    }
    SUBCASE("consistency") {
        const auto report = composed_grad_check(params, fix, LossKind::Con);
        CAPTURE(report.worst_tensor);
        CHECK(report.worst_rel_err < 1e-4);
    }
    SUBCASE("output triangulation") {
        const auto report = composed_grad_check(params, fix, LossKind::Out);
        CAPTURE(report.worst_tensor);
        CHECK(report.worst_rel_err < 1e-4);
    }
    SUBCASE("weighted total") {
        const auto report = composed_grad_check(params, fix, LossKind::Total);
        CAPTURE(report.worst_tensor);
        CHECK(report.worst_rel_err < 1e-4);
    }
}
