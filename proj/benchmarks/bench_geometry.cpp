#include <benchmark/benchmark.h>

#include <random>

#include "mvlift/geometry.hpp"
#include "test_helpers.hpp"

using namespace mvlift;
using namespace mvlift::test;

static void BM_TriangulateDlt(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const CameraRig rig = random_rig(static_cast<int>(state.range(0)), rng);
    const Landmarks3D world = random_landmarks(16, rng);
    const auto observations = project_to_all(world, rig);
    for (auto _ : state) {
        benchmark::DoNotOptimize(triangulate_dlt(observations, rig));
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TriangulateDlt)->Arg(2)->Arg(4)->Arg(6);

static void BM_WorldToCamera(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const CameraView cam = random_camera(1, rng);
    const Pose3D pose = world_pose(random_landmarks(16, rng));
    for (auto _ : state) {
        benchmark::DoNotOptimize(world_to_camera(pose, cam));
    }
}
BENCHMARK(BM_WorldToCamera);

static void BM_Project(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const CameraView cam = random_camera(1, rng);
    const Pose3D pose = world_to_camera(world_pose(random_landmarks(16, rng)), cam);
    for (auto _ : state) {
        benchmark::DoNotOptimize(project(pose, cam));
    }
}
BENCHMARK(BM_Project);
