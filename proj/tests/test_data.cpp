#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mvlift/dataset.hpp"
#include "mvlift/io.hpp"
#include "test_helpers.hpp"

using namespace mvlift;
using namespace mvlift::test;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mvlift_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

SynthConfig small_synth(std::uint64_t seed) {
    SynthConfig config;
    config.n_samples = 12;
    config.n_cameras = 3;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
    const Dataset a = synth_generate(small_synth(5));
    const Dataset b = synth_generate(small_synth(5));
    const Dataset c = synth_generate(small_synth(6));

    REQUIRE(a.n_samples() == b.n_samples());
    bool identical = true;
    for (Eigen::Index s = 0; s < a.n_samples(); ++s) {
        for (const auto& [cam_id, det] : a.samples[s].detections) {
            if ((det.landmarks - b.samples[s].detections.at(cam_id).landmarks)
                    .cwiseAbs()
                    .maxCoeff() != 0.0) {
                identical = false;
            }
        }
        if ((a.samples[s].gt_pose->landmarks - b.samples[s].gt_pose->landmarks)
                .cwiseAbs()
                .maxCoeff() != 0.0) {
            identical = false;
        }
    }
    CHECK(identical);
    CHECK((a.samples[0].gt_pose->landmarks - c.samples[0].gt_pose->landmarks)
              .cwiseAbs()
              .maxCoeff() > 0.0);
}

TEST_CASE("noiseless synthetic data triangulates back to the ground truth") {
    SynthConfig config = small_synth(7);
    config.n_samples = 20;
    config.n_cameras = 4;
    const Dataset dataset = synth_generate(config);
    dataset.validate();
    for (const auto& sample : dataset.samples) {
        const Pose3D recovered = triangulate_dlt(sample.detections, dataset.rig);
        CHECK((recovered.landmarks - sample.gt_pose->landmarks).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("synthetic bone lengths match the table exactly") {
    SynthConfig config = small_synth(11);
    const SynthSkeleton skeleton = humanoid16();
    const Dataset dataset = synth_generate(config);
    for (const auto& sample : dataset.samples) {
        const Landmarks3D& pose = sample.gt_pose->landmarks;
        for (Eigen::Index j = 1; j < skeleton.n_landmarks(); ++j) {
            const double length =
                (pose.row(j) - pose.row(skeleton.parents[j])).norm();
            CHECK(std::abs(length - skeleton.bone_lengths[j]) < 1e-9);
        }
    }
}

TEST_CASE("noiseless detections equal projected ground truth exactly") {
    const Dataset dataset = synth_generate(small_synth(13));
    for (const auto& sample : dataset.samples) {
        for (const auto& cam : dataset.rig.cameras) {
            const Pose2D projected =
                project(world_to_camera(*sample.gt_pose, cam), cam);
            CHECK((projected.landmarks - sample.detections.at(cam.id).landmarks)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("noise and outliers perturb detections as configured") {
    SynthConfig config = small_synth(17);
    config.n_samples = 40;
    config.pixel_noise_sigma = 2.0;
    config.outlier_rate = 0.05;
    config.outlier_magnitude = 80.0;
    const Dataset noisy = synth_generate(config);

    SynthConfig clean_config = config;
    clean_config.pixel_noise_sigma = 0.0;
    clean_config.outlier_rate = 0.0;
    // Different noise draws change the stream, so compare against projections.
    double max_dev = 0.0;
    std::int64_t big = 0, total = 0;
    for (const auto& sample : noisy.samples) {
        for (const auto& cam : noisy.rig.cameras) {
            const Pose2D exact = project(world_to_camera(*sample.gt_pose, cam), cam);
            const Landmarks2D dev =
                (sample.detections.at(cam.id).landmarks - exact.landmarks).cwiseAbs();
            max_dev = std::max(max_dev, dev.maxCoeff());
            big += (dev.rowwise().maxCoeff().array() > 10.0).count();
            total += dev.rows();
        }
    }
    CHECK(max_dev > 0.5);                      // noise is present
    CHECK(max_dev < 80.0 + 8 * 2.0);           // bounded by outlier + noise tails
    CHECK(double(big) / double(total) < 0.15); // outliers stay sparse
}

TEST_CASE("frustum constraint is enforced or generation fails loudly") {
    const Dataset dataset = synth_generate(small_synth(19));
    for (const auto& sample : dataset.samples) {
        for (const auto& cam : dataset.rig.cameras) {
            const Landmarks2D& px = sample.detections.at(cam.id).landmarks;
            CHECK((px.col(0).array() >= 0.0).all());
            CHECK((px.col(0).array() <= 1000.0).all());
            CHECK((px.col(1).array() >= 0.0).all());
            CHECK((px.col(1).array() <= 1000.0).all());
        }
    }

    SynthConfig impossible = small_synth(23);
    impossible.focal_px = 20000.0;  // skeleton can never fit in frame
    CHECK_THROWS_AS(synth_generate(impossible), GenerationError);
}

TEST_CASE("normalize_2d centers the root, scales, and inverts") {
    std::mt19937_64 rng(29);
    Pose2D pose;
    pose.frame = Frame2D::Pixel;
    pose.landmarks.resize(5, 2);
    std::uniform_real_distribution<double> px(0.0, 1000.0);
    for (Eigen::Index i = 0; i < pose.landmarks.size(); ++i) pose.landmarks.data()[i] = px(rng);

    Norm2DParams params{640.0};
    const Pose2D normalized = normalize_2d(pose, params, 2);
    CHECK(normalized.landmarks.row(2).norm() == 0.0);
    CHECK(normalized.frame == Frame2D::Normalized);

    const Pose2D restored =
        denormalize_2d(normalized, params, pose.landmarks.row(2).transpose());
    CHECK((restored.landmarks - pose.landmarks).cwiseAbs().maxCoeff() < 1e-12);

    Norm2DParams unit{1.0};
    const Pose2D translated = normalize_2d(pose, unit, 2);
    CHECK((translated.landmarks -
           (pose.landmarks.rowwise() - pose.landmarks.row(2)))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    CHECK_THROWS_AS(normalize_2d(pose, Norm2DParams{0.0}, 2), ValidationError);
}

TEST_CASE("dataset save/load/save round-trip is byte-identical") {
    SynthConfig config = small_synth(31);
    config.pixel_noise_sigma = 1.5;
    const Dataset dataset = synth_generate(config);

    const auto dir1 = temp_dir("roundtrip1");
    const auto dir2 = temp_dir("roundtrip2");
    const auto manifest1 = save_dataset(dataset, dir1);
    const Dataset loaded = load_manifest(manifest1);
    const auto manifest2 = save_dataset(loaded, dir2);

    for (const char* name : {"calibration.txt", "detections.txt", "gt_poses.txt",
                             "manifest.json"}) {
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));
    }

    loaded.validate();
    CHECK(loaded.n_samples() == dataset.n_samples());
    CHECK(loaded.skeleton.names == dataset.skeleton.names);
    CHECK(loaded.normalization.scale == dataset.normalization.scale);
    for (Eigen::Index s = 0; s < dataset.n_samples(); ++s) {
        CHECK((loaded.samples[s].gt_pose->landmarks - dataset.samples[s].gt_pose->landmarks)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}

TEST_CASE("empty detections file loads as an empty dataset with a valid rig") {
    const Dataset dataset = synth_generate(small_synth(37));
    const auto dir = temp_dir("empty");
    save_calibration(dataset.rig, dir / "calibration.txt");
    {
        std::ofstream out(dir / "detections.txt");
        out << "# mvlift detections v1\nlandmarks 16\n";
    }
    const Dataset loaded = load_dataset(dir / "calibration.txt", dir / "detections.txt");
    CHECK(loaded.n_samples() == 0);
    CHECK(loaded.rig.n_cameras() == dataset.rig.n_cameras());
}

TEST_CASE("detections referencing unknown cameras are rejected by id") {
    const Dataset dataset = synth_generate(small_synth(41));
    const auto dir = temp_dir("unknown_cam");
    save_calibration(dataset.rig, dir / "calibration.txt");
    {
        std::ofstream out(dir / "detections.txt");
        out << "# mvlift detections v1\nlandmarks 2\n";
        out << "det 0 99 1 2 3 4\n";
    }
    try {
        load_dataset(dir / "calibration.txt", dir / "detections.txt");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("malformed lines carry file and line context") {
    const auto dir = temp_dir("malformed");
    {
        std::ofstream out(dir / "detections.txt");
        out << "# mvlift detections v1\nlandmarks 2\ndet 0 1 1 2 3 oops\n";
    }
    try {
        load_detections(dir / "detections.txt");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("detections.txt:3") != std::string::npos);
    }
}

TEST_CASE("incomplete samples are skipped at load") {
    const Dataset dataset = synth_generate(small_synth(43));
    const auto dir = temp_dir("incomplete");
    const auto manifest = save_dataset(dataset, dir);

    // Drop one camera's record of sample 0 from the detections file.
    const auto det_path = dir / "detections.txt";
    std::ifstream in(det_path);
    std::vector<std::string> lines;
    std::string line;
    bool dropped = false;
    while (std::getline(in, line)) {
        if (!dropped && line.rfind("det 0 1 ", 0) == 0) {
            dropped = true;
            continue;
        }
        lines.push_back(line);
    }
    in.close();
    REQUIRE(dropped);
    std::ofstream out(det_path);
    for (const auto& l : lines) out << l << "\n";
    out.close();

    const Dataset reloaded = load_manifest(manifest);
    CHECK(reloaded.n_samples() == dataset.n_samples() - 1);
}

TEST_CASE("nonzero distortion in a calibration file is rejected") {
    const Dataset dataset = synth_generate(small_synth(47));
    const auto dir = temp_dir("distortion");
    save_calibration(dataset.rig, dir / "calibration.txt");
    std::ofstream out(dir / "calibration.txt", std::ios::app);
    out << "camera 9\nK 900 0 500 0 900 500 0 0 1\nR 1 0 0 0 1 0 0 0 1\nt 0 0 0\n";
    out << "dist 0 0.1 0 0 0\n";
    out.close();
    CHECK_THROWS_AS(load_calibration(dir / "calibration.txt"), ValidationError);
}

TEST_CASE("triangulation cache verification detects corruption") {
    SynthConfig config = small_synth(53);
    Dataset dataset = synth_generate(config);
    dataset.verify_triangulation_cache(1e-9);

    dataset.samples[2].input_triangulation->landmarks(3, 1) += 5.0;
    CHECK_THROWS_AS(dataset.verify_triangulation_cache(1e-9), ValidationError);
}

TEST_CASE("calibration file round-trips through save and load") {
    std::mt19937_64 rng(59);
    const CameraRig rig = random_rig(4, rng);
    const auto dir = temp_dir("calib");
    save_calibration(rig, dir / "c.txt");
    const CameraRig loaded = load_calibration(dir / "c.txt");
    REQUIRE(loaded.n_cameras() == rig.n_cameras());
    for (Eigen::Index c = 0; c < rig.n_cameras(); ++c) {
        CHECK((loaded.cameras[c].intrinsics - rig.cameras[c].intrinsics).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((loaded.cameras[c].rotation - rig.cameras[c].rotation).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((loaded.cameras[c].translation - rig.cameras[c].translation)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}
