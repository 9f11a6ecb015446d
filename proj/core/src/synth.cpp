#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <string>

#include "mvlift/dataset.hpp"

namespace mvlift {

namespace {

Vec3 random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

CameraView make_ring_camera(int id, double angle, double radius, double height, double focal,
                            double image_width, double image_height) {
    const Vec3 position(radius * std::cos(angle), radius * std::sin(angle), height);
    const Vec3 up(0.0, 0.0, 1.0);
    const Vec3 forward = (-position).normalized();
    Vec3 x_axis = forward.cross(up);
    if (x_axis.norm() < 1e-9) x_axis = Vec3(1.0, 0.0, 0.0);
    x_axis.normalize();
    const Vec3 y_axis = forward.cross(x_axis);  // completes the frame; v grows downward

    Mat3 rotation;
    rotation.row(0) = x_axis.transpose();
    rotation.row(1) = y_axis.transpose();
    rotation.row(2) = forward.transpose();

    // Re-orthonormalize so the calibration invariants hold to machine precision.
    Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixU() * svd.matrixV().transpose();
    if (rotation.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        rotation = svd.matrixU() * flip * svd.matrixV().transpose();
    }

    Mat3 intrinsics = Mat3::Identity();
    intrinsics(0, 0) = focal;
    intrinsics(1, 1) = focal;
    intrinsics(0, 2) = image_width / 2.0;
    intrinsics(1, 2) = image_height / 2.0;

    return CameraView::make(id, intrinsics, rotation, -rotation * position);
}

Landmarks3D sample_skeleton(const SynthSkeleton& skeleton, const std::vector<double>& lengths,
                            double angle_range, double root_jitter, std::mt19937_64& rng) {
    const Eigen::Index n = skeleton.n_landmarks();
    std::uniform_real_distribution<double> yaw_dist(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> jitter(-root_jitter, root_jitter);

    Landmarks3D pose(n, 3);
    std::vector<Mat3> cumulative(n);
    const Vec3 root(jitter(rng), jitter(rng), 0.5 * jitter(rng));
    pose.row(0) = root.transpose();
    cumulative[0] = Eigen::AngleAxisd(yaw_dist(rng), Vec3::UnitZ()).toRotationMatrix();

    for (Eigen::Index i = 1; i < n; ++i) {
        const int parent = skeleton.parents[i];
        const double max_angle = angle_range * skeleton.angle_scales[i];
        Mat3 perturb = Mat3::Identity();
        if (max_angle > 0.0) {
            std::uniform_real_distribution<double> angle_dist(-max_angle, max_angle);
            perturb = Eigen::AngleAxisd(angle_dist(rng), random_unit_vector(rng))
                          .toRotationMatrix();
        }
        cumulative[i] = cumulative[parent] * perturb;
        pose.row(i) = pose.row(parent) +
                      (cumulative[i] * (skeleton.rest_directions[i] * lengths[i])).transpose();
    }
    return pose;
}

bool inside_all_frustums(const Landmarks3D& world, const CameraRig& rig, double image_width,
                         double image_height) {
    constexpr double margin = 1.0;
    for (const auto& cam : rig.cameras) {
        for (Eigen::Index m = 0; m < world.rows(); ++m) {
            const Vec3 in_cam =
                cam.rotation * world.row(m).transpose() + cam.translation;
            if (in_cam.z() <= kDepthEpsilon) return false;
            const Vec3 h = cam.intrinsics * in_cam;
            const double u = h.x() / h.z();
            const double v = h.y() / h.z();
            if (u < margin || u > image_width - margin || v < margin ||
                v > image_height - margin) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

SynthSkeleton humanoid16() {
    SynthSkeleton s;
    auto joint = [&s](const char* name, int parent, double length, Vec3 dir, double angle_scale) {
        s.names.emplace_back(name);
        s.parents.push_back(parent);
        s.bone_lengths.push_back(length);
        s.rest_directions.push_back(length > 0.0 ? dir.normalized() : Vec3::Zero());
        s.angle_scales.push_back(angle_scale);
    };
    joint("pelvis", -1, 0.0, Vec3::Zero(), 0.0);
    joint("spine", 0, 220.0, Vec3(0, 0, 1), 0.4);
    joint("thorax", 1, 230.0, Vec3(0, 0, 1), 0.4);
    joint("head", 2, 230.0, Vec3(0, 0, 1), 0.5);
    joint("l_shoulder", 2, 160.0, Vec3(0, 1, 0), 0.3);
    joint("l_elbow", 4, 280.0, Vec3(0, 0.3, -1), 1.0);
    joint("l_wrist", 5, 250.0, Vec3(0, 0, -1), 1.0);
    joint("r_shoulder", 2, 160.0, Vec3(0, -1, 0), 0.3);
    joint("r_elbow", 7, 280.0, Vec3(0, -0.3, -1), 1.0);
    joint("r_wrist", 8, 250.0, Vec3(0, 0, -1), 1.0);
    joint("l_hip", 0, 130.0, Vec3(0, 1, 0), 0.2);
    joint("l_knee", 10, 440.0, Vec3(0, 0, -1), 0.8);
    joint("l_ankle", 11, 440.0, Vec3(0, 0, -1), 0.8);
    joint("r_hip", 0, 130.0, Vec3(0, -1, 0), 0.2);
    joint("r_knee", 13, 440.0, Vec3(0, 0, -1), 0.8);
    joint("r_ankle", 14, 440.0, Vec3(0, 0, -1), 0.8);
    return s;
}

std::vector<std::pair<int, int>> skeleton_edges(const SynthSkeleton& skeleton) {
    std::vector<std::pair<int, int>> edges;
    for (Eigen::Index i = 0; i < skeleton.n_landmarks(); ++i) {
        if (skeleton.parents[i] >= 0) edges.emplace_back(static_cast<int>(i), skeleton.parents[i]);
    }
    return edges;
}

void SynthConfig::validate() const {
    if (n_samples < 0) throw ValidationError("synth: n_samples must be >= 0");
    if (n_cameras < 2) throw ValidationError("synth: n_cameras must be >= 2");
    if (pixel_noise_sigma < 0.0) throw ValidationError("synth: pixel noise sigma must be >= 0");
    if (outlier_rate < 0.0 || outlier_rate > 1.0) {
        throw ValidationError("synth: outlier rate must be in [0, 1]");
    }
    if (outlier_magnitude < 0.0) throw ValidationError("synth: outlier magnitude must be >= 0");
    if (joint_angle_range < 0.0) throw ValidationError("synth: joint angle range must be >= 0");
    if (ring_radius <= 0.0 || focal_px <= 0.0 || image_width <= 0.0 || image_height <= 0.0) {
        throw ValidationError("synth: rig dimensions must be positive");
    }
    if (norm_scale <= 0.0) throw ValidationError("synth: norm scale must be > 0");
    if (!bone_lengths.empty() &&
        bone_lengths.size() != humanoid16().bone_lengths.size()) {
        throw ValidationError("synth: bone length table must have " +
                              std::to_string(humanoid16().bone_lengths.size()) + " entries");
    }
}

Dataset synth_generate(const SynthConfig& config) {
    config.validate();
    const SynthSkeleton skeleton = humanoid16();
    const std::vector<double>& lengths =
        config.bone_lengths.empty() ? skeleton.bone_lengths : config.bone_lengths;

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> height_dist(-config.height_jitter,
                                                       config.height_jitter);

    Dataset dataset;
    dataset.rig.units = "mm";
    for (int c = 0; c < config.n_cameras; ++c) {
        const double angle = 2.0 * M_PI * static_cast<double>(c) / config.n_cameras;
        dataset.rig.cameras.push_back(
            make_ring_camera(c + 1, angle, config.ring_radius,
                             config.ring_height + height_dist(rng), config.focal_px,
                             config.image_width, config.image_height));
    }
    dataset.rig.validate();
    dataset.skeleton.names = skeleton.names;
    dataset.skeleton.root_index = 0;
    dataset.normalization.scale = config.norm_scale;

    std::normal_distribution<double> pixel_noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> outlier_shift(-config.outlier_magnitude,
                                                         config.outlier_magnitude);

    dataset.samples.reserve(config.n_samples);
    for (int s = 0; s < config.n_samples; ++s) {
        Landmarks3D world;
        bool accepted = false;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            world = sample_skeleton(skeleton, lengths, config.joint_angle_range,
                                    config.root_jitter, rng);
            if (inside_all_frustums(world, dataset.rig, config.image_width,
                                    config.image_height)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw GenerationError("synth: could not place sample " + std::to_string(s) +
                                  " inside all camera frustums after 1000 attempts");
        }

        RigSample sample;
        sample.id = s;
        Pose3D gt;
        gt.landmarks = world;
        gt.frame = Frame3D::World;
        sample.gt_pose = gt;

        for (const auto& cam : dataset.rig.cameras) {
            // Through the public projection path so the noiseless channel
            // equals project(world_to_camera(gt)) bit-for-bit.
            Pose2D det = project(world_to_camera(gt, cam), cam);
            for (Eigen::Index m = 0; m < world.rows(); ++m) {
                if (config.pixel_noise_sigma > 0.0) {
                    det.landmarks(m, 0) += config.pixel_noise_sigma * pixel_noise(rng);
                    det.landmarks(m, 1) += config.pixel_noise_sigma * pixel_noise(rng);
                }
                if (config.outlier_rate > 0.0 && unit(rng) < config.outlier_rate) {
                    det.landmarks(m, 0) += outlier_shift(rng);
                    det.landmarks(m, 1) += outlier_shift(rng);
                }
            }
            sample.detections.emplace(cam.id, std::move(det));
        }
        sample.input_triangulation = triangulate_dlt(sample.detections, dataset.rig);
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

}  // namespace mvlift
