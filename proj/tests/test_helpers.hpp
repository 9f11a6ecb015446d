#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mvlift/geometry.hpp"
#include "mvlift/losses.hpp"
#include "mvlift/model.hpp"
#include "mvlift/types.hpp"

namespace mvlift::test {

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline CameraView random_camera(int id, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> focal(800.0, 1200.0);
    std::uniform_real_distribution<double> principal(400.0, 600.0);
    std::uniform_real_distribution<double> radius(3000.0, 5000.0);
    std::uniform_real_distribution<double> height(-1000.0, 1000.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

    const double a = angle(rng);
    const double r = radius(rng);
    const Vec3 position(r * std::cos(a), r * std::sin(a), height(rng));
    const Vec3 forward = (-position).normalized();
    Vec3 x_axis = forward.cross(Vec3::UnitZ());
    if (x_axis.norm() < 1e-6) x_axis = Vec3::UnitX();
    x_axis.normalize();
    const Vec3 y_axis = forward.cross(x_axis);

    Mat3 rotation;
    rotation.row(0) = x_axis.transpose();
    rotation.row(1) = y_axis.transpose();
    rotation.row(2) = forward.transpose();
    Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixU() * svd.matrixV().transpose();

    Mat3 intrinsics = Mat3::Identity();
    intrinsics(0, 0) = focal(rng);
    intrinsics(1, 1) = focal(rng);
    intrinsics(0, 2) = principal(rng);
    intrinsics(1, 2) = principal(rng);

    return CameraView::make(id, intrinsics, rotation, -rotation * position);
}

inline CameraRig random_rig(int n_cameras, std::mt19937_64& rng) {
    CameraRig rig;
    for (int c = 0; c < n_cameras; ++c) {
        rig.cameras.push_back(random_camera(c + 1, rng));
    }
    rig.validate();
    return rig;
}

/// Random landmark cloud near the world origin (well inside every random_rig
/// camera's frustum).
inline Landmarks3D random_landmarks(Eigen::Index n, std::mt19937_64& rng, double spread = 400.0) {
    std::normal_distribution<double> gauss(0.0, spread);
    Landmarks3D out(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, 0) = gauss(rng);
        out(i, 1) = gauss(rng);
        out(i, 2) = gauss(rng);
    }
    return out;
}

inline Pose3D world_pose(const Landmarks3D& landmarks) {
    Pose3D pose;
    pose.landmarks = landmarks;
    pose.frame = Frame3D::World;
    return pose;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Pixel-frame projections of a world pose into every rig camera.
inline std::map<int, Pose2D> project_to_all(const Landmarks3D& world, const CameraRig& rig) {
    std::map<int, Pose2D> obs;
    for (const auto& cam : rig.cameras) {
        obs.emplace(cam.id, project(world_to_camera(world_pose(world), cam), cam));
    }
    return obs;
}

/// A geometrically consistent batch: detections are normalized projections of
/// per-sample ground-truth poses, input triangulations come from the pixel
/// detections, predictions start at the exact camera-frame root-centered
/// poses. Perturb predictions afterwards as needed.
struct BatchFixture {
    CameraRig rig;
    MultiViewBatch batch;
    LossOptions options;
    std::vector<Landmarks3D> gt_world;
};

inline BatchFixture make_consistent_batch(int n_samples, int n_cameras, Eigen::Index n_landmarks,
                                          std::mt19937_64& rng, double norm_scale = 500.0,
                                          Eigen::Index root_index = 0) {
    BatchFixture fix;
    fix.rig = random_rig(n_cameras, rng);
    fix.options.root_index = root_index;
    fix.options.norm_scale = norm_scale;
    for (const auto& cam : fix.rig.cameras) fix.batch.camera_ids.push_back(cam.id);

    fix.batch.samples.resize(n_samples);
    fix.gt_world.resize(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        auto& sample = fix.batch.samples[s];
        fix.gt_world[s] = random_landmarks(n_landmarks, rng);
        const auto observations = project_to_all(fix.gt_world[s], fix.rig);
        sample.input_triangulation = triangulate_dlt(observations, fix.rig).landmarks;
        const Vec3 root_world = sample.input_triangulation.row(root_index).transpose();

        for (size_t c = 0; c < fix.batch.camera_ids.size(); ++c) {
            const CameraView& cam = fix.rig.by_id(fix.batch.camera_ids[c]);
            const Pose2D& pixels = observations.at(cam.id);
            const Eigen::RowVector2d det_root = pixels.landmarks.row(root_index);
            sample.detections.push_back((pixels.landmarks.rowwise() - det_root) / norm_scale);

            Landmarks3D cam_frame = (fix.gt_world[s] * cam.rotation.transpose()).rowwise() +
                                    cam.translation.transpose();
            const Eigen::RowVector3d cam_root = cam_frame.row(root_index);
            cam_frame.rowwise() -= cam_root;
            sample.predictions.push_back(cam_frame);
            sample.anchors.push_back(cam.rotation * root_world + cam.translation);
        }
    }
    return fix;
}

inline void perturb_predictions(MultiViewBatch& batch, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto& sample : batch.samples) {
        for (auto& pred : sample.predictions) {
            for (Eigen::Index i = 0; i < pred.size(); ++i) pred.data()[i] += gauss(rng);
        }
    }
}

/// Central finite differences of `value()` w.r.t. every prediction
/// coordinate; compares against `grad` and returns the worst relative error
/// over entries where either side exceeds `tiny`.
template <class ValueFn>
double max_prediction_grad_error(MultiViewBatch& batch,
                                 const std::vector<std::vector<Landmarks3D>>& grad,
                                 ValueFn&& value, double step = 1e-5, double tiny = 1e-10) {
    double worst = 0.0;
    for (size_t s = 0; s < batch.samples.size(); ++s) {
        for (size_t c = 0; c < batch.samples[s].predictions.size(); ++c) {
            auto& pred = batch.samples[s].predictions[c];
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                double& x = pred.data()[i];
                const double orig = x;
                x = orig + step;
                const double fp = value();
                x = orig - step;
                const double fm = value();
                x = orig;
                const double numeric = (fp - fm) / (2.0 * step);
                const double analytic = grad[s][c].data()[i];
                if (std::abs(numeric) < tiny && std::abs(analytic) < tiny) continue;
                worst = std::max(worst, rel_err(analytic, numeric));
            }
        }
    }
    return worst;
}

}  // namespace mvlift::test
