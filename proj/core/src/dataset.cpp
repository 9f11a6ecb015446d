#include "mvlift/dataset.hpp"

#include <string>

namespace mvlift {

void Skeleton::validate() const {
    if (names.empty()) throw ValidationError("skeleton has no landmarks");
    if (root_index < 0 || root_index >= static_cast<int>(names.size())) {
        throw ValidationError("skeleton root index out of range");
    }
}

void Norm2DParams::validate() const {
    if (!(scale > 0.0)) throw ValidationError("2D normalization scale must be > 0");
}

void Dataset::validate() const {
    rig.validate();
    skeleton.validate();
    normalization.validate();
    const Eigen::Index n = skeleton.n_landmarks();
    for (const auto& sample : samples) {
        for (const auto& cam : rig.cameras) {
            auto it = sample.detections.find(cam.id);
            if (it == sample.detections.end()) {
                throw ValidationError("sample " + std::to_string(sample.id) +
                                      " has no detection for camera " + std::to_string(cam.id));
            }
            if (it->second.n_landmarks() != n) {
                throw ValidationError("sample " + std::to_string(sample.id) + " camera " +
                                      std::to_string(cam.id) + ": expected " +
                                      std::to_string(n) + " landmarks, got " +
                                      std::to_string(it->second.n_landmarks()));
            }
            if (!all_finite(it->second.landmarks)) {
                throw ValidationError("sample " + std::to_string(sample.id) +
                                      ": non-finite detection coordinates");
            }
        }
        for (const auto& [cam_id, det] : sample.detections) {
            if (!rig.has_camera(cam_id)) {
                throw ValidationError("sample " + std::to_string(sample.id) +
                                      " references unknown camera id " + std::to_string(cam_id));
            }
        }
        if (sample.gt_pose && sample.gt_pose->n_landmarks() != n) {
            throw ValidationError("sample " + std::to_string(sample.id) +
                                  ": ground-truth landmark count mismatch");
        }
    }
}

void Dataset::ensure_triangulations() {
    for (auto& sample : samples) {
        if (!sample.input_triangulation) {
            sample.input_triangulation = triangulate_dlt(sample.detections, rig);
        }
    }
}

void Dataset::verify_triangulation_cache(double tolerance) const {
    for (const auto& sample : samples) {
        if (!sample.input_triangulation) continue;
        const Pose3D fresh = triangulate_dlt(sample.detections, rig);
        const double err = (fresh.landmarks - sample.input_triangulation->landmarks)
                               .cwiseAbs()
                               .maxCoeff();
        if (err > tolerance) {
            throw ValidationError("sample " + std::to_string(sample.id) +
                                  ": cached triangulation deviates from the detections by " +
                                  std::to_string(err));
        }
    }
}

Pose2D normalize_2d(const Pose2D& pose, const Norm2DParams& params, Eigen::Index root_index) {
    params.validate();
    if (root_index < 0 || root_index >= pose.n_landmarks()) {
        throw ContractViolation("normalize_2d: root index out of range");
    }
    Pose2D out = pose;
    const Eigen::RowVector2d root = pose.landmarks.row(root_index);
    out.landmarks = (pose.landmarks.rowwise() - root) / params.scale;
    out.frame = Frame2D::Normalized;
    return out;
}

Pose2D denormalize_2d(const Pose2D& pose, const Norm2DParams& params, const Vec2& root) {
    params.validate();
    Pose2D out = pose;
    out.landmarks = (pose.landmarks * params.scale).rowwise() + root.transpose();
    out.frame = Frame2D::Pixel;
    return out;
}

}  // namespace mvlift
