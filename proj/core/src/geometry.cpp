#include "mvlift/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace mvlift {

namespace {

std::string frame_name(Frame3D frame) {
    return frame == Frame3D::World ? "world" : "camera";
}

void require_world_absolute(const Pose3D& pose, const char* op) {
    if (pose.frame != Frame3D::World) {
        throw ContractViolation(std::string(op) + ": expected a world-frame pose, got " +
                                frame_name(pose.frame));
    }
    if (pose.root_relative) {
        throw ContractViolation(std::string(op) + ": pose must not be root-relative");
    }
}

void require_camera_absolute(const Pose3D& pose, int camera_id, const char* op) {
    if (pose.frame != Frame3D::Camera || pose.camera_id != camera_id) {
        throw ContractViolation(std::string(op) + ": expected a pose in camera " +
                                std::to_string(camera_id) + " coordinates");
    }
    if (pose.root_relative) {
        throw ContractViolation(std::string(op) + ": pose must not be root-relative");
    }
}

// Flips the sign so the first component with magnitude > 1e-12 is positive.
void normalize_sign(Eigen::Vector4d& v) {
    for (Eigen::Index i = 0; i < 4; ++i) {
        if (std::abs(v[i]) > 1e-12) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

}  // namespace

CameraView CameraView::make(int id, const Mat3& intrinsics, const Mat3& rotation,
                            const Vec3& translation) {
    if (!intrinsics.allFinite() || !rotation.allFinite() || !translation.allFinite()) {
        throw ValidationError("camera " + std::to_string(id) + ": non-finite calibration");
    }
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    if (ortho >= 1e-9) {
        throw ValidationError("camera " + std::to_string(id) +
                              ": rotation is not orthonormal (|R^T R - I| = " +
                              std::to_string(ortho) + ")");
    }
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw ValidationError("camera " + std::to_string(id) + ": det(R) != 1");
    }
    if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0) {
        throw ValidationError("camera " + std::to_string(id) + ": K is not upper triangular");
    }
    if (intrinsics(0, 0) <= 0.0 || intrinsics(1, 1) <= 0.0 || intrinsics(2, 2) <= 0.0) {
        throw ValidationError("camera " + std::to_string(id) +
                              ": K diagonal must be strictly positive");
    }

    CameraView cam;
    cam.id = id;
    cam.intrinsics = intrinsics;
    cam.rotation = rotation;
    cam.translation = translation;
    cam.projection.leftCols<3>() = intrinsics * rotation;
    cam.projection.col(3) = intrinsics * translation;
    return cam;
}

const CameraView& CameraRig::by_id(int id) const {
    for (const auto& cam : cameras) {
        if (cam.id == id) return cam;
    }
    throw ValidationError("unknown camera id " + std::to_string(id));
}

bool CameraRig::has_camera(int id) const {
    return std::any_of(cameras.begin(), cameras.end(),
                       [id](const CameraView& c) { return c.id == id; });
}

void CameraRig::validate() const {
    if (cameras.size() < 2) {
        throw ValidationError("rig needs at least 2 cameras, has " +
                              std::to_string(cameras.size()));
    }
    for (size_t i = 0; i < cameras.size(); ++i) {
        for (size_t j = i + 1; j < cameras.size(); ++j) {
            if (cameras[i].id == cameras[j].id) {
                throw ValidationError("duplicate camera id " + std::to_string(cameras[i].id));
            }
            if ((cameras[i].projection - cameras[j].projection).cwiseAbs().maxCoeff() == 0.0) {
                throw ValidationError("cameras " + std::to_string(cameras[i].id) + " and " +
                                      std::to_string(cameras[j].id) +
                                      " share an identical projection matrix");
            }
        }
    }
}

Pose3D world_to_camera(const Pose3D& pose, const CameraView& cam) {
    require_world_absolute(pose, "world_to_camera");
    Pose3D out;
    out.landmarks = (pose.landmarks * cam.rotation.transpose()).rowwise() +
                    cam.translation.transpose();
    out.frame = Frame3D::Camera;
    out.camera_id = cam.id;
    out.root_relative = false;
    return out;
}

Pose3D camera_to_world(const Pose3D& pose, const CameraView& cam) {
    require_camera_absolute(pose, cam.id, "camera_to_world");
    Pose3D out;
    out.landmarks = (pose.landmarks.rowwise() - cam.translation.transpose()) * cam.rotation;
    out.frame = Frame3D::World;
    out.camera_id = -1;
    out.root_relative = false;
    return out;
}

Pose3D camera_to_camera(const Pose3D& pose, const CameraView& from, const CameraView& to) {
    return world_to_camera(camera_to_world(pose, from), to);
}

Vec2 project_point(const Mat3& intrinsics, const Vec3& point_cam, Eigen::Index landmark_index) {
    if (point_cam.z() <= kDepthEpsilon) {
        throw NumericalError("degenerate depth at landmark " + std::to_string(landmark_index) +
                             ": Z = " + std::to_string(point_cam.z()));
    }
    const Vec3 h = intrinsics * point_cam;
    return Vec2(h.x() / h.z(), h.y() / h.z());
}

Pose2D project(const Pose3D& pose, const CameraView& cam) {
    require_camera_absolute(pose, cam.id, "project");
    Pose2D out;
    out.frame = Frame2D::Pixel;
    out.landmarks.resize(pose.landmarks.rows(), 2);
    for (Eigen::Index n = 0; n < pose.landmarks.rows(); ++n) {
        out.landmarks.row(n) =
            project_point(cam.intrinsics, pose.landmarks.row(n).transpose(), n).transpose();
    }
    return out;
}

Mat3 hartley_conditioning(const Landmarks2D& landmarks) {
    const Vec2 centroid = landmarks.colwise().mean().transpose();
    const double mean_dist =
        (landmarks.rowwise() - centroid.transpose()).rowwise().norm().mean();
    const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Mat3 t = Mat3::Identity();
    t(0, 0) = scale;
    t(1, 1) = scale;
    t(0, 2) = -scale * centroid.x();
    t(1, 2) = -scale * centroid.y();
    return t;
}

Vec3 triangulate_point_dlt(const std::vector<Mat34>& conditioned_projections,
                           const std::vector<Eigen::Matrix3d>& conditioning,
                           const std::vector<Vec2>& pixels, Eigen::Index landmark_index) {
    const size_t n_views = conditioned_projections.size();
    if (n_views < 2) {
        throw InsufficientViewsError("triangulation needs >= 2 views, got " +
                                     std::to_string(n_views));
    }
    Eigen::MatrixXd design(2 * n_views, 4);
    for (size_t c = 0; c < n_views; ++c) {
        const Mat34& p = conditioned_projections[c];
        const Vec3 uv1 = conditioning[c] * Vec3(pixels[c].x(), pixels[c].y(), 1.0);
        design.row(2 * c) = uv1.x() * p.row(2) - p.row(0);
        design.row(2 * c + 1) = uv1.y() * p.row(2) - p.row(1);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
    Eigen::Vector4d h = svd.matrixV().col(3);
    normalize_sign(h);
    if (std::abs(h[3]) < 1e-12) {
        throw NumericalError("triangulated landmark " + std::to_string(landmark_index) +
                             " is at infinity");
    }
    return h.head<3>() / h[3];
}

Pose3D triangulate_dlt(const std::map<int, Pose2D>& observations, const CameraRig& rig) {
    if (observations.size() < 2) {
        throw InsufficientViewsError("triangulate_dlt needs observations from >= 2 cameras, got " +
                                     std::to_string(observations.size()));
    }
    Eigen::Index n_landmarks = -1;
    std::vector<const CameraView*> cams;
    std::vector<const Pose2D*> poses;
    cams.reserve(observations.size());
    poses.reserve(observations.size());
    for (const auto& [cam_id, obs] : observations) {
        if (obs.frame != Frame2D::Pixel) {
            throw ContractViolation("triangulate_dlt expects pixel-frame observations");
        }
        if (n_landmarks < 0) {
            n_landmarks = obs.n_landmarks();
        } else if (obs.n_landmarks() != n_landmarks) {
            throw ContractViolation("triangulate_dlt: landmark counts differ across cameras");
        }
        cams.push_back(&rig.by_id(cam_id));
        poses.push_back(&obs);
    }

    std::vector<Mat34> projections(cams.size());
    std::vector<Eigen::Matrix3d> transforms(cams.size());
    for (size_t c = 0; c < cams.size(); ++c) {
        transforms[c] = hartley_conditioning(poses[c]->landmarks);
        projections[c] = transforms[c] * cams[c]->projection;
    }

    Pose3D out;
    out.frame = Frame3D::World;
    out.root_relative = false;
    out.landmarks.resize(n_landmarks, 3);
    std::vector<Vec2> pixels(cams.size());
    for (Eigen::Index n = 0; n < n_landmarks; ++n) {
        for (size_t c = 0; c < cams.size(); ++c) {
            pixels[c] = poses[c]->landmarks.row(n).transpose();
        }
        out.landmarks.row(n) =
            triangulate_point_dlt(projections, transforms, pixels, n).transpose();
    }
    return out;
}

std::pair<Pose3D, Vec3> root_center(const Pose3D& pose, Eigen::Index root_index) {
    if (pose.root_relative) {
        throw ContractViolation("root_center: pose is already root-relative");
    }
    if (root_index < 0 || root_index >= pose.landmarks.rows()) {
        throw ContractViolation("root_center: root index " + std::to_string(root_index) +
                                " out of range");
    }
    const Vec3 root = pose.landmarks.row(root_index).transpose();
    Pose3D out = pose;
    out.landmarks.rowwise() -= root.transpose();
    out.root_relative = true;
    return {out, root};
}

}  // namespace mvlift
