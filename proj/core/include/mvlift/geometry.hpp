#pragma once

#include <map>
#include <utility>
#include <vector>

#include "mvlift/types.hpp"

namespace mvlift {

/// Points with camera-frame depth at or below this are treated as degenerate
/// for projection.
inline constexpr double kDepthEpsilon = 1e-6;

/// One calibrated pinhole camera. R maps world to camera coordinates,
/// t is the world origin expressed in the camera frame: X_cam = R * X_world + t.
struct CameraView {
    int id = 0;
    Mat3 intrinsics = Mat3::Identity();    // K, upper triangular, positive diagonal
    Mat3 rotation = Mat3::Identity();      // R, world -> camera
    Vec3 translation = Vec3::Zero();       // t
    Mat34 projection = Mat34::Zero();      // P = K * [R | t], kept in sync by make()

    /// Builds a view and validates the calibration invariants.
    static CameraView make(int id, const Mat3& intrinsics, const Mat3& rotation,
                           const Vec3& translation);

    /// Camera center in world coordinates, -R^T t.
    Vec3 center() const { return -rotation.transpose() * translation; }
};

struct CameraRig {
    std::vector<CameraView> cameras;
    std::string units = "mm";

    Eigen::Index n_cameras() const { return static_cast<Eigen::Index>(cameras.size()); }
    const CameraView& by_id(int id) const;
    bool has_camera(int id) const;

    /// Checks C >= 2, unique ids and pairwise distinct projection matrices.
    void validate() const;
};

/// World -> camera(c). Requires a world-frame, non-root-relative pose.
Pose3D world_to_camera(const Pose3D& pose, const CameraView& cam);

/// camera(c) -> world. Inverse of world_to_camera.
Pose3D camera_to_world(const Pose3D& pose, const CameraView& cam);

/// camera(c') -> camera(c), equal to world_to_camera(camera_to_world(pose)).
Pose3D camera_to_camera(const Pose3D& pose, const CameraView& from, const CameraView& to);

/// Pinhole projection of a camera-frame pose. Landmarks with depth
/// Z <= kDepthEpsilon raise NumericalError naming the landmark.
Pose2D project(const Pose3D& pose, const CameraView& cam);

/// Single-point helpers used by the loss kernels.
Vec2 project_point(const Mat3& intrinsics, const Vec3& point_cam, Eigen::Index landmark_index);

/// DLT triangulation of one landmark set observed in >= 2 cameras.
/// Observations are pixel-frame Pose2D keyed by camera id; the result is a
/// world-frame pose. 2D inputs are Hartley-conditioned per camera before the
/// SVD solve. Deterministic and independent of the map's insertion order.
Pose3D triangulate_dlt(const std::map<int, Pose2D>& observations, const CameraRig& rig);

/// Triangulates a single point from (projection matrix, pixel) pairs.
/// `conditioning` carries the per-view Hartley transforms already applied to
/// the projection matrices; pixels are raw and conditioned internally.
Vec3 triangulate_point_dlt(const std::vector<Mat34>& conditioned_projections,
                           const std::vector<Eigen::Matrix3d>& conditioning,
                           const std::vector<Vec2>& pixels, Eigen::Index landmark_index);

/// Hartley conditioning transform for a 2D landmark set: translate the
/// centroid to the origin and scale the mean distance to sqrt(2).
Mat3 hartley_conditioning(const Landmarks2D& landmarks);

/// Subtracts the root landmark from every landmark. Returns the root-relative
/// pose and the removed root position.
std::pair<Pose3D, Vec3> root_center(const Pose3D& pose, Eigen::Index root_index);

}  // namespace mvlift
