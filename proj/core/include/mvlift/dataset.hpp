#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvlift/geometry.hpp"
#include "mvlift/types.hpp"

namespace mvlift {

struct Skeleton {
    std::vector<std::string> names;
    int root_index = 0;

    Eigen::Index n_landmarks() const { return static_cast<Eigen::Index>(names.size()); }
    void validate() const;
};

/// 2D normalization: subtract the root landmark, divide by a fixed scale.
struct Norm2DParams {
    double scale = 1.0;

    void validate() const;
};

struct RigSample {
    std::int64_t id = 0;
    std::map<int, Pose2D> detections;             // pixel frame, keyed by camera id
    std::optional<Pose3D> gt_pose;                // world frame
    std::optional<Pose3D> input_triangulation;    // cached DLT of the detections
};

struct Dataset {
    CameraRig rig;
    Skeleton skeleton;
    Norm2DParams normalization;
    std::vector<RigSample> samples;

    Eigen::Index n_samples() const { return static_cast<Eigen::Index>(samples.size()); }
    Eigen::Index n_landmarks() const { return skeleton.n_landmarks(); }

    /// Checks every sample covers all rig cameras with the skeleton's landmark count.
    void validate() const;
    /// Fills missing input triangulations.
    void ensure_triangulations();
    /// Recomputes each cached triangulation and checks it against the stored
    /// one; a mismatch beyond `tolerance` means the dataset was corrupted.
    void verify_triangulation_cache(double tolerance = 1e-9) const;
};

Pose2D normalize_2d(const Pose2D& pose, const Norm2DParams& params, Eigen::Index root_index);
Pose2D denormalize_2d(const Pose2D& pose, const Norm2DParams& params, const Vec2& root);

/// The built-in 16-landmark humanoid used by the synthetic generator.
struct SynthSkeleton {
    std::vector<std::string> names;
    std::vector<int> parents;            // -1 for the root
    std::vector<double> bone_lengths;    // world units, bone_lengths[i] is joint i to its parent
    std::vector<Vec3> rest_directions;   // unit vectors, joint i relative to its parent
    std::vector<double> angle_scales;    // per-joint multiplier on the pose variation angle

    Eigen::Index n_landmarks() const { return static_cast<Eigen::Index>(names.size()); }
};

SynthSkeleton humanoid16();

/// Skeleton edge list (child, parent) for rendering.
std::vector<std::pair<int, int>> skeleton_edges(const SynthSkeleton& skeleton);

struct SynthConfig {
    int n_samples = 1000;
    int n_cameras = 4;
    std::vector<double> bone_lengths;     // empty: humanoid16 defaults
    double joint_angle_range = 0.5;       // radians
    double ring_radius = 4200.0;          // world units (mm)
    double ring_height = 1600.0;
    double height_jitter = 200.0;
    double root_jitter = 200.0;           // pelvis placement box half-width
    double focal_px = 900.0;
    double image_width = 1000.0;
    double image_height = 1000.0;
    double pixel_noise_sigma = 0.0;
    double outlier_rate = 0.0;
    double outlier_magnitude = 50.0;      // pixels
    double norm_scale = 1000.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic synthetic multi-camera dataset with exact ground truth.
/// Cameras sit on a ring around the origin facing it; skeletons are sampled
/// from a kinematic tree with fixed bone lengths; detections are exact
/// projections plus optional Gaussian noise and sparse outliers. Every
/// landmark of every accepted sample projects inside every image.
Dataset synth_generate(const SynthConfig& config);

}  // namespace mvlift
