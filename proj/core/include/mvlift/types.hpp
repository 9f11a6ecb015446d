#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>

namespace mvlift {

using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// N x 2 / N x 3 landmark blocks, one row per landmark.
using Landmarks2D = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Landmarks3D = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Base class of everything thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition (frame mismatch, shape mismatch, ...).
class ContractViolation : public Error {
  public:
    using Error::Error;
};

/// Input data failed validation (bad file, unknown camera id, bad config).
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// An operation that needs k camera views received fewer.
class InsufficientViewsError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Numerical failure (degenerate depth, point at infinity, non-finite loss).
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// The synthetic generator could not satisfy its constraints.
class GenerationError : public Error {
  public:
    using Error::Error;
};

enum class Frame2D { Pixel, Normalized };
enum class Frame3D { World, Camera };

struct Pose2D {
    Landmarks2D landmarks;                       // N x 2
    std::optional<Eigen::VectorXd> confidence;   // N, in [0,1]; carried, never used by geometry
    Frame2D frame = Frame2D::Pixel;

    Eigen::Index n_landmarks() const { return landmarks.rows(); }
};

struct Pose3D {
    Landmarks3D landmarks;   // N x 3
    Frame3D frame = Frame3D::World;
    int camera_id = -1;      // meaningful only when frame == Camera
    bool root_relative = false;

    Eigen::Index n_landmarks() const { return landmarks.rows(); }
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.allFinite();
}

}  // namespace mvlift
