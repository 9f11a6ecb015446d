#include "mvlift/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <string>

#include "mvlift/geometry.hpp"

namespace mvlift {

namespace {

void require_compatible(const Pose3D& pred, const Pose3D& gt, const char* op) {
    if (pred.n_landmarks() != gt.n_landmarks()) {
        throw ContractViolation(std::string(op) + ": landmark count mismatch (" +
                                std::to_string(pred.n_landmarks()) + " vs " +
                                std::to_string(gt.n_landmarks()) + ")");
    }
    if (pred.root_relative != gt.root_relative) {
        throw ContractViolation(std::string(op) +
                                ": poses mix root-relative and absolute conventions");
    }
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
    require_compatible(pred, gt, "mpjpe");
    return (pred.landmarks - gt.landmarks).rowwise().norm().mean();
}

AlignmentResult procrustes_align(const Pose3D& pred, const Pose3D& gt) {
    require_compatible(pred, gt, "procrustes_align");
    const Eigen::Index n = pred.n_landmarks();
    if (n < 3) throw ContractViolation("procrustes_align needs >= 3 landmarks");

    const Eigen::RowVector3d mu_pred = pred.landmarks.colwise().mean();
    const Eigen::RowVector3d mu_gt = gt.landmarks.colwise().mean();
    const Landmarks3D x = pred.landmarks.rowwise() - mu_pred;
    const Landmarks3D y = gt.landmarks.rowwise() - mu_gt;

    const double var_pred = x.squaredNorm() / static_cast<double>(n);
    const double var_gt = y.squaredNorm() / static_cast<double>(n);
    if (var_gt < 1e-18) {
        throw ContractViolation("procrustes_align: reference landmarks are all coincident");
    }
    if (var_pred < 1e-18) {
        throw NumericalError("procrustes_align: prediction landmarks are all coincident");
    }

    // Cross-covariance of gt vs pred; Umeyama closed form with the
    // determinant correction that rules out reflections.
    const Mat3 sigma = (y.transpose() * x) / static_cast<double>(n);
    Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d d = svd.singularValues();
    if (d[1] < 1e-12 * std::max(d[0], 1e-300)) {
        throw NumericalError("procrustes_align: degenerate (rank-deficient) configuration");
    }
    Vec3 signs = Vec3::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) signs[2] = -1.0;

    AlignmentResult result;
    result.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
    result.scale = d.dot(signs) / var_pred;
    result.translation =
        mu_gt.transpose() - result.scale * result.rotation * mu_pred.transpose();
    result.aligned_pose = pred;
    result.aligned_pose.landmarks =
        (result.scale * (pred.landmarks * result.rotation.transpose())).rowwise() +
        result.translation.transpose();
    return result;
}

double p_mpjpe(const Pose3D& pred, const Pose3D& gt) {
    return mpjpe(procrustes_align(pred, gt).aligned_pose, gt);
}

double pck3d(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
             double threshold) {
    if (preds.empty() || preds.size() != gts.size()) {
        throw ContractViolation("pck3d: empty input or pose count mismatch");
    }
    std::int64_t correct = 0;
    std::int64_t total = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        require_compatible(preds[i], gts[i], "pck3d");
        const Eigen::VectorXd dist = (preds[i].landmarks - gts[i].landmarks).rowwise().norm();
        correct += (dist.array() <= threshold).count();
        total += dist.size();
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

double auc3d(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
             double max_threshold, int n_steps) {
    if (n_steps < 2) throw ContractViolation("auc3d: need at least 2 threshold steps");
    double sum = 0.0;
    for (int i = 0; i < n_steps; ++i) {
        const double t = max_threshold * static_cast<double>(i) / (n_steps - 1);
        sum += pck3d(preds, gts, t);
    }
    return sum / n_steps;
}

void align_pose_pairs(std::vector<Pose3D>& preds, std::vector<Pose3D>& gts,
                      PckAlignment alignment, Eigen::Index root_index) {
    if (preds.size() != gts.size()) {
        throw ContractViolation("align_pose_pairs: pose count mismatch");
    }
    for (size_t i = 0; i < preds.size(); ++i) {
        if (alignment == PckAlignment::Procrustes) {
            preds[i] = procrustes_align(preds[i], gts[i]).aligned_pose;
        } else {
            preds[i].landmarks.rowwise() -= preds[i].landmarks.row(root_index).eval();
            gts[i].landmarks.rowwise() -= gts[i].landmarks.row(root_index).eval();
        }
    }
}

}  // namespace mvlift
