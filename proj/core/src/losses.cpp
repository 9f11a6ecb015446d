#include "mvlift/losses.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <string>

namespace mvlift {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::vector<std::vector<Landmarks3D>> zero_prediction_grads(const MultiViewBatch& batch) {
    std::vector<std::vector<Landmarks3D>> grads(batch.samples.size());
    for (size_t s = 0; s < batch.samples.size(); ++s) {
        grads[s].resize(batch.camera_ids.size());
        for (size_t c = 0; c < batch.camera_ids.size(); ++c) {
            grads[s][c] = Landmarks3D::Zero(batch.samples[s].predictions[c].rows(), 3);
        }
    }
    return grads;
}

void require_triangulation(const MultiViewBatch& batch, Eigen::Index n_landmarks,
                           const char* loss) {
    for (const auto& sample : batch.samples) {
        if (sample.input_triangulation.rows() != n_landmarks) {
            throw ContractViolation(std::string(loss) +
                                    ": batch sample is missing its input triangulation");
        }
    }
}

void require_anchors(const MultiViewBatch& batch, const char* loss) {
    for (const auto& sample : batch.samples) {
        if (sample.anchors.size() != batch.camera_ids.size()) {
            throw ContractViolation(std::string(loss) + ": batch sample is missing root anchors");
        }
    }
}

// Camera-frame, root-centered view of a world-frame landmark set.
Landmarks3D camera_frame_centered(const Landmarks3D& world, const CameraView& cam,
                                  Eigen::Index root_index) {
    Landmarks3D cam_frame =
        (world * cam.rotation.transpose()).rowwise() + cam.translation.transpose();
    const Eigen::RowVector3d root = cam_frame.row(root_index);
    cam_frame.rowwise() -= root;
    return cam_frame;
}

// d(u, v)/dQ for the pinhole projection of camera-frame point Q.
void projection_jacobian(const Mat3& intrinsics, const Vec3& q, Eigen::Matrix<double, 2, 3>& jac) {
    const Vec3 p = intrinsics * q;
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    jac.row(0) = (intrinsics.row(0) - u * intrinsics.row(2)) / p.z();
    jac.row(1) = (intrinsics.row(1) - v * intrinsics.row(2)) / p.z();
}

}  // namespace

void LossWeights::validate() const {
    if (w_in < 0.0 || w_proj < 0.0 || w_con < 0.0 || w_out < 0.0) {
        throw ValidationError("loss weights must be nonnegative");
    }
    if (w_in == 0.0 && w_proj == 0.0 && w_con == 0.0 && w_out == 0.0) {
        throw ValidationError("at least one loss weight must be positive");
    }
}

Eigen::Index MultiViewBatch::n_landmarks() const {
    if (samples.empty() || samples.front().predictions.empty()) return 0;
    return samples.front().predictions.front().rows();
}

void MultiViewBatch::validate(const CameraRig& rig) const {
    if (camera_ids.empty()) throw ContractViolation("batch has no cameras");
    for (size_t i = 0; i < camera_ids.size(); ++i) {
        if (!rig.has_camera(camera_ids[i])) {
            throw ValidationError("batch references unknown camera id " +
                                  std::to_string(camera_ids[i]));
        }
        for (size_t j = i + 1; j < camera_ids.size(); ++j) {
            if (camera_ids[i] == camera_ids[j]) {
                throw ContractViolation("batch lists camera id " +
                                        std::to_string(camera_ids[i]) + " twice");
            }
        }
    }
    const Eigen::Index n = n_landmarks();
    for (const auto& sample : samples) {
        if (sample.detections.size() != camera_ids.size() ||
            sample.predictions.size() != camera_ids.size()) {
            throw ContractViolation("batch sample does not cover all cameras");
        }
        for (size_t c = 0; c < camera_ids.size(); ++c) {
            if (sample.detections[c].rows() != n || sample.predictions[c].rows() != n) {
                throw ContractViolation("batch landmark counts are inconsistent");
            }
        }
        if (!sample.anchors.empty() && sample.anchors.size() != camera_ids.size()) {
            throw ContractViolation("batch sample has a partial anchor set");
        }
    }
}

LossResult loss_input_triangulation(const MultiViewBatch& batch, const CameraRig& rig,
                                    const LossOptions& options) {
    batch.validate(rig);
    const Eigen::Index n = batch.n_landmarks();
    require_triangulation(batch, n, "loss_input_triangulation");

    LossResult res;
    res.grad = zero_prediction_grads(batch);
    const double norm = static_cast<double>(batch.n_samples()) *
                        static_cast<double>(batch.n_cameras()) * static_cast<double>(n);
    for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
        const auto& sample = batch.samples[s];
        for (Eigen::Index c = 0; c < batch.n_cameras(); ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            const Landmarks3D target =
                camera_frame_centered(sample.input_triangulation, cam, options.root_index);
            const Landmarks3D diff = sample.predictions[c] - target;
            res.value += diff.squaredNorm();
            res.grad[s][c] += (2.0 / norm) * diff;
        }
    }
    res.value /= norm;
    return res;
}

LossResult loss_reprojection(const MultiViewBatch& batch, const CameraRig& rig,
                             const LossOptions& options) {
    batch.validate(rig);
    require_anchors(batch, "loss_reprojection");
    const Eigen::Index n = batch.n_landmarks();
    const Eigen::Index n_cams = batch.n_cameras();
    const double norm = static_cast<double>(batch.n_samples()) * static_cast<double>(n_cams) *
                        static_cast<double>(n_cams) * 2.0 * static_cast<double>(n);

    LossResult res;
    res.grad = zero_prediction_grads(batch);
    Eigen::Matrix<double, 2, 3> jac;
    for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
        const auto& sample = batch.samples[s];
        for (Eigen::Index cp = 0; cp < n_cams; ++cp) {
            const CameraView& cam_src = rig.by_id(batch.camera_ids[cp]);
            const Landmarks3D& pred = sample.predictions[cp];
            for (Eigen::Index c = 0; c < n_cams; ++c) {
                const CameraView& cam_dst = rig.by_id(batch.camera_ids[c]);
                const Mat3 rel_rot = cam_dst.rotation * cam_src.rotation.transpose();
                // Rotate the root-relative prediction into the target frame and
                // place it at that frame's root anchor.
                const Landmarks3D q = (pred * rel_rot.transpose()).rowwise() +
                                      sample.anchors[static_cast<size_t>(c)].transpose();
                Landmarks2D projected(n, 2);
                for (Eigen::Index m = 0; m < n; ++m) {
                    projected.row(m) =
                        project_point(cam_dst.intrinsics, q.row(m).transpose(), m).transpose();
                }
                const Eigen::RowVector2d proj_root = projected.row(options.root_index);
                const Landmarks2D normalized =
                    (projected.rowwise() - proj_root) / options.norm_scale;
                const Landmarks2D diff = sample.detections[c] - normalized;
                res.value += diff.cwiseAbs().sum();

                // dL/dz, then undo the root-centered normalization.
                Landmarks2D gz(n, 2);
                for (Eigen::Index m = 0; m < n; ++m) {
                    gz(m, 0) = -sgn(diff(m, 0)) / norm;
                    gz(m, 1) = -sgn(diff(m, 1)) / norm;
                }
                const Eigen::RowVector2d gz_sum = gz.colwise().sum();
                for (Eigen::Index m = 0; m < n; ++m) {
                    Eigen::RowVector2d gpix = gz.row(m);
                    if (m == options.root_index) gpix -= gz_sum;
                    gpix /= options.norm_scale;
                    projection_jacobian(cam_dst.intrinsics, q.row(m).transpose(), jac);
                    const Vec3 gq = jac.transpose() * gpix.transpose();
                    res.grad[s][cp].row(m) += (rel_rot.transpose() * gq).transpose();
                }
            }
        }
    }
    res.value /= norm;
    return res;
}

LossResult loss_consistency_fixed(const MultiViewBatch& batch, const CameraRig& rig,
                                  const LossOptions& options,
                                  const std::vector<std::vector<Landmarks3D>>& targets) {
    batch.validate(rig);
    require_anchors(batch, "loss_consistency");
    if (targets.size() != batch.samples.size()) {
        throw ContractViolation("loss_consistency: target set size mismatch");
    }
    const Eigen::Index n_cams = batch.n_cameras();
    if (n_cams < 2) {
        throw InsufficientViewsError("loss_consistency needs >= 2 camera views");
    }
    const Eigen::Index n = batch.n_landmarks();
    const double norm = static_cast<double>(batch.n_samples()) * static_cast<double>(n_cams) *
                        static_cast<double>(n_cams - 1) * 3.0 * static_cast<double>(n);

    LossResult res;
    res.grad = zero_prediction_grads(batch);
    for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
        const auto& sample = batch.samples[s];
        for (Eigen::Index c = 0; c < n_cams; ++c) {
            const CameraView& cam_dst = rig.by_id(batch.camera_ids[c]);
            const Landmarks3D& target = targets[s][c];
            for (Eigen::Index cp = 0; cp < n_cams; ++cp) {
                if (cp == c) continue;
                const CameraView& cam_src = rig.by_id(batch.camera_ids[cp]);
                // Anchor in the source frame, move to the target frame,
                // re-center at the root.
                const Landmarks3D anchored = sample.predictions[cp].rowwise() +
                                             sample.anchors[static_cast<size_t>(cp)].transpose();
                const Mat3 rel_rot = cam_dst.rotation * cam_src.rotation.transpose();
                Landmarks3D moved =
                    ((anchored.rowwise() - cam_src.translation.transpose()) * cam_src.rotation) *
                    cam_dst.rotation.transpose();
                moved.rowwise() += cam_dst.translation.transpose();
                const Eigen::RowVector3d moved_root = moved.row(options.root_index);
                moved.rowwise() -= moved_root;

                const Landmarks3D diff = target - moved;
                res.value += diff.cwiseAbs().sum();

                Landmarks3D ge(n, 3);
                for (Eigen::Index m = 0; m < n; ++m) {
                    for (int k = 0; k < 3; ++k) ge(m, k) = -sgn(diff(m, k)) / norm;
                }
                const Eigen::RowVector3d ge_sum = ge.colwise().sum();
                for (Eigen::Index m = 0; m < n; ++m) {
                    Eigen::RowVector3d g = ge.row(m);
                    if (m == options.root_index) g -= ge_sum;
                    res.grad[s][cp].row(m) += g * rel_rot;  // (R~^T g^T)^T
                }
                if (options.symmetric_consistency) {
                    for (Eigen::Index m = 0; m < n; ++m) {
                        for (int k = 0; k < 3; ++k) {
                            res.grad[s][c](m, k) += sgn(diff(m, k)) / norm;
                        }
                    }
                }
            }
        }
    }
    res.value /= norm;
    return res;
}

LossResult loss_consistency(const MultiViewBatch& batch, const CameraRig& rig,
                            const LossOptions& options) {
    std::vector<std::vector<Landmarks3D>> targets(batch.samples.size());
    for (size_t s = 0; s < batch.samples.size(); ++s) {
        targets[s] = batch.samples[s].predictions;
    }
    return loss_consistency_fixed(batch, rig, options, targets);
}

std::vector<Landmarks3D> output_pseudo_labels(const MultiViewBatch& batch, const CameraRig& rig,
                                              [[maybe_unused]] const LossOptions& options) {
    batch.validate(rig);
    require_anchors(batch, "loss_output_triangulation");
    std::vector<Landmarks3D> labels(batch.samples.size());
    for (size_t s = 0; s < batch.samples.size(); ++s) {
        const auto& sample = batch.samples[s];
        std::map<int, Pose2D> observations;
        for (size_t c = 0; c < batch.camera_ids.size(); ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            const Landmarks3D anchored =
                sample.predictions[c].rowwise() + sample.anchors[c].transpose();
            Pose2D obs;
            obs.frame = Frame2D::Pixel;
            obs.landmarks.resize(anchored.rows(), 2);
            for (Eigen::Index m = 0; m < anchored.rows(); ++m) {
                obs.landmarks.row(m) =
                    project_point(cam.intrinsics, anchored.row(m).transpose(), m).transpose();
            }
            observations.emplace(batch.camera_ids[c], std::move(obs));
        }
        labels[s] = triangulate_dlt(observations, rig).landmarks;
    }
    return labels;
}

LossResult loss_output_triangulation_fixed(const MultiViewBatch& batch, const CameraRig& rig,
                                           const LossOptions& options,
                                           const std::vector<Landmarks3D>& pseudo_labels) {
    batch.validate(rig);
    const Eigen::Index n = batch.n_landmarks();
    if (pseudo_labels.size() != batch.samples.size()) {
        throw ContractViolation("loss_output_triangulation: pseudo-label count mismatch");
    }

    LossResult res;
    res.grad = zero_prediction_grads(batch);
    const double norm = static_cast<double>(batch.n_samples()) *
                        static_cast<double>(batch.n_cameras()) * static_cast<double>(n);
    for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
        const auto& sample = batch.samples[s];
        for (Eigen::Index c = 0; c < batch.n_cameras(); ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            const Landmarks3D target =
                camera_frame_centered(pseudo_labels[s], cam, options.root_index);
            const Landmarks3D diff = sample.predictions[c] - target;
            res.value += diff.squaredNorm();
            res.grad[s][c] += (2.0 / norm) * diff;
        }
    }
    res.value /= norm;
    return res;
}

namespace {

// Gradient of the output loss w.r.t. the pixel observations that fed each DLT
// solve, mapped back onto the predictions. Exact: the Hartley translation
// cancels out of the cross-product rows (row = s_c * (u P3 - P1)), so the
// conditioning enters only through the per-camera scale s_c, whose dependence
// on the pixels is differentiated explicitly.
void add_dlt_gradient(const MultiViewBatch& batch, const CameraRig& rig,
                      const LossOptions& options, const std::vector<Landmarks3D>& labels,
                      LossResult& res) {
    const Eigen::Index n = batch.n_landmarks();
    const Eigen::Index n_cams = batch.n_cameras();
    const double norm = static_cast<double>(batch.n_samples()) * static_cast<double>(n_cams) *
                        static_cast<double>(n);

    Eigen::Matrix<double, 2, 3> jac;
    for (Eigen::Index s = 0; s < batch.n_samples(); ++s) {
        const auto& sample = batch.samples[s];

        // dL/dlabel for this sample, through every per-view comparison.
        Landmarks3D g_label = Landmarks3D::Zero(n, 3);
        for (Eigen::Index c = 0; c < n_cams; ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            const Landmarks3D target = camera_frame_centered(labels[s], cam, options.root_index);
            const Landmarks3D g_target = (-2.0 / norm) * (sample.predictions[c] - target);
            const Eigen::RowVector3d g_sum = g_target.colwise().sum();
            for (Eigen::Index m = 0; m < n; ++m) {
                Eigen::RowVector3d g = g_target.row(m);
                if (m == options.root_index) g -= g_sum;
                g_label.row(m) += g * cam.rotation;  // R^T g^T transposed
            }
        }

        // Rebuild the projections and the conditioned DLT systems.
        std::vector<Landmarks3D> anchored(n_cams);
        std::vector<Landmarks2D> pixels(n_cams);
        std::vector<Mat3> conditioning(n_cams);
        std::vector<Mat34> projections(n_cams);
        for (Eigen::Index c = 0; c < n_cams; ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            anchored[c] = sample.predictions[c].rowwise() +
                          sample.anchors[static_cast<size_t>(c)].transpose();
            pixels[c].resize(n, 2);
            for (Eigen::Index m = 0; m < n; ++m) {
                pixels[c].row(m) =
                    project_point(cam.intrinsics, anchored[c].row(m).transpose(), m).transpose();
            }
            conditioning[c] = hartley_conditioning(pixels[c]);
            projections[c] = conditioning[c] * cam.projection;
        }

        std::vector<Landmarks2D> g_pixels(n_cams, Landmarks2D::Zero(n, 2));
        Eigen::VectorXd g_scale = Eigen::VectorXd::Zero(n_cams);

        for (Eigen::Index m = 0; m < n; ++m) {
            Eigen::MatrixXd design(2 * n_cams, 4);
            for (Eigen::Index c = 0; c < n_cams; ++c) {
                const Vec3 uv1 =
                    conditioning[c] * Vec3(pixels[c](m, 0), pixels[c](m, 1), 1.0);
                design.row(2 * c) = uv1.x() * projections[c].row(2) - projections[c].row(0);
                design.row(2 * c + 1) = uv1.y() * projections[c].row(2) - projections[c].row(1);
            }
            const Eigen::Matrix4d normal = design.transpose() * design;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal);
            const Eigen::Vector4d eigenvalues = eig.eigenvalues();
            const double gap = eigenvalues[1] - eigenvalues[0];
            if (gap <= 1e-12 * std::max(1.0, eigenvalues[3])) continue;  // direction ill-defined

            const Eigen::Vector4d v0 = eig.eigenvectors().col(0);
            const double w = v0[3];
            if (std::abs(w) < 1e-12) continue;
            const Vec3 x = v0.head<3>() / w;

            const Vec3 g_x = g_label.row(m).transpose();
            Eigen::Vector4d g_v;
            g_v.head<3>() = g_x / w;
            g_v[3] = -x.dot(g_x) / w;

            Eigen::Matrix4d g_normal = Eigen::Matrix4d::Zero();
            for (int k = 1; k < 4; ++k) {
                const Eigen::Vector4d vk = eig.eigenvectors().col(k);
                const double beta = g_v.dot(vk) / (eigenvalues[0] - eigenvalues[k]);
                g_normal += beta * vk * v0.transpose();
            }
            const Eigen::MatrixXd g_design = design * (g_normal + g_normal.transpose());

            for (Eigen::Index c = 0; c < n_cams; ++c) {
                const double scale = conditioning[c](0, 0);
                // Direct path: d row / d pixel = s_c * P_row3.
                g_pixels[c](m, 0) += scale * g_design.row(2 * c).dot(projections[c].row(2));
                g_pixels[c](m, 1) += scale * g_design.row(2 * c + 1).dot(projections[c].row(2));
                // Scale path: rows are linear in s_c, d row / d s_c = row / s_c.
                g_scale[c] += (g_design.row(2 * c).dot(design.row(2 * c)) +
                               g_design.row(2 * c + 1).dot(design.row(2 * c + 1))) /
                              scale;
            }
        }

        // s_c = sqrt(2) / mean distance to the centroid; push its gradient
        // onto every pixel of the camera.
        for (Eigen::Index c = 0; c < n_cams; ++c) {
            const Eigen::RowVector2d centroid = pixels[c].colwise().mean();
            const Landmarks2D centered = pixels[c].rowwise() - centroid;
            const Eigen::VectorXd dist = centered.rowwise().norm();
            const double mean_dist = dist.mean();
            if (mean_dist <= 1e-12) continue;  // scale pinned to 1, no dependence
            Landmarks2D unit(n, 2);
            for (Eigen::Index m = 0; m < n; ++m) {
                unit.row(m) = dist[m] > 1e-12 ? (centered.row(m) / dist[m]).eval()
                                              : Eigen::RowVector2d::Zero().eval();
            }
            const Eigen::RowVector2d unit_mean = unit.colwise().mean();
            const double ds_dmean = -std::sqrt(2.0) / (mean_dist * mean_dist);
            for (Eigen::Index m = 0; m < n; ++m) {
                const Eigen::RowVector2d dmean_dpix = (unit.row(m) - unit_mean) /
                                                      static_cast<double>(n);
                g_pixels[c].row(m) += g_scale[c] * ds_dmean * dmean_dpix;
            }
        }

        for (Eigen::Index c = 0; c < n_cams; ++c) {
            const CameraView& cam = rig.by_id(batch.camera_ids[c]);
            for (Eigen::Index m = 0; m < n; ++m) {
                projection_jacobian(cam.intrinsics, anchored[c].row(m).transpose(), jac);
                res.grad[s][c].row(m) +=
                    (jac.transpose() * g_pixels[c].row(m).transpose()).transpose();
            }
        }
    }
}

}  // namespace

LossResult loss_output_triangulation(const MultiViewBatch& batch, const CameraRig& rig,
                                     const LossOptions& options) {
    const std::vector<Landmarks3D> labels = output_pseudo_labels(batch, rig, options);
    LossResult res = loss_output_triangulation_fixed(batch, rig, options, labels);
    if (options.differentiate_through_dlt) {
        add_dlt_gradient(batch, rig, options, labels, res);
    }
    return res;
}

namespace {

void add_scaled(std::vector<std::vector<Landmarks3D>>& dst,
                const std::vector<std::vector<Landmarks3D>>& src, double weight) {
    for (size_t s = 0; s < dst.size(); ++s) {
        for (size_t c = 0; c < dst[s].size(); ++c) {
            dst[s][c] += weight * src[s][c];
        }
    }
}

}  // namespace

TotalLossResult total_objective(const MultiViewBatch& batch, const CameraRig& rig,
                                const LossWeights& weights, bool with_out,
                                const LossOptions& options, bool report_inactive_out) {
    weights.validate();
    batch.validate(rig);

    TotalLossResult res;
    res.grad = zero_prediction_grads(batch);
    if (weights.w_in > 0.0) {
        const LossResult r = loss_input_triangulation(batch, rig, options);
        res.l_in = r.value;
        res.value += weights.w_in * r.value;
        add_scaled(res.grad, r.grad, weights.w_in);
    }
    if (weights.w_proj > 0.0) {
        const LossResult r = loss_reprojection(batch, rig, options);
        res.l_proj = r.value;
        res.value += weights.w_proj * r.value;
        add_scaled(res.grad, r.grad, weights.w_proj);
    }
    if (weights.w_con > 0.0) {
        const LossResult r = loss_consistency(batch, rig, options);
        res.l_con = r.value;
        res.value += weights.w_con * r.value;
        add_scaled(res.grad, r.grad, weights.w_con);
    }
    if (weights.w_out > 0.0 && (with_out || report_inactive_out)) {
        const LossResult r = loss_output_triangulation(batch, rig, options);
        res.l_out = r.value;
        if (with_out) {
            res.value += weights.w_out * r.value;
            add_scaled(res.grad, r.grad, weights.w_out);
        }
    }
    return res;
}

}  // namespace mvlift
