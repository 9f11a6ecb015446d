#include "mvlift/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

#include "mvlift/metrics.hpp"

namespace mvlift {

namespace {

// Per-epoch shuffle generator; independent of history so checkpoint resume
// replays the identical batch order.
std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
    const std::uint64_t mixed =
        seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(epoch) + 1ull));
    return std::mt19937_64(mixed);
}

struct PreparedData {
    std::vector<int> camera_ids;
    // inputs[c] is S x 2N of normalized detections, row per sample.
    std::vector<Eigen::MatrixXd> inputs;
    // detections[s][c], N x 2 normalized.
    std::vector<std::vector<Landmarks2D>> detections;
    std::vector<Landmarks3D> input_triangulations;  // per sample, world frame
    std::vector<std::vector<Vec3>> anchors;          // [sample][camera]
};

PreparedData prepare(const Dataset& dataset) {
    PreparedData data;
    const Eigen::Index n = dataset.n_landmarks();
    const Eigen::Index n_samples = dataset.n_samples();
    const Eigen::Index root = dataset.skeleton.root_index;

    for (const auto& cam : dataset.rig.cameras) data.camera_ids.push_back(cam.id);
    data.inputs.assign(data.camera_ids.size(), Eigen::MatrixXd(n_samples, 2 * n));
    data.detections.resize(n_samples);
    data.input_triangulations.resize(n_samples);
    data.anchors.resize(n_samples);

    for (Eigen::Index s = 0; s < n_samples; ++s) {
        const RigSample& sample = dataset.samples[s];
        data.input_triangulations[s] =
            sample.input_triangulation
                ? sample.input_triangulation->landmarks
                : triangulate_dlt(sample.detections, dataset.rig).landmarks;
        const Vec3 root_world = data.input_triangulations[s].row(root).transpose();

        data.detections[s].resize(data.camera_ids.size());
        data.anchors[s].resize(data.camera_ids.size());
        for (size_t c = 0; c < data.camera_ids.size(); ++c) {
            const CameraView& cam = dataset.rig.by_id(data.camera_ids[c]);
            const Pose2D normalized = normalize_2d(sample.detections.at(cam.id),
                                                   dataset.normalization, root);
            data.detections[s][c] = normalized.landmarks;
            data.inputs[c].row(s) = landmarks_to_input_row(normalized.landmarks);
            data.anchors[s][c] = cam.rotation * root_world + cam.translation;
        }
    }
    return data;
}

MultiViewBatch slice_batch(const PreparedData& data, const std::vector<Eigen::Index>& indices) {
    MultiViewBatch batch;
    batch.camera_ids = data.camera_ids;
    batch.samples.resize(indices.size());
    for (size_t b = 0; b < indices.size(); ++b) {
        const Eigen::Index s = indices[b];
        auto& sample = batch.samples[b];
        sample.detections = data.detections[s];
        sample.input_triangulation = data.input_triangulations[s];
        sample.anchors = data.anchors[s];
        sample.predictions.resize(data.camera_ids.size());
    }
    return batch;
}

}  // namespace

TrainConfig TrainConfig::paper_preset() {
    TrainConfig config;
    config.batch_size = 8192;
    config.learning_rate = 1e-3;
    config.epochs = 500;
    config.width = 1024;
    config.n_blocks = 4;
    return config;
}

TrainConfig TrainConfig::desk_preset() {
    TrainConfig config;
    config.batch_size = 256;
    config.learning_rate = 3e-3;
    config.epochs = 200;
    config.width = 128;
    config.n_blocks = 4;
    return config;
}

void TrainConfig::validate() const {
    if (batch_size < 2) {
        throw ValidationError("train: batch_size must be >= 2 (batch-norm constraint)");
    }
    if (epochs < 0) throw ValidationError("train: epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be > 0");
    if (out_loss_fraction < 0.0 || out_loss_fraction > 1.0) {
        throw ValidationError("train: out_loss_fraction must be in [0, 1]");
    }
    if (eval_every < 1) throw ValidationError("train: eval_every must be >= 1");
    weights.validate();
}

int TrainConfig::out_loss_start_epoch() const {
    const int active =
        static_cast<int>(std::floor(out_loss_fraction * static_cast<double>(epochs) + 1e-9));
    return epochs - active;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const Dataset* eval_dataset,
                  const Checkpoint* resume) {
    config.validate();
    dataset.validate();
    if (dataset.samples.empty()) throw ValidationError("train: dataset is empty");
    if (dataset.rig.n_cameras() < 2) {
        throw InsufficientViewsError("train: need >= 2 cameras");
    }

    ModelConfig model_config;
    model_config.n_landmarks = static_cast<int>(dataset.n_landmarks());
    model_config.width = config.width;
    model_config.n_blocks = config.n_blocks;
    model_config.root_index = dataset.skeleton.root_index;
    model_config.output_scale = config.output_scale;

    TrainResult result{resume ? resume->params : init_params(model_config, config.seed),
                       OptimizerState{},
                       {}};
    ModelParams& params = result.params;
    if (resume) {
        if (params.config.n_landmarks != model_config.n_landmarks ||
            params.config.width != model_config.width ||
            params.config.n_blocks != model_config.n_blocks) {
            throw ValidationError("train: resume checkpoint topology does not match the config");
        }
    }
    params.mode = Mode::Train;
    result.optimizer = resume && resume->optimizer ? *resume->optimizer
                                                   : OptimizerState::zeros_like(params);
    const int start_epoch = resume ? static_cast<int>(resume->next_epoch) : 0;

    const PreparedData data = prepare(dataset);
    const Eigen::Index n_samples = dataset.n_samples();
    const Eigen::Index n_cams = dataset.rig.n_cameras();
    const int n_batches = static_cast<int>(n_samples / config.batch_size);
    if (config.epochs > start_epoch && n_batches == 0) {
        throw ValidationError("train: batch_size " + std::to_string(config.batch_size) +
                              " exceeds the dataset size " + std::to_string(n_samples));
    }

    LossOptions loss_options;
    loss_options.root_index = dataset.skeleton.root_index;
    loss_options.norm_scale = dataset.normalization.scale;
    loss_options.differentiate_through_dlt = config.differentiate_through_dlt;
    loss_options.symmetric_consistency = config.symmetric_consistency;

    const AdamParams adam{config.learning_rate, config.adam_beta1, config.adam_beta2,
                          config.adam_epsilon};
    const int out_start = config.out_loss_start_epoch();

    const Dataset* metric_dataset = eval_dataset ? eval_dataset : &dataset;
    const bool metric_has_gt =
        std::any_of(metric_dataset->samples.begin(), metric_dataset->samples.end(),
                    [](const RigSample& s) { return s.gt_pose.has_value(); });

    std::vector<Eigen::Index> order(n_samples);

    std::vector<ForwardCache> caches(n_cams);
    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        // Re-derive the order from scratch so a resumed run replays the same
        // shuffles without the preceding epochs' generator history.
        std::iota(order.begin(), order.end(), 0);
        auto rng = epoch_rng(config.seed, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        const bool with_out = epoch >= out_start && config.weights.w_out > 0.0;

        EpochRecord record;
        record.epoch = epoch;
        for (int b = 0; b < n_batches; ++b) {
            const std::vector<Eigen::Index> indices(
                order.begin() + static_cast<std::ptrdiff_t>(b) * config.batch_size,
                order.begin() + static_cast<std::ptrdiff_t>(b + 1) * config.batch_size);
            MultiViewBatch batch = slice_batch(data, indices);

            for (Eigen::Index c = 0; c < n_cams; ++c) {
                Eigen::MatrixXd input(indices.size(), data.inputs[c].cols());
                for (size_t i = 0; i < indices.size(); ++i) {
                    input.row(static_cast<Eigen::Index>(i)) = data.inputs[c].row(indices[i]);
                }
                const Eigen::MatrixXd pred = forward(params, input, &caches[c]);
                for (size_t i = 0; i < indices.size(); ++i) {
                    batch.samples[i].predictions[c] =
                        output_row_to_landmarks(pred.row(static_cast<Eigen::Index>(i)));
                }
            }

            const TotalLossResult loss = total_objective(batch, dataset.rig, config.weights,
                                                         with_out, loss_options,
                                                         /*report_inactive_out=*/true);
            if (!std::isfinite(loss.value)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(b));
            }

            GradientSet grads = GradientSet::zeros_like(params);
            for (Eigen::Index c = 0; c < n_cams; ++c) {
                Eigen::MatrixXd upstream(indices.size(), 3 * dataset.n_landmarks());
                for (size_t i = 0; i < indices.size(); ++i) {
                    upstream.row(static_cast<Eigen::Index>(i)) =
                        landmarks_to_output_row(loss.grad[i][c]);
                }
                grads.add(backward(params, caches[c], upstream));
            }
            adam_step(params, grads, result.optimizer, adam);

            record.l_in += loss.l_in;
            record.l_proj += loss.l_proj;
            record.l_con += loss.l_con;
            record.l_out += loss.l_out;
            record.total += loss.value;
        }
        record.l_in /= n_batches;
        record.l_proj /= n_batches;
        record.l_con /= n_batches;
        record.l_out /= n_batches;
        record.total /= n_batches;

        const bool eval_epoch =
            ((epoch + 1) % config.eval_every == 0) || epoch + 1 == config.epochs;
        if (eval_epoch && metric_has_gt) {
            record.p_mpjpe = evaluate_p_mpjpe(params, *metric_dataset);
        }
        result.history.push_back(record);

        if (!config.checkpoint_dir.empty() && eval_epoch) {
            Checkpoint checkpoint;
            checkpoint.params = params;
            checkpoint.norm_scale = dataset.normalization.scale;
            checkpoint.next_epoch = epoch + 1;
            checkpoint.optimizer = result.optimizer;
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch_%05d.ckpt", epoch);
            save_checkpoint(checkpoint, std::filesystem::path(config.checkpoint_dir) / name);
        }
    }

    if (!config.checkpoint_dir.empty()) {
        Checkpoint last;
        last.params = params;
        last.params.mode = Mode::Eval;
        last.norm_scale = dataset.normalization.scale;
        last.next_epoch = config.epochs;
        last.optimizer = result.optimizer;
        save_checkpoint(last, std::filesystem::path(config.checkpoint_dir) / "checkpoint_final.ckpt");
    }
    return result;
}

Pose3D infer(const ModelParams& params, const Pose2D& detection, const Norm2DParams& norm,
             Eigen::Index root_index) {
    if (params.mode != Mode::Eval) {
        throw ContractViolation("infer: params must be in eval mode");
    }
    if (detection.n_landmarks() != params.config.n_landmarks) {
        throw ContractViolation("infer: expected " + std::to_string(params.config.n_landmarks) +
                                " landmarks, got " + std::to_string(detection.n_landmarks()));
    }
    const Pose2D normalized = detection.frame == Frame2D::Normalized
                                  ? detection
                                  : normalize_2d(detection, norm, root_index);
    Eigen::MatrixXd input(1, params.config.input_dim());
    input.row(0) = landmarks_to_input_row(normalized.landmarks);
    const Eigen::MatrixXd out = forward_eval(params, input);

    Pose3D pose;
    pose.landmarks = output_row_to_landmarks(out.row(0));
    pose.frame = Frame3D::Camera;
    pose.root_relative = true;
    return pose;
}

double evaluate_p_mpjpe(const ModelParams& params, const Dataset& dataset) {
    dataset.validate();
    const Eigen::Index root = dataset.skeleton.root_index;
    double sum = 0.0;
    std::int64_t count = 0;

    for (const auto& cam : dataset.rig.cameras) {
        std::vector<const RigSample*> with_gt;
        for (const auto& sample : dataset.samples) {
            if (sample.gt_pose) with_gt.push_back(&sample);
        }
        if (with_gt.empty()) break;

        Eigen::MatrixXd input(static_cast<Eigen::Index>(with_gt.size()),
                              params.config.input_dim());
        for (size_t i = 0; i < with_gt.size(); ++i) {
            const Pose2D normalized =
                normalize_2d(with_gt[i]->detections.at(cam.id), dataset.normalization, root);
            input.row(static_cast<Eigen::Index>(i)) =
                landmarks_to_input_row(normalized.landmarks);
        }
        const Eigen::MatrixXd pred = forward_eval(params, input);

        for (size_t i = 0; i < with_gt.size(); ++i) {
            Pose3D pred_pose;
            pred_pose.landmarks = output_row_to_landmarks(pred.row(static_cast<Eigen::Index>(i)));
            pred_pose.frame = Frame3D::Camera;
            pred_pose.camera_id = cam.id;
            pred_pose.root_relative = true;
            const Pose3D gt_cam = world_to_camera(*with_gt[i]->gt_pose, cam);
            const Pose3D gt_centered = root_center(gt_cam, root).first;
            sum += p_mpjpe(pred_pose, gt_centered);
            ++count;
        }
    }
    if (count == 0) {
        throw ValidationError("evaluate_p_mpjpe: dataset has no ground-truth poses");
    }
    return sum / static_cast<double>(count);
}

}  // namespace mvlift
