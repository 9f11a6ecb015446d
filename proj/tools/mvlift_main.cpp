#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvlift/io.hpp"
#include "mvlift/metrics.hpp"
#include "mvlift/render.hpp"
#include "mvlift/train.hpp"

namespace fs = std::filesystem;
using namespace mvlift;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

fs::path default_out_dir() {
    if (const char* env = std::getenv("MVLIFT_OUT_DIR")) return fs::path(env);
    return fs::path(".");
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    SynthConfig config;
    std::string out;
};

void add_synth(CLI::App& app, SynthArgs& args) {
    CLI::App* cmd = app.add_subcommand("synth", "Generate a synthetic multi-camera dataset");
    cmd->add_option("--n-samples", args.config.n_samples, "Number of samples");
    cmd->add_option("--n-cameras", args.config.n_cameras, "Number of ring cameras");
    cmd->add_option("--joint-angle-range", args.config.joint_angle_range,
                    "Max joint perturbation angle (rad)");
    cmd->add_option("--ring-radius", args.config.ring_radius, "Camera ring radius (mm)");
    cmd->add_option("--ring-height", args.config.ring_height, "Camera ring height (mm)");
    cmd->add_option("--height-jitter", args.config.height_jitter, "Camera height jitter (mm)");
    cmd->add_option("--root-jitter", args.config.root_jitter, "Pelvis placement jitter (mm)");
    cmd->add_option("--focal-px", args.config.focal_px, "Focal length (px)");
    cmd->add_option("--image-width", args.config.image_width, "Image width (px)");
    cmd->add_option("--image-height", args.config.image_height, "Image height (px)");
    cmd->add_option("--pixel-noise-sigma", args.config.pixel_noise_sigma,
                    "Gaussian detection noise (px)");
    cmd->add_option("--outlier-rate", args.config.outlier_rate,
                    "Per-landmark outlier probability");
    cmd->add_option("--outlier-magnitude", args.config.outlier_magnitude,
                    "Outlier magnitude (px)");
    cmd->add_option("--norm-scale", args.config.norm_scale, "2D normalization scale (px)");
    cmd->add_option("--bone-lengths", args.config.bone_lengths,
                    "Override bone length table (15 values, mm)");
    cmd->add_option("--seed", args.config.seed, "RNG seed")->required();
    cmd->add_option("--out", args.out, "Output directory");

    cmd->callback([&args, cmd]() {
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        const Dataset dataset = synth_generate(args.config);
        const fs::path manifest = save_dataset(dataset, out);

        std::map<std::string, std::string> config;
        config["n_samples"] = std::to_string(args.config.n_samples);
        config["n_cameras"] = std::to_string(args.config.n_cameras);
        config["joint_angle_range"] = fmt(args.config.joint_angle_range);
        config["ring_radius"] = fmt(args.config.ring_radius);
        config["ring_height"] = fmt(args.config.ring_height);
        config["height_jitter"] = fmt(args.config.height_jitter);
        config["root_jitter"] = fmt(args.config.root_jitter);
        config["focal_px"] = fmt(args.config.focal_px);
        config["image_width"] = fmt(args.config.image_width);
        config["image_height"] = fmt(args.config.image_height);
        config["pixel_noise_sigma"] = fmt(args.config.pixel_noise_sigma);
        config["outlier_rate"] = fmt(args.config.outlier_rate);
        config["outlier_magnitude"] = fmt(args.config.outlier_magnitude);
        config["norm_scale"] = fmt(args.config.norm_scale);
        config["seed"] = std::to_string(args.config.seed);
        write_run_manifest(out / "run_manifest.json", "synth", config, {manifest});
        std::cout << "wrote " << manifest.string() << " (" << dataset.n_samples()
                  << " samples, " << dataset.rig.n_cameras() << " cameras)\n";
        (void)cmd;
    });
}

// ---------------------------------------------------------- triangulate ----

struct TriangulateArgs {
    std::string calibration;
    std::string detections;
    std::string out;
};

void add_triangulate(CLI::App& app, TriangulateArgs& args) {
    CLI::App* cmd = app.add_subcommand(
        "triangulate", "DLT-triangulate multi-view detections and report re-projection error");
    cmd->add_option("--calibration", args.calibration, "Calibration file")->required();
    cmd->add_option("--detections", args.detections, "Detections file")->required();
    cmd->add_option("--out", args.out, "Output directory");

    cmd->callback([&args]() {
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        Dataset dataset = load_dataset(args.calibration, args.detections,
                                       /*eager_triangulation=*/true);

        PosesFile poses;
        poses.n_landmarks = dataset.n_landmarks();
        poses.frame = Frame3D::World;
        poses.root_relative = false;

        struct Stats {
            double sum = 0.0;
            double max = 0.0;
            std::int64_t count = 0;
        };
        std::map<int, Stats> per_camera;

        for (const auto& sample : dataset.samples) {
            const Pose3D& world = *sample.input_triangulation;
            poses.poses.push_back(PoseRecord{sample.id, -1, world.landmarks});
            for (const auto& cam : dataset.rig.cameras) {
                const Pose2D reprojected = project(world_to_camera(world, cam), cam);
                const Landmarks2D diff =
                    reprojected.landmarks - sample.detections.at(cam.id).landmarks;
                Stats& stats = per_camera[cam.id];
                for (Eigen::Index m = 0; m < diff.rows(); ++m) {
                    const double err = diff.row(m).norm();
                    stats.sum += err;
                    stats.max = std::max(stats.max, err);
                    ++stats.count;
                }
            }
        }
        save_poses(poses, out / "triangulated.txt");

        std::ofstream report(out / "reprojection_report.csv");
        report << "camera,n_landmarks,mean_px,max_px\n";
        Stats all;
        for (const auto& [cam_id, stats] : per_camera) {
            report << cam_id << "," << stats.count << ","
                   << fmt(stats.count ? stats.sum / stats.count : 0.0) << "," << fmt(stats.max)
                   << "\n";
            all.sum += stats.sum;
            all.max = std::max(all.max, stats.max);
            all.count += stats.count;
        }
        report << "all," << all.count << "," << fmt(all.count ? all.sum / all.count : 0.0)
               << "," << fmt(all.max) << "\n";
        report.close();

        write_run_manifest(out / "run_manifest.json", "triangulate",
                           {{"calibration", args.calibration},
                            {"detections", args.detections}},
                           {args.calibration, args.detections});
        std::cout << "triangulated " << dataset.n_samples() << " samples, max re-projection "
                  << fmt(all.max) << " px\n";
    });
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    TrainConfig config;
    std::string preset;
    std::string manifest;
    std::string eval_manifest;
    std::string resume;
    std::string out;
};

void add_train_flags(CLI::App* cmd, TrainConfig& config) {
    cmd->add_option("--batch-size", config.batch_size, "Mini-batch size");
    cmd->add_option("--learning-rate", config.learning_rate, "Adam learning rate");
    cmd->add_option("--epochs", config.epochs, "Training epochs");
    cmd->add_option("--adam-beta1", config.adam_beta1, "Adam beta1");
    cmd->add_option("--adam-beta2", config.adam_beta2, "Adam beta2");
    cmd->add_option("--adam-epsilon", config.adam_epsilon, "Adam epsilon");
    cmd->add_option("--w-in", config.weights.w_in, "Input triangulation loss weight");
    cmd->add_option("--w-proj", config.weights.w_proj, "Re-projection loss weight");
    cmd->add_option("--w-con", config.weights.w_con, "Consistency loss weight");
    cmd->add_option("--w-out", config.weights.w_out, "Output triangulation loss weight");
    cmd->add_option("--out-loss-fraction", config.out_loss_fraction,
                    "Final fraction of epochs with the output loss active");
    cmd->add_option("--eval-every", config.eval_every, "Evaluation cadence (epochs)");
    cmd->add_option("--width", config.width, "Hidden width");
    cmd->add_option("--n-blocks", config.n_blocks, "Residual block count");
    cmd->add_flag("--differentiate-through-dlt", config.differentiate_through_dlt,
                  "Propagate output-loss gradients through the DLT solve");
    cmd->add_flag("--symmetric-consistency", config.symmetric_consistency,
                  "Both-sides-live consistency loss variant");
}

void apply_preset(const std::string& preset, CLI::App* cmd, TrainConfig& config) {
    if (preset.empty()) return;
    TrainConfig base;
    if (preset == "desk") {
        base = TrainConfig::desk_preset();
    } else if (preset == "paper") {
        base = TrainConfig::paper_preset();
    } else {
        throw CLI::ValidationError("--preset", "unknown preset '" + preset + "'");
    }
    // Explicit flags win over the preset.
    if (!cmd->count("--batch-size")) config.batch_size = base.batch_size;
    if (!cmd->count("--learning-rate")) config.learning_rate = base.learning_rate;
    if (!cmd->count("--epochs")) config.epochs = base.epochs;
    if (!cmd->count("--width")) config.width = base.width;
    if (!cmd->count("--n-blocks")) config.n_blocks = base.n_blocks;
}

std::map<std::string, std::string> train_config_map(const TrainConfig& config) {
    return {{"batch_size", std::to_string(config.batch_size)},
            {"learning_rate", fmt(config.learning_rate)},
            {"epochs", std::to_string(config.epochs)},
            {"adam_beta1", fmt(config.adam_beta1)},
            {"adam_beta2", fmt(config.adam_beta2)},
            {"adam_epsilon", fmt(config.adam_epsilon)},
            {"w_in", fmt(config.weights.w_in)},
            {"w_proj", fmt(config.weights.w_proj)},
            {"w_con", fmt(config.weights.w_con)},
            {"w_out", fmt(config.weights.w_out)},
            {"out_loss_fraction", fmt(config.out_loss_fraction)},
            {"eval_every", std::to_string(config.eval_every)},
            {"width", std::to_string(config.width)},
            {"n_blocks", std::to_string(config.n_blocks)},
            {"differentiate_through_dlt",
             config.differentiate_through_dlt ? "true" : "false"},
            {"symmetric_consistency", config.symmetric_consistency ? "true" : "false"},
            {"seed", std::to_string(config.seed)}};
}

void add_train(CLI::App& app, TrainArgs& args) {
    CLI::App* cmd =
        app.add_subcommand("train", "Train the lifter on a multi-view dataset");
    cmd->add_option("--manifest", args.manifest, "Training dataset manifest")->required();
    cmd->add_option("--eval-manifest", args.eval_manifest, "Held-out dataset manifest");
    cmd->add_option("--resume", args.resume, "Checkpoint to resume from");
    cmd->add_option("--preset", args.preset, "Config preset: desk or paper");
    cmd->add_option("--seed", args.config.seed, "RNG seed")->required();
    cmd->add_option("--out", args.out, "Output directory");
    add_train_flags(cmd, args.config);

    cmd->callback([&args, cmd]() {
        apply_preset(args.preset, cmd, args.config);
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        args.config.checkpoint_dir = out.string();

        const Dataset dataset = load_manifest(args.manifest, /*eager_triangulation=*/true);
        std::optional<Dataset> eval_dataset;
        if (!args.eval_manifest.empty()) {
            eval_dataset = load_manifest(args.eval_manifest, true);
        }
        std::optional<Checkpoint> resume;
        if (!args.resume.empty()) resume = load_checkpoint(args.resume);

        const TrainResult result =
            train(dataset, args.config, eval_dataset ? &*eval_dataset : nullptr,
                  resume ? &*resume : nullptr);
        write_metrics_csv(result.history, out / "metrics.csv");

        std::vector<fs::path> inputs{args.manifest};
        if (!args.eval_manifest.empty()) inputs.push_back(args.eval_manifest);
        if (!args.resume.empty()) inputs.push_back(args.resume);
        write_run_manifest(out / "run_manifest.json", "train", train_config_map(args.config),
                           inputs);

        std::cout << "trained " << args.config.epochs << " epochs";
        if (!result.history.empty() && result.history.back().p_mpjpe) {
            std::cout << ", final P-MPJPE " << fmt(*result.history.back().p_mpjpe) << " mm";
        }
        std::cout << "\ncheckpoint: " << (out / "checkpoint_final.ckpt").string() << "\n";
    });
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string out;
    double pck_threshold = 150.0;
    int auc_steps = 31;
    std::string pck_alignment = "root";
    int plot_limit = 0;
};

void add_eval(CLI::App& app, EvalArgs& args) {
    CLI::App* cmd = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
    cmd->add_option("--checkpoint", args.checkpoint, "Model checkpoint")->required();
    cmd->add_option("--manifest", args.manifest, "Dataset manifest with ground truth")
        ->required();
    cmd->add_option("--out", args.out, "Output directory");
    cmd->add_option("--pck-threshold", args.pck_threshold, "3DPCK threshold (mm)");
    cmd->add_option("--auc-steps", args.auc_steps, "AUC threshold grid size");
    cmd->add_option("--pck-alignment", args.pck_alignment, "PCK alignment: root or procrustes");
    cmd->add_option("--plot", args.plot_limit, "Export up to N per-sample SVG renderings");

    cmd->callback([&args]() {
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        const Checkpoint checkpoint = load_checkpoint(args.checkpoint);
        const Dataset dataset = load_manifest(args.manifest);
        if (dataset.n_landmarks() != checkpoint.params.config.n_landmarks) {
            throw ValidationError("eval: dataset landmark count does not match the checkpoint");
        }
        const PckAlignment alignment = args.pck_alignment == "procrustes"
                                           ? PckAlignment::Procrustes
                                           : PckAlignment::Root;
        const Eigen::Index root = dataset.skeleton.root_index;
        Norm2DParams norm{checkpoint.norm_scale};

        struct Group {
            std::vector<Pose3D> preds;
            std::vector<Pose3D> gts;
            double mpjpe_sum = 0.0;
            double p_mpjpe_sum = 0.0;
        };
        std::map<int, Group> groups;
        int plotted = 0;

        for (const auto& sample : dataset.samples) {
            if (!sample.gt_pose) continue;
            for (const auto& cam : dataset.rig.cameras) {
                const Pose3D pred =
                    infer(checkpoint.params, sample.detections.at(cam.id), norm, root);
                const Pose3D gt_cam =
                    root_center(world_to_camera(*sample.gt_pose, cam), root).first;
                Group& group = groups[cam.id];
                group.mpjpe_sum += mpjpe(pred, gt_cam);
                group.p_mpjpe_sum += p_mpjpe(pred, gt_cam);
                group.preds.push_back(pred);
                group.gts.push_back(gt_cam);

                if (plotted < args.plot_limit) {
                    const SynthSkeleton human = humanoid16();
                    const auto edges = dataset.skeleton.names == human.names
                                           ? skeleton_edges(human)
                                           : std::vector<std::pair<int, int>>{};
                    render_pose_svg(
                        out / ("sample_" + std::to_string(sample.id) + "_cam" +
                               std::to_string(cam.id) + ".svg"),
                        {RenderPanel{"2D detection", sample.detections.at(cam.id).landmarks,
                                     std::nullopt},
                         RenderPanel{"3D ground truth", std::nullopt, gt_cam.landmarks},
                         RenderPanel{"3D prediction", std::nullopt, pred.landmarks}},
                        edges);
                    ++plotted;
                }
            }
        }
        if (groups.empty()) {
            throw ValidationError("eval: dataset has no ground-truth poses");
        }

        std::vector<EvalReportRow> rows;
        std::vector<Pose3D> all_preds, all_gts;
        double all_mpjpe = 0.0, all_p_mpjpe = 0.0;
        std::int64_t all_n = 0;
        for (auto& [cam_id, group] : groups) {
            EvalReportRow row;
            row.group = "camera:" + std::to_string(cam_id);
            row.n_poses = static_cast<std::int64_t>(group.preds.size());
            row.mpjpe = group.mpjpe_sum / row.n_poses;
            row.p_mpjpe = group.p_mpjpe_sum / row.n_poses;
            std::vector<Pose3D> preds = group.preds;
            std::vector<Pose3D> gts = group.gts;
            align_pose_pairs(preds, gts, alignment, root);
            row.pck = pck3d(preds, gts, args.pck_threshold);
            row.auc = auc3d(preds, gts, args.pck_threshold, args.auc_steps);
            rows.push_back(row);

            all_mpjpe += group.mpjpe_sum;
            all_p_mpjpe += group.p_mpjpe_sum;
            all_n += row.n_poses;
            all_preds.insert(all_preds.end(), preds.begin(), preds.end());
            all_gts.insert(all_gts.end(), gts.begin(), gts.end());
        }
        EvalReportRow total;
        total.group = "all";
        total.n_poses = all_n;
        total.mpjpe = all_mpjpe / all_n;
        total.p_mpjpe = all_p_mpjpe / all_n;
        total.pck = pck3d(all_preds, all_gts, args.pck_threshold);
        total.auc = auc3d(all_preds, all_gts, args.pck_threshold, args.auc_steps);
        rows.push_back(total);
        write_eval_report(rows, out / "eval_report.csv");

        write_run_manifest(out / "run_manifest.json", "eval",
                           {{"checkpoint", args.checkpoint},
                            {"manifest", args.manifest},
                            {"pck_threshold", fmt(args.pck_threshold)},
                            {"auc_steps", std::to_string(args.auc_steps)},
                            {"pck_alignment", args.pck_alignment},
                            {"plot", std::to_string(args.plot_limit)}},
                           {args.checkpoint, args.manifest});
        std::cout << "evaluated " << all_n << " poses: MPJPE " << fmt(total.mpjpe)
                  << " mm, P-MPJPE " << fmt(total.p_mpjpe) << " mm, PCK " << fmt(total.pck)
                  << ", AUC " << fmt(total.auc) << "\n";
    });
}

// ---------------------------------------------------------------- infer ----

struct InferArgs {
    std::string checkpoint;
    std::string detections;
    std::string out;
};

void add_infer(CLI::App& app, InferArgs& args) {
    CLI::App* cmd =
        app.add_subcommand("infer", "Lift single-view 2D detections to 3D poses");
    cmd->add_option("--checkpoint", args.checkpoint, "Model checkpoint")->required();
    cmd->add_option("--detections", args.detections, "Detections file")->required();
    cmd->add_option("--out", args.out, "Output directory");

    cmd->callback([&args]() {
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        const Checkpoint checkpoint = load_checkpoint(args.checkpoint);
        const DetectionsFile detections = load_detections(args.detections);
        if (detections.n_landmarks != checkpoint.params.config.n_landmarks) {
            throw ValidationError("infer: detections landmark count does not match checkpoint");
        }
        const Norm2DParams norm{checkpoint.norm_scale};
        const Eigen::Index root = checkpoint.params.config.root_index;

        PosesFile poses;
        poses.n_landmarks = detections.n_landmarks;
        poses.frame = Frame3D::Camera;
        poses.root_relative = true;
        for (const auto& rec : detections.records) {
            const Pose3D pred = infer(checkpoint.params, rec.pose, norm, root);
            poses.poses.push_back(PoseRecord{rec.sample_id, rec.camera_id, pred.landmarks});
        }
        save_poses(poses, out / "poses.txt");

        write_run_manifest(out / "run_manifest.json", "infer",
                           {{"checkpoint", args.checkpoint},
                            {"detections", args.detections}},
                           {args.checkpoint, args.detections});
        std::cout << "lifted " << poses.poses.size() << " detections\n";
    });
}

// --------------------------------------------------------------- ablate ----

struct AblateArgs {
    TrainConfig config;
    std::string preset;
    std::string manifest;
    std::string eval_manifest;
    std::string out;
};

void add_ablate(CLI::App& app, AblateArgs& args) {
    CLI::App* cmd = app.add_subcommand(
        "ablate", "Train the five loss configurations and compare held-out P-MPJPE");
    cmd->add_option("--manifest", args.manifest, "Training dataset manifest")->required();
    cmd->add_option("--eval-manifest", args.eval_manifest, "Held-out dataset manifest")
        ->required();
    cmd->add_option("--preset", args.preset, "Config preset: desk or paper");
    cmd->add_option("--seed", args.config.seed, "RNG seed (shared by all configurations)")
        ->required();
    cmd->add_option("--out", args.out, "Output directory");
    add_train_flags(cmd, args.config);

    cmd->callback([&args, cmd]() {
        apply_preset(args.preset, cmd, args.config);
        const fs::path out = args.out.empty() ? default_out_dir() : fs::path(args.out);
        fs::create_directories(out);
        const Dataset dataset = load_manifest(args.manifest, /*eager_triangulation=*/true);
        const Dataset holdout = load_manifest(args.eval_manifest, true);

        struct Row {
            const char* name;
            LossWeights weights;
        };
        const std::vector<Row> rows = {
            {"L_in", LossWeights{1.0, 0.0, 0.0, 0.0}},
            {"L_proj", LossWeights{0.0, 1.0, 0.0, 0.0}},
            {"L_in+L_proj", LossWeights{1.0, 1.0, 0.0, 0.0}},
            {"L_in+L_proj+L_con", LossWeights{1.0, 1.0, 0.001, 0.0}},
            {"L_in+L_proj+L_con+L_out", LossWeights{1.0, 1.0, 0.001, 0.01}},
        };

        std::ofstream table(out / "ablation.csv");
        table << "losses,p_mpjpe\n";
        std::cout << "losses,p_mpjpe\n";
        for (const auto& row : rows) {
            TrainConfig config = args.config;
            config.weights = row.weights;
            config.checkpoint_dir.clear();
            const TrainResult result = train(dataset, config, &holdout);
            const double final_p_mpjpe = evaluate_p_mpjpe(result.params, holdout);
            table << row.name << "," << fmt(final_p_mpjpe) << "\n";
            std::cout << row.name << "," << fmt(final_p_mpjpe) << "\n";
        }
        table.close();

        auto config_map = train_config_map(args.config);
        config_map.erase("w_in");
        config_map.erase("w_proj");
        config_map.erase("w_con");
        config_map.erase("w_out");
        write_run_manifest(out / "run_manifest.json", "ablate", config_map,
                           {args.manifest, args.eval_manifest});
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mvlift: self-supervised multi-view 3D pose lifting"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.set_config("--config", "", "Read options from an INI/TOML config file");
    app.require_subcommand(1);

    SynthArgs synth_args;
    TriangulateArgs triangulate_args;
    TrainArgs train_args;
    EvalArgs eval_args;
    InferArgs infer_args;
    AblateArgs ablate_args;
    add_synth(app, synth_args);
    add_triangulate(app, triangulate_args);
    add_train(app, train_args);
    add_eval(app, eval_args);
    add_infer(app, infer_args);
    add_ablate(app, ablate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const InsufficientViewsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ContractViolation& e) {
        std::cerr << "internal contract violation: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
