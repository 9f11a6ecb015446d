#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvlift/dataset.hpp"
#include "mvlift/model.hpp"
#include "mvlift/optim.hpp"

namespace mvlift {

inline constexpr const char* kVersionString = "0.1.0";

/// Round-trip-exact decimal formatting used by every text writer.
std::string format_double(double value);
double parse_double(const std::string& token, const std::string& context);

/// --- calibration file -----------------------------------------------------
/// Text format, one `camera <id>` block per view with row-major `K` (9),
/// `R` (9) and `t` (3) lines; optional `dist` lines must be all-zero.
CameraRig load_calibration(const std::filesystem::path& path);
void save_calibration(const CameraRig& rig, const std::filesystem::path& path);

/// --- detections file --------------------------------------------------------
/// Header `landmarks <N>`, then one `det <sample-id> <camera-id> <2N floats>`
/// line per record, optionally followed by N confidence values.
struct DetectionRecord {
    std::int64_t sample_id = 0;
    int camera_id = 0;
    Pose2D pose;  // pixel frame
};

struct DetectionsFile {
    Eigen::Index n_landmarks = 0;
    std::vector<DetectionRecord> records;
};

DetectionsFile load_detections(const std::filesystem::path& path);
void save_detections(const DetectionsFile& detections, const std::filesystem::path& path);

/// --- 3D poses file ----------------------------------------------------------
/// Header `landmarks <N>`, `frame world|camera`, `root_relative 0|1`, then one
/// `pose <sample-id> <camera-id> <3N floats>` line per record (camera-id is -1
/// in the world frame).
struct PoseRecord {
    std::int64_t sample_id = 0;
    int camera_id = -1;
    Landmarks3D landmarks;
};

struct PosesFile {
    Eigen::Index n_landmarks = 0;
    Frame3D frame = Frame3D::World;
    bool root_relative = false;
    std::vector<PoseRecord> poses;
};

PosesFile load_poses(const std::filesystem::path& path);
void save_poses(const PosesFile& poses, const std::filesystem::path& path);

/// --- dataset assembly -------------------------------------------------------

/// Builds a dataset from a calibration and a detections file. Samples that do
/// not cover every camera or contain non-finite coordinates are skipped
/// (sensor dropout); malformed lines are errors. Landmark names are
/// placeholders until a manifest supplies the real skeleton.
Dataset load_dataset(const std::filesystem::path& calibration_path,
                     const std::filesystem::path& detections_path,
                     bool eager_triangulation = false);

/// JSON manifest naming the component files plus skeleton and normalization.
Dataset load_manifest(const std::filesystem::path& manifest_path,
                      bool eager_triangulation = false);

/// Writes calibration/detections/gt files plus `manifest.json` into `dir`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// --- model checkpoint -------------------------------------------------------
/// Versioned little-endian binary container: topology header, learnable
/// tensors, batch-norm running statistics, optional optimizer state for
/// bit-exact training resume. Byte-stable for fixed contents.
struct Checkpoint {
    ModelParams params;
    double norm_scale = 1.0;
    std::int64_t next_epoch = 0;
    std::optional<OptimizerState> optimizer;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// --- training metrics -------------------------------------------------------
struct EpochRecord {
    int epoch = 0;
    double l_in = 0.0;
    double l_proj = 0.0;
    double l_con = 0.0;
    double l_out = 0.0;
    double total = 0.0;
    std::optional<double> p_mpjpe;
};

void write_metrics_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);
std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path& path);

/// --- evaluation report --------------------------------------------------------
struct EvalReportRow {
    std::string group;
    std::int64_t n_poses = 0;
    double mpjpe = 0.0;
    double p_mpjpe = 0.0;
    double pck = 0.0;
    double auc = 0.0;
};

void write_eval_report(const std::vector<EvalReportRow>& rows,
                       const std::filesystem::path& path);

/// --- run manifest -------------------------------------------------------------
/// JSON fingerprint of a command invocation: resolved configuration and input
/// digests. Deliberately timestamp-free so identical runs write identical bytes.
std::uint64_t fnv1a_file_digest(const std::filesystem::path& path);
void write_run_manifest(const std::filesystem::path& path, const std::string& command,
                        const std::map<std::string, std::string>& config,
                        const std::vector<std::filesystem::path>& inputs);

}  // namespace mvlift
