#include "mvlift/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace mvlift {

namespace {

using nlohmann::json;

std::string loc(const std::filesystem::path& path, size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream stream(line);
    std::string token;
    while (stream >> token) tokens.push_back(token);
    return tokens;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = {}) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, mode);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(const std::string& token, const std::string& context) {
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
        throw ValidationError(context + ": cannot parse '" + token + "' as a number");
    }
    return value;
}

namespace {

std::int64_t parse_int(const std::string& token, const std::string& context) {
    std::int64_t value = 0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
        throw ValidationError(context + ": cannot parse '" + token + "' as an integer");
    }
    return value;
}

}  // namespace

CameraRig load_calibration(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    CameraRig rig;

    struct PendingCamera {
        int id = 0;
        std::optional<Mat3> intrinsics;
        std::optional<Mat3> rotation;
        std::optional<Vec3> translation;
        size_t line = 0;
    };
    std::optional<PendingCamera> pending;

    auto finish = [&](const PendingCamera& cam) {
        if (!cam.intrinsics || !cam.rotation || !cam.translation) {
            throw ValidationError(loc(path, cam.line) + ": camera " + std::to_string(cam.id) +
                                  " is missing K, R or t");
        }
        rig.cameras.push_back(
            CameraView::make(cam.id, *cam.intrinsics, *cam.rotation, *cam.translation));
    };

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string& key = tokens[0];
        const std::string context = loc(path, line_no);

        if (key == "units") {
            if (tokens.size() != 2) throw ValidationError(context + ": units needs one value");
            rig.units = tokens[1];
        } else if (key == "camera") {
            if (tokens.size() != 2) throw ValidationError(context + ": camera needs an id");
            if (pending) finish(*pending);
            pending = PendingCamera{static_cast<int>(parse_int(tokens[1], context)), {}, {}, {},
                                    line_no};
        } else if (key == "K" || key == "R") {
            if (!pending) throw ValidationError(context + ": " + key + " outside a camera block");
            if (tokens.size() != 10) {
                throw ValidationError(context + ": " + key + " needs 9 values");
            }
            Mat3 m;
            for (int i = 0; i < 9; ++i) {
                m(i / 3, i % 3) = parse_double(tokens[i + 1], context);
            }
            (key == "K" ? pending->intrinsics : pending->rotation) = m;
        } else if (key == "t") {
            if (!pending) throw ValidationError(context + ": t outside a camera block");
            if (tokens.size() != 4) throw ValidationError(context + ": t needs 3 values");
            pending->translation = Vec3(parse_double(tokens[1], context),
                                        parse_double(tokens[2], context),
                                        parse_double(tokens[3], context));
        } else if (key == "dist") {
            if (!pending) throw ValidationError(context + ": dist outside a camera block");
            for (size_t i = 1; i < tokens.size(); ++i) {
                if (parse_double(tokens[i], context) != 0.0) {
                    throw ValidationError(context + ": camera " + std::to_string(pending->id) +
                                          " has nonzero distortion; undistort detections first");
                }
            }
        } else {
            throw ValidationError(context + ": unknown key '" + key + "'");
        }
    }
    if (pending) finish(*pending);
    rig.validate();
    return rig;
}

void save_calibration(const CameraRig& rig, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "# mvlift calibration v1\n";
    out << "units " << rig.units << "\n";
    for (const auto& cam : rig.cameras) {
        out << "camera " << cam.id << "\n";
        out << "K";
        for (int i = 0; i < 9; ++i) out << " " << format_double(cam.intrinsics(i / 3, i % 3));
        out << "\nR";
        for (int i = 0; i < 9; ++i) out << " " << format_double(cam.rotation(i / 3, i % 3));
        out << "\nt";
        for (int i = 0; i < 3; ++i) out << " " << format_double(cam.translation(i));
        out << "\n";
    }
}

DetectionsFile load_detections(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    DetectionsFile file;
    std::string line;
    size_t line_no = 0;
    bool have_landmarks = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string context = loc(path, line_no);
        if (tokens[0] == "landmarks") {
            if (tokens.size() != 2) {
                throw ValidationError(context + ": landmarks needs one value");
            }
            file.n_landmarks = parse_int(tokens[1], context);
            if (file.n_landmarks < 1) {
                throw ValidationError(context + ": landmark count must be >= 1");
            }
            have_landmarks = true;
        } else if (tokens[0] == "det") {
            if (!have_landmarks) {
                throw ValidationError(context + ": det record before the landmarks header");
            }
            const size_t n = static_cast<size_t>(file.n_landmarks);
            const size_t base = 3 + 2 * n;
            if (tokens.size() != base && tokens.size() != base + n) {
                throw ValidationError(context + ": expected " + std::to_string(base) + " or " +
                                      std::to_string(base + n) + " tokens, got " +
                                      std::to_string(tokens.size()));
            }
            DetectionRecord rec;
            rec.sample_id = parse_int(tokens[1], context);
            rec.camera_id = static_cast<int>(parse_int(tokens[2], context));
            rec.pose.frame = Frame2D::Pixel;
            rec.pose.landmarks.resize(file.n_landmarks, 2);
            for (size_t i = 0; i < n; ++i) {
                rec.pose.landmarks(static_cast<Eigen::Index>(i), 0) =
                    parse_double(tokens[3 + 2 * i], context);
                rec.pose.landmarks(static_cast<Eigen::Index>(i), 1) =
                    parse_double(tokens[3 + 2 * i + 1], context);
            }
            if (tokens.size() == base + n) {
                Eigen::VectorXd conf(file.n_landmarks);
                for (size_t i = 0; i < n; ++i) {
                    conf(static_cast<Eigen::Index>(i)) = parse_double(tokens[base + i], context);
                }
                rec.pose.confidence = conf;
            }
            file.records.push_back(std::move(rec));
        } else {
            throw ValidationError(context + ": unknown key '" + tokens[0] + "'");
        }
    }
    if (!have_landmarks) {
        throw ValidationError(path.string() + ": missing landmarks header");
    }
    return file;
}

void save_detections(const DetectionsFile& detections, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "# mvlift detections v1\n";
    out << "landmarks " << detections.n_landmarks << "\n";
    for (const auto& rec : detections.records) {
        out << "det " << rec.sample_id << " " << rec.camera_id;
        for (Eigen::Index i = 0; i < rec.pose.landmarks.rows(); ++i) {
            out << " " << format_double(rec.pose.landmarks(i, 0)) << " "
                << format_double(rec.pose.landmarks(i, 1));
        }
        if (rec.pose.confidence) {
            for (Eigen::Index i = 0; i < rec.pose.confidence->size(); ++i) {
                out << " " << format_double((*rec.pose.confidence)(i));
            }
        }
        out << "\n";
    }
}

PosesFile load_poses(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    PosesFile file;
    std::string line;
    size_t line_no = 0;
    bool have_landmarks = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string context = loc(path, line_no);
        if (tokens[0] == "landmarks") {
            file.n_landmarks = parse_int(tokens[1], context);
            have_landmarks = true;
        } else if (tokens[0] == "frame") {
            if (tokens.size() != 2 || (tokens[1] != "world" && tokens[1] != "camera")) {
                throw ValidationError(context + ": frame must be 'world' or 'camera'");
            }
            file.frame = tokens[1] == "world" ? Frame3D::World : Frame3D::Camera;
        } else if (tokens[0] == "root_relative") {
            file.root_relative = parse_int(tokens[1], context) != 0;
        } else if (tokens[0] == "pose") {
            if (!have_landmarks) {
                throw ValidationError(context + ": pose record before the landmarks header");
            }
            const size_t n = static_cast<size_t>(file.n_landmarks);
            if (tokens.size() != 3 + 3 * n) {
                throw ValidationError(context + ": expected " + std::to_string(3 + 3 * n) +
                                      " tokens, got " + std::to_string(tokens.size()));
            }
            PoseRecord rec;
            rec.sample_id = parse_int(tokens[1], context);
            rec.camera_id = static_cast<int>(parse_int(tokens[2], context));
            rec.landmarks.resize(file.n_landmarks, 3);
            for (size_t i = 0; i < n; ++i) {
                for (int k = 0; k < 3; ++k) {
                    rec.landmarks(static_cast<Eigen::Index>(i), k) =
                        parse_double(tokens[3 + 3 * i + k], context);
                }
            }
            file.poses.push_back(std::move(rec));
        } else {
            throw ValidationError(context + ": unknown key '" + tokens[0] + "'");
        }
    }
    if (!have_landmarks) throw ValidationError(path.string() + ": missing landmarks header");
    return file;
}

void save_poses(const PosesFile& poses, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "# mvlift poses3d v1\n";
    out << "landmarks " << poses.n_landmarks << "\n";
    out << "frame " << (poses.frame == Frame3D::World ? "world" : "camera") << "\n";
    out << "root_relative " << (poses.root_relative ? 1 : 0) << "\n";
    for (const auto& rec : poses.poses) {
        out << "pose " << rec.sample_id << " " << rec.camera_id;
        for (Eigen::Index i = 0; i < rec.landmarks.rows(); ++i) {
            for (int k = 0; k < 3; ++k) out << " " << format_double(rec.landmarks(i, k));
        }
        out << "\n";
    }
}

Dataset load_dataset(const std::filesystem::path& calibration_path,
                     const std::filesystem::path& detections_path, bool eager_triangulation) {
    Dataset dataset;
    dataset.rig = load_calibration(calibration_path);
    const DetectionsFile detections = load_detections(detections_path);

    dataset.skeleton.root_index = 0;
    for (Eigen::Index i = 0; i < detections.n_landmarks; ++i) {
        dataset.skeleton.names.push_back("lm" + std::to_string(i));
    }
    dataset.normalization.scale = 1.0;

    std::map<std::int64_t, RigSample> by_id;
    for (const auto& rec : detections.records) {
        if (!dataset.rig.has_camera(rec.camera_id)) {
            throw ValidationError(detections_path.string() + ": sample " +
                                  std::to_string(rec.sample_id) +
                                  " references camera id " + std::to_string(rec.camera_id) +
                                  " absent from the calibration");
        }
        auto& sample = by_id[rec.sample_id];
        sample.id = rec.sample_id;
        sample.detections[rec.camera_id] = rec.pose;
    }

    // Keep only complete, finite samples (sensor dropout is skipped, not fatal).
    for (auto& [id, sample] : by_id) {
        bool complete = true;
        for (const auto& cam : dataset.rig.cameras) {
            auto it = sample.detections.find(cam.id);
            if (it == sample.detections.end() || !all_finite(it->second.landmarks)) {
                complete = false;
                break;
            }
        }
        if (complete) dataset.samples.push_back(std::move(sample));
    }

    if (eager_triangulation) dataset.ensure_triangulations();
    return dataset;
}

Dataset load_manifest(const std::filesystem::path& manifest_path, bool eager_triangulation) {
    std::ifstream in = open_input(manifest_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(manifest_path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "mvlift-dataset-manifest") {
        throw ValidationError(manifest_path.string() + ": not a dataset manifest");
    }
    const auto dir = manifest_path.parent_path();
    auto resolve = [&dir](const std::string& rel) { return dir / rel; };

    Dataset dataset = load_dataset(resolve(doc.at("calibration").get<std::string>()),
                                   resolve(doc.at("detections").get<std::string>()),
                                   eager_triangulation);

    const auto& skel = doc.at("skeleton");
    dataset.skeleton.names = skel.at("names").get<std::vector<std::string>>();
    dataset.skeleton.root_index = skel.at("root_index").get<int>();
    dataset.normalization.scale = doc.at("normalization").at("scale").get<double>();

    if (doc.contains("gt_poses")) {
        const PosesFile gt = load_poses(resolve(doc.at("gt_poses").get<std::string>()));
        if (gt.frame != Frame3D::World || gt.root_relative) {
            throw ValidationError(manifest_path.string() +
                                  ": ground-truth poses must be absolute world-frame");
        }
        std::map<std::int64_t, const PoseRecord*> by_id;
        for (const auto& rec : gt.poses) by_id[rec.sample_id] = &rec;
        for (auto& sample : dataset.samples) {
            auto it = by_id.find(sample.id);
            if (it != by_id.end()) {
                Pose3D pose;
                pose.landmarks = it->second->landmarks;
                pose.frame = Frame3D::World;
                sample.gt_pose = pose;
            }
        }
    }
    dataset.validate();
    return dataset;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_calibration(dataset.rig, dir / "calibration.txt");

    DetectionsFile detections;
    detections.n_landmarks = dataset.n_landmarks();
    for (const auto& sample : dataset.samples) {
        for (const auto& [cam_id, pose] : sample.detections) {
            detections.records.push_back(DetectionRecord{sample.id, cam_id, pose});
        }
    }
    save_detections(detections, dir / "detections.txt");

    bool any_gt = false;
    for (const auto& sample : dataset.samples) {
        if (sample.gt_pose) {
            any_gt = true;
            break;
        }
    }
    if (any_gt) {
        PosesFile gt;
        gt.n_landmarks = dataset.n_landmarks();
        gt.frame = Frame3D::World;
        gt.root_relative = false;
        for (const auto& sample : dataset.samples) {
            if (sample.gt_pose) {
                gt.poses.push_back(PoseRecord{sample.id, -1, sample.gt_pose->landmarks});
            }
        }
        save_poses(gt, dir / "gt_poses.txt");
    }

    json doc;
    doc["format"] = "mvlift-dataset-manifest";
    doc["version"] = 1;
    doc["calibration"] = "calibration.txt";
    doc["detections"] = "detections.txt";
    if (any_gt) doc["gt_poses"] = "gt_poses.txt";
    doc["skeleton"] = {{"names", dataset.skeleton.names},
                       {"root_index", dataset.skeleton.root_index}};
    doc["normalization"] = {{"scale", dataset.normalization.scale}};

    const auto manifest_path = dir / "manifest.json";
    std::ofstream out = open_output(manifest_path);
    out << doc.dump(2) << "\n";
    return manifest_path;
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'V', 'L', 'C', 'K', 'P', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_block(std::ostream& out, const double* data, Eigen::Index size) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(size * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw ValidationError(context + ": truncated checkpoint");
    }
    return v;
}
std::int64_t read_i64(std::istream& in, const std::string& context) {
    std::int64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw ValidationError(context + ": truncated checkpoint");
    }
    return v;
}
double read_f64(std::istream& in, const std::string& context) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw ValidationError(context + ": truncated checkpoint");
    }
    return v;
}
void read_block(std::istream& in, double* data, Eigen::Index size, const std::string& context) {
    if (!in.read(reinterpret_cast<char*>(data),
                 static_cast<std::streamsize>(size * sizeof(double)))) {
        throw ValidationError(context + ": truncated checkpoint");
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out = open_output(path, std::ios::binary);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const ModelConfig& cfg = checkpoint.params.config;
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(cfg.n_landmarks));
    write_u32(out, static_cast<std::uint32_t>(cfg.width));
    write_u32(out, static_cast<std::uint32_t>(cfg.n_blocks));
    write_u32(out, static_cast<std::uint32_t>(cfg.root_index));
    write_f64(out, cfg.bn_momentum);
    write_f64(out, cfg.bn_epsilon);
    write_f64(out, cfg.output_scale);
    write_f64(out, checkpoint.norm_scale);
    write_i64(out, checkpoint.next_epoch);
    write_u32(out, checkpoint.optimizer ? 1 : 0);

    auto& params = const_cast<ModelParams&>(checkpoint.params);
    for (const auto& t : learnable_tensors(params)) write_block(out, t.data, t.size);
    for (const auto& t : running_stat_tensors(params)) write_block(out, t.data, t.size);
    if (checkpoint.optimizer) {
        write_i64(out, checkpoint.optimizer->step);
        for (const auto& m : checkpoint.optimizer->m) write_block(out, m.data(), m.size());
        for (const auto& v : checkpoint.optimizer->v) write_block(out, v.data(), v.size());
    }
    if (!out) throw ValidationError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    const std::string context = path.string();

    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw ValidationError(context + ": not an mvlift checkpoint");
    }
    const std::uint32_t version = read_u32(in, context);
    if (version != 1) {
        throw ValidationError(context + ": unsupported checkpoint version " +
                              std::to_string(version));
    }

    ModelConfig cfg;
    cfg.n_landmarks = static_cast<int>(read_u32(in, context));
    cfg.width = static_cast<int>(read_u32(in, context));
    cfg.n_blocks = static_cast<int>(read_u32(in, context));
    cfg.root_index = static_cast<int>(read_u32(in, context));
    cfg.bn_momentum = read_f64(in, context);
    cfg.bn_epsilon = read_f64(in, context);
    cfg.output_scale = read_f64(in, context);

    Checkpoint checkpoint;
    checkpoint.norm_scale = read_f64(in, context);
    checkpoint.next_epoch = read_i64(in, context);
    const bool has_optimizer = read_u32(in, context) != 0;

    checkpoint.params = init_params(cfg, 0);
    checkpoint.params.mode = Mode::Eval;
    for (auto& t : learnable_tensors(checkpoint.params)) read_block(in, t.data, t.size, context);
    for (auto& t : running_stat_tensors(checkpoint.params)) {
        read_block(in, t.data, t.size, context);
    }
    if (has_optimizer) {
        OptimizerState state = OptimizerState::zeros_like(checkpoint.params);
        state.step = read_i64(in, context);
        for (auto& m : state.m) read_block(in, m.data(), m.size(), context);
        for (auto& v : state.v) read_block(in, v.data(), v.size(), context);
        checkpoint.optimizer = std::move(state);
    }
    return checkpoint;
}

void write_metrics_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "epoch,l_in,l_proj,l_con,l_out,total,p_mpjpe\n";
    for (const auto& rec : history) {
        out << rec.epoch << "," << format_double(rec.l_in) << "," << format_double(rec.l_proj)
            << "," << format_double(rec.l_con) << "," << format_double(rec.l_out) << ","
            << format_double(rec.total) << ",";
        if (rec.p_mpjpe) out << format_double(*rec.p_mpjpe);
        out << "\n";
    }
}

std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    std::vector<EpochRecord> history;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header
        std::vector<std::string> fields;
        std::string field;
        std::istringstream stream(line);
        while (std::getline(stream, field, ',')) fields.push_back(field);
        while (fields.size() < 7) fields.emplace_back();
        const std::string context = loc(path, line_no);
        EpochRecord rec;
        rec.epoch = static_cast<int>(parse_int(fields[0], context));
        rec.l_in = parse_double(fields[1], context);
        rec.l_proj = parse_double(fields[2], context);
        rec.l_con = parse_double(fields[3], context);
        rec.l_out = parse_double(fields[4], context);
        rec.total = parse_double(fields[5], context);
        if (!fields[6].empty()) rec.p_mpjpe = parse_double(fields[6], context);
        history.push_back(rec);
    }
    return history;
}

void write_eval_report(const std::vector<EvalReportRow>& rows,
                       const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "group,n_poses,mpjpe,p_mpjpe,pck3d,auc\n";
    for (const auto& row : rows) {
        out << row.group << "," << row.n_poses << "," << format_double(row.mpjpe) << ","
            << format_double(row.p_mpjpe) << "," << format_double(row.pck) << ","
            << format_double(row.auc) << "\n";
    }
}

std::uint64_t fnv1a_file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::uint64_t hash = 1469598103934665603ull;
    char buffer[4096];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buffer[i]);
            hash *= 1099511628211ull;
        }
        if (!in) break;
    }
    return hash;
}

void write_run_manifest(const std::filesystem::path& path, const std::string& command,
                        const std::map<std::string, std::string>& config,
                        const std::vector<std::filesystem::path>& inputs) {
    json doc;
    doc["format"] = "mvlift-run-manifest";
    doc["tool_version"] = kVersionString;
    doc["command"] = command;
    doc["config"] = config;
    json digests = json::object();
    for (const auto& input : inputs) {
        std::ostringstream hex;
        hex << std::hex << fnv1a_file_digest(input);
        digests[input.filename().string()] = hex.str();
    }
    doc["input_digests"] = digests;
    std::ofstream out = open_output(path);
    out << doc.dump(2) << "\n";
}

}  // namespace mvlift
