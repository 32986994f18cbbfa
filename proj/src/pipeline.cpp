#include "densiface/pipeline.hpp"

#include "densiface/errors.hpp"

#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>

namespace densiface {

using nlohmann::json;

void PipelineConfig::validate() const {
    kmeans.validate();
    rbf.validate();
    if (!(detect.scale_factor > 1.0)) throw ConfigError("detect: scale_factor must exceed 1");
    if (detect.min_neighbors < 0) throw ConfigError("detect: min_neighbors must be non-negative");
    if (face_bbox && (face_bbox->w <= 0 || face_bbox->h <= 0))
        throw ConfigError("face bbox must have positive width and height");
}

PixelRect parse_bbox(std::string_view text) {
    std::array<int, 4> v{};
    std::size_t field = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (field < 4) {
        const auto [next, ec] = std::from_chars(p, end, v[field]);
        if (ec != std::errc{}) break;
        ++field;
        p = next;
        if (field < 4) {
            if (p == end || *p != ',') break;
            ++p;
        }
    }
    if (field != 4 || p != end) throw UsageError("face bbox must be x,y,w,h integers, got '" + std::string(text) + "'");
    PixelRect r{v[0], v[1], v[2], v[3]};
    if (r.w <= 0 || r.h <= 0) throw UsageError("face bbox must have positive width and height");
    return r;
}

void apply_config_json(PipelineConfig& cfg, std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config: document must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "depth") cfg.depth_path = value.get<std::string>();
            else if (key == "color") cfg.color_path = value.get<std::string>();
            else if (key == "intrinsics") cfg.intrinsics_path = value.get<std::string>();
            else if (key == "cascade") cfg.cascade_path = value.get<std::string>();
            else if (key == "out") cfg.out_path = value.get<std::string>();
            else if (key == "metrics") cfg.metrics_path = value.get<std::string>();
            else if (key == "scene") cfg.scene_path = value.get<std::string>();
            else if (key == "face_bbox") {
                const auto b = value.get<std::vector<int>>();
                if (b.size() != 4) throw ValidationError("config: face_bbox must hold 4 integers");
                cfg.face_bbox = PixelRect{b[0], b[1], b[2], b[3]};
            } else if (key == "upsample") cfg.rbf.upsample = value.get<int>();
            else if (key == "r0_mult") cfg.rbf.r0_multiplier = value.get<double>();
            else if (key == "mask_mult") cfg.rbf.mask_multiplier = value.get<double>();
            else if (key == "ridge") cfg.rbf.ridge = value.get<double>();
            else if (key == "cutoff_mult") cfg.rbf.cutoff_multiplier = value.get<double>();
            else if (key == "color_k") cfg.rbf.color_k = value.get<std::size_t>();
            else if (key == "solver") cfg.rbf.solver = parse_rbf_solver(value.get<std::string>());
            else if (key == "trees") cfg.rbf.color_search.trees = value.get<std::size_t>();
            else if (key == "checks") cfg.rbf.color_search.max_checks = value.get<std::size_t>();
            else if (key == "top_r") cfg.rbf.color_search.top_r = value.get<std::size_t>();
            else if (key == "seed") {
                cfg.rbf.color_search.rng_seed = value.get<std::uint64_t>();
                cfg.kmeans.rng_seed = value.get<std::uint64_t>();
            } else if (key == "kmeans_k") cfg.kmeans.k = value.get<std::size_t>();
            else if (key == "kmeans_max_iters") cfg.kmeans.max_iters = value.get<std::size_t>();
            else if (key == "scale_factor") cfg.detect.scale_factor = value.get<double>();
            else if (key == "min_neighbors") cfg.detect.min_neighbors = value.get<int>();
            else throw ValidationError("config: unknown key '" + key + "'");
        } catch (const json::exception&) {
            throw ValidationError("config: field '" + key + "' has the wrong type");
        } catch (const UsageError& e) {
            throw ValidationError(std::string("config: ") + e.what());
        }
    }
}

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
public:
    StageTimer(std::vector<StageRecord>& log, std::string name) : log_(log), name_(std::move(name)) {}
    void done(std::size_t points) {
        const double s = std::chrono::duration<double>(Clock::now() - start_).count();
        log_.push_back({name_, points, s});
        spdlog::info("{:<14} {:>9} points {:>9.3f} s", name_, points, s);
    }

private:
    std::vector<StageRecord>& log_;
    std::string name_;
    Clock::time_point start_ = Clock::now();
};

} // namespace

Reconstruction reconstruct(const PipelineInputs& in, const PipelineConfig& cfg) {
    cfg.validate();
    Reconstruction rec;
    const IntrinsicsDoc& intr = in.intrinsics;

    StageTimer t_reg(rec.stages, "register");
    const RegisteredFrame frame =
        register_depth_to_color(in.depth, in.color, intr.depth_intrinsics, intr.color_intrinsics, intr.rig);
    const auto valid = static_cast<std::size_t>(
        std::count_if(in.depth.samples.begin(), in.depth.samples.end(), [](std::uint16_t s) { return s != 0; }));
    t_reg.done(valid);

    StageTimer t_bp(rec.stages, "back_project");
    const PointCloud full = back_project(frame);
    t_bp.done(full.size());

    StageTimer t_face(rec.stages, "face_region");
    if (!cfg.face_bbox) {
        if (!in.cascade) throw NoFaceError("no cascade and no face bbox given");
        rec.detections = detect_faces(*in.cascade, to_grayscale(frame.aligned_color()), cfg.detect);
    }
    rec.face_rect = face_region(rec.detections, cfg.face_bbox);
    spdlog::debug("face region x={} y={} w={} h={} ({} detections)", rec.face_rect.x, rec.face_rect.y,
                  rec.face_rect.w, rec.face_rect.h, rec.detections.size());
    t_face.done(full.size());

    StageTimer t_crop(rec.stages, "crop");
    rec.cropped = crop_by_rect(full, rec.face_rect);
    t_crop.done(rec.cropped.size());
    if (rec.cropped.empty()) throw NoFaceError("no valid depth inside the face region");

    StageTimer t_seg(rec.stages, "cluster");
    rec.clustering = kmeans(rec.cropped.points, cfg.kmeans);
    rec.seeds = select_face_cluster(rec.cropped, rec.clustering, rec.face_rect);
    t_seg.done(rec.seeds.size());

    StageTimer t_dense(rec.stages, "densify");
    rec.dense = densify(rec.seeds, cfg.rbf);
    t_dense.done(rec.dense.cloud.size());
    spdlog::debug("avg_nn={:.6g} m r0={:.6g} m cg_iters={} residual={:.3g}", rec.dense.avg_nn, rec.dense.r0,
                  rec.dense.solver_iterations, rec.dense.relative_residual);

    rec.counts = stage_counts(rec.seeds, rec.dense.cloud);
    return rec;
}

std::string metrics_json(const Reconstruction& rec, const GroundTruth* gt) {
    json doc;
    doc["stage_counts"] = json::parse(to_json(rec.counts));
    json stages = json::array();
    for (const auto& s : rec.stages) stages.push_back({{"stage", s.name}, {"points", s.points}});
    doc["stages"] = stages;
    doc["face_rect"] = {rec.face_rect.x, rec.face_rect.y, rec.face_rect.w, rec.face_rect.h};
    doc["solver"] = {{"iterations", rec.dense.solver_iterations},
                     {"relative_residual", rec.dense.relative_residual},
                     {"avg_nn_m", rec.dense.avg_nn},
                     {"r0_m", rec.dense.r0}};
    if (gt != nullptr) doc["error_report"] = json::parse(to_json(error_report(rec.dense.cloud, *gt)));
    return doc.dump(2) + "\n";
}

IntrinsicsDoc default_intrinsics() {
    IntrinsicsDoc d;
    d.depth_intrinsics = {575.0, 319.5, 239.5, 640, 480};
    d.color_intrinsics = {525.0, 319.5, 239.5, 640, 480};
    d.rig.baseline = {0.025, 0.0, 0.0};
    return d;
}

EvalResult evaluate_scene(const SceneSpec& spec, const IntrinsicsDoc& intr, const PipelineConfig& cfg,
                          const std::optional<Cascade>& cascade) {
    const RenderedScene scene = render_scene(spec, intr.depth_intrinsics, intr.color_intrinsics, intr.rig);
    PipelineConfig run = cfg;
    if (!run.face_bbox && !cascade) {
        const auto b = face_mask_bounds(scene);
        if (!b) throw NoFaceError("the scene's face is not visible");
        const int px = (b->w + 9) / 10, py = (b->h + 9) / 10;
        const int x0 = std::max(0, b->x - px), y0 = std::max(0, b->y - py);
        const int x1 = std::min(scene.depth.width, b->x + b->w + px);
        const int y1 = std::min(scene.depth.height, b->y + b->h + py);
        run.face_bbox = PixelRect{x0, y0, x1 - x0, y1 - y0};
    }
    EvalResult out;
    out.rec = reconstruct(PipelineInputs{scene.depth, scene.color, intr, cascade}, run);
    out.errors = error_report(out.rec.dense.cloud, scene.truth);
    out.metrics = metrics_json(out.rec, &scene.truth);
    return out;
}

namespace {

std::optional<Cascade> load_cascade(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return parse_cascade(read_file(path));
}

IntrinsicsDoc load_intrinsics(const std::string& path) {
    return path.empty() ? default_intrinsics() : read_intrinsics(read_file(path));
}

template <class F>
int guarded(const char* command, F&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        spdlog::error("{}: {}", command, e.what());
        return code;
    }
}

} // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NoFaceError*>(&e)) return 2;
    if (dynamic_cast<const ParseError*>(&e)) return 3;
    if (dynamic_cast<const SolverError*>(&e)) return 4;
    return 1;
}

int run_reconstruct(const PipelineConfig& cfg) {
    return guarded("reconstruct", [&] {
        if (cfg.depth_path.empty() || cfg.color_path.empty() || cfg.intrinsics_path.empty())
            throw UsageError("--depth, --color and --intrinsics are required");
        if (cfg.out_path.empty()) throw UsageError("--out is required");
        PipelineInputs in;
        in.depth = read_depth_pgm(read_file(cfg.depth_path));
        in.color = read_color_ppm(read_file(cfg.color_path));
        in.intrinsics = read_intrinsics(read_file(cfg.intrinsics_path));
        if (!cfg.face_bbox) in.cascade = load_cascade(cfg.cascade_path);
        std::optional<GroundTruth> gt;
        if (!cfg.scene_path.empty()) gt.emplace(parse_scene_spec(read_file(cfg.scene_path)));

        const Reconstruction rec = reconstruct(in, cfg);
        write_file(cfg.out_path, write_ply(rec.dense.cloud));
        const std::string metrics = metrics_json(rec, gt ? &*gt : nullptr);
        if (!cfg.metrics_path.empty()) write_file(cfg.metrics_path, metrics);
        return 0;
    });
}

int run_synth(const std::string& scene_path, const std::string& intrinsics_path, const std::string& out_dir) {
    return guarded("synth", [&] {
        if (out_dir.empty()) throw UsageError("--out is required");
        std::string scene_text;
        SceneSpec spec;
        if (!scene_path.empty()) {
            scene_text = read_file(scene_path);
            spec = parse_scene_spec(scene_text);
        } else {
            scene_text = scene_spec_to_json(spec);
        }
        const IntrinsicsDoc intr = load_intrinsics(intrinsics_path);
        const RenderedScene scene = render_scene(spec, intr.depth_intrinsics, intr.color_intrinsics, intr.rig);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        write_file((dir / "depth.pgm").string(), write_depth_pgm(scene.depth));
        write_file((dir / "color.ppm").string(), write_color_ppm(scene.color));
        write_file((dir / "scene.json").string(), scene_text);
        if (intrinsics_path.empty()) write_file((dir / "intrinsics.json").string(), write_intrinsics(intr));
        spdlog::info("synth: wrote {}x{} frames to {}", scene.depth.width, scene.depth.height, dir.string());
        return 0;
    });
}

int run_eval(const PipelineConfig& cfg) {
    return guarded("eval", [&] {
        const SceneSpec spec = cfg.scene_path.empty() ? SceneSpec{} : parse_scene_spec(read_file(cfg.scene_path));
        const IntrinsicsDoc intr = load_intrinsics(cfg.intrinsics_path);
        const auto cascade = cfg.face_bbox ? std::nullopt : load_cascade(cfg.cascade_path);
        const EvalResult res = evaluate_scene(spec, intr, cfg, cascade);
        if (!cfg.out_path.empty()) write_file(cfg.out_path, write_ply(res.rec.dense.cloud));
        if (!cfg.metrics_path.empty()) write_file(cfg.metrics_path, res.metrics);
        std::fputs(to_table(res.rec.counts, &res.errors).c_str(), stdout);
        return 0;
    });
}

void configure_logging() {
    static const auto logger = [] {
        auto l = spdlog::stderr_color_mt("densiface");
        l->set_pattern("[%l] %v");
        spdlog::set_default_logger(l);
        return l;
    }();
    const char* env = std::getenv("DENSIFACE_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") logger->set_level(spdlog::level::err);
    else if (level == "debug") logger->set_level(spdlog::level::debug);
    else logger->set_level(spdlog::level::info);
}

} // namespace densiface
