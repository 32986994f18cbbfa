#include "densiface/errors.hpp"
#include "densiface/pipeline.hpp"

#include "CLI11.hpp"

#include <spdlog/spdlog.h>

#include <iostream>

using namespace densiface;

namespace {

struct Flags {
    std::string config;
    std::string depth, color, intrinsics, cascade, out, metrics, scene, face_bbox, solver;
    std::optional<int> upsample;
    std::optional<double> r0_mult, mask_mult, ridge;
    std::optional<std::size_t> trees, checks;
    std::optional<std::uint64_t> seed;
};

void add_pipeline_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON file with the same keys as the flags");
    cmd->add_option("--depth", f.depth, "16-bit depth PGM (millimeters)");
    cmd->add_option("--color", f.color, "8-bit color PPM");
    cmd->add_option("--intrinsics", f.intrinsics, "camera calibration JSON");
    cmd->add_option("--cascade", f.cascade, "Haar cascade XML");
    cmd->add_option("--face-bbox", f.face_bbox, "face rectangle x,y,w,h on the depth grid; skips detection");
    cmd->add_option("--out", f.out, "output PLY");
    cmd->add_option("--metrics", f.metrics, "output metrics JSON");
    cmd->add_option("--scene", f.scene, "scene description JSON (ground truth)");
    cmd->add_option("--upsample", f.upsample, "grid points per seed spacing")->check(CLI::PositiveNumber);
    cmd->add_option("--r0-mult", f.r0_mult, "kernel width in seed spacings")->check(CLI::PositiveNumber);
    cmd->add_option("--mask-mult", f.mask_mult, "mask radius in seed spacings")->check(CLI::PositiveNumber);
    cmd->add_option("--ridge", f.ridge, "diagonal regularization")->check(CLI::NonNegativeNumber);
    cmd->add_option("--trees", f.trees, "randomized kd-trees")->check(CLI::PositiveNumber);
    cmd->add_option("--checks", f.checks, "leaf checks per approximate query")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "seed for k-means and the kd-forest");
    cmd->add_option("--solver", f.solver, "linear solver")->check(CLI::IsMember({"cg", "dense"}));
}

PipelineConfig build_config(const Flags& f) {
    PipelineConfig cfg;
    if (!f.config.empty()) apply_config_json(cfg, read_file(f.config));
    auto set = [](std::string& dst, const std::string& src) {
        if (!src.empty()) dst = src;
    };
    set(cfg.depth_path, f.depth);
    set(cfg.color_path, f.color);
    set(cfg.intrinsics_path, f.intrinsics);
    set(cfg.cascade_path, f.cascade);
    set(cfg.out_path, f.out);
    set(cfg.metrics_path, f.metrics);
    set(cfg.scene_path, f.scene);
    if (!f.face_bbox.empty()) cfg.face_bbox = parse_bbox(f.face_bbox);
    if (f.upsample) cfg.rbf.upsample = *f.upsample;
    if (f.r0_mult) cfg.rbf.r0_multiplier = *f.r0_mult;
    if (f.mask_mult) cfg.rbf.mask_multiplier = *f.mask_mult;
    if (f.ridge) cfg.rbf.ridge = *f.ridge;
    if (f.trees) cfg.rbf.color_search.trees = *f.trees;
    if (f.checks) cfg.rbf.color_search.max_checks = *f.checks;
    if (f.seed) {
        cfg.rbf.color_search.rng_seed = *f.seed;
        cfg.kmeans.rng_seed = *f.seed;
    }
    if (!f.solver.empty()) cfg.rbf.solver = parse_rbf_solver(f.solver);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Dense facial point clouds from a single RGB-D frame"};
    app.require_subcommand(1);

    Flags rf, ef;
    auto* reconstruct = app.add_subcommand("reconstruct", "depth + color frame to a dense facial PLY");
    add_pipeline_flags(reconstruct, rf);
    auto* eval = app.add_subcommand("eval", "render a synthetic scene, reconstruct it and report errors");
    add_pipeline_flags(eval, ef);

    std::string synth_scene, synth_intrinsics, synth_out;
    auto* synth = app.add_subcommand("synth", "render a synthetic RGB-D frame");
    synth->add_option("--scene", synth_scene, "scene description JSON (defaults when omitted)");
    synth->add_option("--intrinsics", synth_intrinsics, "camera calibration JSON");
    synth->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*synth) return run_synth(synth_scene, synth_intrinsics, synth_out);
        if (*reconstruct) return run_reconstruct(build_config(rf));
        return run_eval(build_config(ef));
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e);
    }
}
