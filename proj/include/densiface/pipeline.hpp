#pragma once

#include "densiface/face_detect.hpp"
#include "densiface/face_segment.hpp"
#include "densiface/io_formats.hpp"
#include "densiface/metrics.hpp"
#include "densiface/rbf_densify.hpp"
#include "densiface/synth_scene.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace densiface {

struct PipelineConfig {
    std::string depth_path;
    std::string color_path;
    std::string intrinsics_path;
    std::string cascade_path;
    std::string out_path;
    std::string metrics_path;
    std::string scene_path;
    std::optional<PixelRect> face_bbox;
    KMeansConfig kmeans;
    RbfConfig rbf;
    DetectParams detect;

    void validate() const;
};

/// Overlays the keys of a JSON config document onto cfg. Unknown keys are rejected.
void apply_config_json(PipelineConfig& cfg, std::string_view json_text);

/// Parses "x,y,w,h".
PixelRect parse_bbox(std::string_view text);

struct PipelineInputs {
    DepthFrame depth;
    ColorFrame color;
    IntrinsicsDoc intrinsics;
    std::optional<Cascade> cascade;
};

struct StageRecord {
    std::string name;
    std::size_t points = 0;
    double seconds = 0.0;
};

struct Reconstruction {
    std::vector<PixelRect> detections;
    PixelRect face_rect;
    PointCloud cropped;
    Clustering clustering;
    PointCloud seeds;
    DensifyResult dense;
    StageCounts counts;
    std::vector<StageRecord> stages;
};

/// register -> back_project -> face_region -> crop -> kmeans + select -> densify.
Reconstruction reconstruct(const PipelineInputs& in, const PipelineConfig& cfg);

/// Metrics document for a finished run; the error report is included when gt is given.
std::string metrics_json(const Reconstruction& rec, const GroundTruth* gt);

/// Calibration used by `eval` and `synth` when no intrinsics file is supplied.
IntrinsicsDoc default_intrinsics();

/// Renders the scene and reconstructs it in memory. Without a bbox or cascade the face
/// region is the rendered face mask bounds grown by 10% per side.
struct EvalResult {
    Reconstruction rec;
    ErrorReport errors;
    std::string metrics;
};
EvalResult evaluate_scene(const SceneSpec& spec, const IntrinsicsDoc& intr, const PipelineConfig& cfg,
                          const std::optional<Cascade>& cascade);

/// Subcommand entry points; they return the process exit status.
int run_reconstruct(const PipelineConfig& cfg);
int run_synth(const std::string& scene_path, const std::string& intrinsics_path, const std::string& out_dir);
int run_eval(const PipelineConfig& cfg);

/// Exit status for an exception escaping a subcommand: 2 no face, 3 parse, 4 solver, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Sets stderr verbosity from DENSIFACE_LOG (error, info, debug).
void configure_logging();

} // namespace densiface
