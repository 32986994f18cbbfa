#include "densiface/synth_scene.hpp"

#include "densiface/errors.hpp"

#include <boost/math/tools/roots.hpp>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace densiface {

using nlohmann::json;

bool HoleSpec::contains(double u, double v) const {
    const double a = (u - center[0]) / radii[0];
    const double b = (v - center[1]) / radii[1];
    return a * a + b * b <= 1.0;
}

double SceneSpec::max_face_depth() const {
    const double rim = face_center[2] - face_radii[2] * std::sqrt(1.0 - cap_fraction * cap_fraction);
    return rim + std::max(0.0, eyes[0].amplitude) + std::max(0.0, eyes[1].amplitude) +
           std::max(0.0, -nose.amplitude);
}

void SceneSpec::validate() const {
    for (int i = 0; i < 3; ++i)
        if (!(face_radii[i] > 0.0)) throw ValidationError("scene: face_radii must be positive");
    for (double c : face_center)
        if (!std::isfinite(c)) throw ValidationError("scene: face_center must be finite");
    if (!(face_center[2] - face_radii[2] > 0.0))
        throw ValidationError("scene: face must lie in front of the camera");
    if (!(cap_fraction > 0.0 && cap_fraction < 1.0)) throw ValidationError("scene: cap_fraction must be in (0, 1)");
    for (const auto* b : {&nose, &eyes[0], &eyes[1]})
        if (!(b->width > 0.0) || !std::isfinite(b->amplitude))
            throw ValidationError("scene: bump widths must be positive and amplitudes finite");
    if (!(noise_sigma_mm >= 0.0)) throw ValidationError("scene: noise_sigma_mm must be non-negative");
    if (!(dropout_fraction >= 0.0 && dropout_fraction <= kMaxDropoutFraction))
        throw ValidationError("scene: dropout_fraction must be in [0, 0.95]");
    if (!(background_depth > max_face_depth()))
        throw ValidationError("scene: background_depth must exceed the face's maximum depth");
    if (background_depth * 1000.0 > 65535.0) throw ValidationError("scene: background_depth exceeds 65.535 m");
    for (const auto& h : holes)
        if (!(h.radii[0] > 0.0 && h.radii[1] > 0.0)) throw ValidationError("scene: hole radii must be positive");
}

namespace {

double bump(const GaussianBump& b, const Vec3& center, double x, double y) {
    const double dx = x - (center[0] + b.offset[0]);
    const double dy = y - (center[1] + b.offset[1]);
    return b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
}

double cap_q(const SceneSpec& s, double x, double y) {
    const double a = (x - s.face_center[0]) / s.face_radii[0];
    const double b = (y - s.face_center[1]) / s.face_radii[1];
    return a * a + b * b;
}

} // namespace

bool GroundTruth::in_support(double x, double y) const {
    return cap_q(spec_, x, y) <= spec_.cap_fraction * spec_.cap_fraction;
}

double GroundTruth::height(double x, double y) const {
    const double q = cap_q(spec_, x, y);
    const double& cz = spec_.face_center[2];
    double z = cz - spec_.face_radii[2] * std::sqrt(std::max(0.0, 1.0 - q));
    z -= bump(spec_.nose, spec_.face_center, x, y);
    z += bump(spec_.eyes[0], spec_.face_center, x, y);
    z += bump(spec_.eyes[1], spec_.face_center, x, y);
    return z;
}

std::optional<double> eval_ground_truth(const GroundTruth& gt, double x, double y) {
    if (!gt.in_support(x, y)) return std::nullopt;
    return gt.height(x, y);
}

std::optional<double> cast_ray(const GroundTruth& gt, const Vec3& origin, const Vec3& direction) {
    const SceneSpec& s = gt.spec();
    // Along the ray z = origin_z + t * dir_z; solve z(t) - height(x(t), y(t)) = 0 for t.
    auto g = [&](double t) {
        return origin[2] + t * direction[2] - gt.height(origin[0] + t * direction[0], origin[1] + t * direction[1]);
    };
    const double swing = std::abs(s.nose.amplitude) + std::abs(s.eyes[0].amplitude) + std::abs(s.eyes[1].amplitude);
    const double lo_z = s.face_center[2] - s.face_radii[2] - swing - 1e-3;
    const double hi_z = s.face_center[2] + swing + 1e-3;
    const double t_lo = (lo_z - origin[2]) / direction[2];
    const double t_hi = (hi_z - origin[2]) / direction[2];
    const double g_lo = g(t_lo);
    const double g_hi = g(t_hi);
    if (!(g_lo < 0.0 && g_hi > 0.0)) return std::nullopt;
    boost::uintmax_t max_iter = 200;
    const auto bracket = boost::math::tools::toms748_solve(g, t_lo, t_hi, g_lo, g_hi,
                                                           boost::math::tools::eps_tolerance<double>(52), max_iter);
    const double t = 0.5 * (bracket.first + bracket.second);
    const double x = origin[0] + t * direction[0];
    const double y = origin[1] + t * direction[1];
    if (!gt.in_support(x, y)) return std::nullopt;
    return origin[2] + t * direction[2];
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 pixel_rng(std::uint64_t seed, int u, int v) {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) << 32) |
                              static_cast<std::uint32_t>(u);
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ key));
}

Vec3 pixel_direction(int u, int v, const Intrinsics& intr) {
    return {(u - intr.principal_u) / intr.focal_px, (v - intr.principal_v) / intr.focal_px, 1.0};
}

} // namespace

RenderedScene render_scene(const SceneSpec& spec, const Intrinsics& depth_intr) {
    return render_scene(spec, depth_intr, depth_intr, RigExtrinsics{});
}

RenderedScene render_scene(const SceneSpec& spec, const Intrinsics& depth_intr, const Intrinsics& color_intr,
                           const RigExtrinsics& rig) {
    spec.validate();
    depth_intr.validate();
    color_intr.validate();
    rig.validate();

    RenderedScene out;
    out.truth = GroundTruth(spec);
    out.depth = DepthFrame(depth_intr.width, depth_intr.height);
    out.face_mask.assign(out.depth.samples.size(), 0);
    const Vec3 camera_origin{0.0, 0.0, 0.0};
    for (int v = 0; v < depth_intr.height; ++v) {
        for (int u = 0; u < depth_intr.width; ++u) {
            const auto hit = cast_ray(out.truth, camera_origin, pixel_direction(u, v, depth_intr));
            const double z = hit.value_or(spec.background_depth);
            out.face_mask[static_cast<std::size_t>(v) * depth_intr.width + u] = hit ? 1 : 0;

            auto rng = pixel_rng(spec.rng_seed, u, v);
            double mm = z * 1000.0;
            if (spec.noise_sigma_mm > 0.0) mm += std::normal_distribution<double>(0.0, spec.noise_sigma_mm)(rng);
            const bool dropped = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.dropout_fraction;
            bool holed = false;
            for (const auto& h : spec.holes) holed = holed || h.contains(u, v);
            const double q = std::round(mm);
            std::uint16_t sample = q < 1.0 ? 0 : static_cast<std::uint16_t>(std::min(q, 65535.0));
            if (dropped || holed) sample = 0;
            out.depth.at(u, v) = sample;
        }
    }

    out.color = ColorFrame(color_intr.width, color_intr.height, kBackgroundColor);
    const Vec3 color_origin{-rig.baseline[0], -rig.baseline[1], -rig.baseline[2]};
    for (int v = 0; v < color_intr.height; ++v)
        for (int u = 0; u < color_intr.width; ++u)
            if (cast_ray(out.truth, color_origin, pixel_direction(u, v, color_intr))) out.color.at(u, v) = kSkinColor;
    return out;
}

std::optional<PixelRect> face_mask_bounds(const RenderedScene& scene) {
    int x0 = scene.depth.width, y0 = scene.depth.height, x1 = -1, y1 = -1;
    for (int v = 0; v < scene.depth.height; ++v)
        for (int u = 0; u < scene.depth.width; ++u)
            if (scene.face_mask[static_cast<std::size_t>(v) * scene.depth.width + u]) {
                x0 = std::min(x0, u);
                y0 = std::min(y0, v);
                x1 = std::max(x1, u);
                y1 = std::max(y1, v);
            }
    if (x1 < 0) return std::nullopt;
    return PixelRect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

namespace {

template <class T>
T field(const json& obj, const char* name, T fallback) {
    const auto it = obj.find(name);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("scene: field '") + name + "' has the wrong type");
    }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError("scene: '" + where + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items())
        if (!ok.count(key)) throw ValidationError("scene: unknown field '" + key + "' in " + where);
}

GaussianBump parse_bump(const json& obj, const char* amplitude_key, GaussianBump fallback, const std::string& where) {
    check_keys(obj, {"offset", "width", amplitude_key}, where);
    GaussianBump b = fallback;
    b.offset = field(obj, "offset", b.offset);
    b.amplitude = field(obj, amplitude_key, b.amplitude);
    b.width = field(obj, "width", b.width);
    return b;
}

json bump_json(const GaussianBump& b, const char* amplitude_key) {
    return json{{"offset", b.offset}, {amplitude_key, b.amplitude}, {"width", b.width}};
}

} // namespace

SceneSpec parse_scene_spec(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene: invalid JSON: ") + e.what());
    }
    check_keys(doc,
               {"face_center", "face_radii", "cap_fraction", "nose", "eyes", "background_depth", "noise_sigma_mm",
                "dropout_fraction", "holes", "rng_seed"},
               "scene");
    SceneSpec s;
    s.face_center = field(doc, "face_center", s.face_center);
    s.face_radii = field(doc, "face_radii", s.face_radii);
    s.cap_fraction = field(doc, "cap_fraction", s.cap_fraction);
    if (doc.contains("nose")) s.nose = parse_bump(doc["nose"], "amplitude", s.nose, "nose");
    if (doc.contains("eyes")) {
        const json& eyes = doc["eyes"];
        if (!eyes.is_array() || eyes.size() != 2) throw ValidationError("scene: 'eyes' must list two entries");
        for (std::size_t i = 0; i < 2; ++i) s.eyes[i] = parse_bump(eyes[i], "depth", s.eyes[i], "eyes");
    }
    s.background_depth = field(doc, "background_depth", s.background_depth);
    s.noise_sigma_mm = field(doc, "noise_sigma_mm", s.noise_sigma_mm);
    s.dropout_fraction = field(doc, "dropout_fraction", s.dropout_fraction);
    s.rng_seed = field(doc, "rng_seed", s.rng_seed);
    if (doc.contains("holes")) {
        if (!doc["holes"].is_array()) throw ValidationError("scene: 'holes' must be an array");
        for (const auto& h : doc["holes"]) {
            check_keys(h, {"center", "radii"}, "holes");
            if (!h.contains("center") || !h.contains("radii"))
                throw ValidationError("scene: each hole needs 'center' and 'radii'");
            HoleSpec hole;
            hole.center = field(h, "center", hole.center);
            hole.radii = field(h, "radii", hole.radii);
            s.holes.push_back(hole);
        }
    }
    s.validate();
    return s;
}

std::string scene_spec_to_json(const SceneSpec& s) {
    json holes = json::array();
    for (const auto& h : s.holes) holes.push_back({{"center", h.center}, {"radii", h.radii}});
    const json doc{{"face_center", s.face_center},
                   {"face_radii", s.face_radii},
                   {"cap_fraction", s.cap_fraction},
                   {"nose", bump_json(s.nose, "amplitude")},
                   {"eyes", json::array({bump_json(s.eyes[0], "depth"), bump_json(s.eyes[1], "depth")})},
                   {"background_depth", s.background_depth},
                   {"noise_sigma_mm", s.noise_sigma_mm},
                   {"dropout_fraction", s.dropout_fraction},
                   {"holes", holes},
                   {"rng_seed", s.rng_seed}};
    return doc.dump(2) + "\n";
}

} // namespace densiface
