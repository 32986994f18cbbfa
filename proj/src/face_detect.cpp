#include "densiface/face_detect.hpp"

#include "densiface/errors.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <tuple>

namespace densiface {

namespace pt = boost::property_tree;

std::size_t Cascade::stump_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.weak_classifiers.size();
    return n;
}

void Cascade::validate() const {
    if (base_width <= 0 || base_height <= 0) throw ParseError("cascade: base window must be positive");
    if (stages.empty()) throw ParseError("cascade: no stages");
    for (std::size_t s = 0; s < stages.size(); ++s) {
        if (stages[s].weak_classifiers.empty())
            throw ParseError("cascade: stage " + std::to_string(s) + " has no weak classifiers");
        for (const auto& wc : stages[s].weak_classifiers)
            if (wc.feature_index >= features.size())
                throw ParseError("cascade: stage " + std::to_string(s) + " references missing feature " +
                                 std::to_string(wc.feature_index));
    }
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& rects = features[f].rects;
        if (rects.size() < 2 || rects.size() > 3)
            throw ParseError("cascade: feature " + std::to_string(f) + " must have 2 or 3 rects");
        for (const auto& r : rects)
            if (r.x < 0 || r.y < 0 || r.w < 0 || r.h < 0 || r.x + r.w > base_width || r.y + r.h > base_height)
                throw ParseError("cascade: feature " + std::to_string(f) + " leaves the base window");
    }
}

namespace {

std::vector<double> numbers(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw ParseError("cascade: bad number list in " + where + ": '" + text + "'");
    return out;
}

const pt::ptree& child(const pt::ptree& node, const std::string& name, const std::string& where) {
    const auto it = node.find(name);
    if (it == node.not_found()) throw ParseError("cascade: missing <" + name + "> in " + where);
    return it->second;
}

template <class T>
T scalar(const pt::ptree& node, const std::string& name, const std::string& where) {
    const auto v = numbers(child(node, name, where).data(), where + "/" + name);
    if (v.size() != 1) throw ParseError("cascade: <" + name + "> in " + where + " must hold one value");
    return static_cast<T>(v[0]);
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Children named "_" in document order (OpenCV's sequence encoding).
std::vector<const pt::ptree*> items(const pt::ptree& node) {
    std::vector<const pt::ptree*> out;
    for (const auto& [key, value] : node)
        if (key == "_") out.push_back(&value);
    return out;
}

Stage parse_stage(const pt::ptree& node, std::size_t index) {
    const std::string where = "stage " + std::to_string(index);
    Stage stage;
    stage.stage_threshold = scalar<double>(node, "stageThreshold", where);
    const auto declared = scalar<long>(node, "maxWeakCount", where);
    const auto classifiers = items(child(node, "weakClassifiers", where));
    for (std::size_t k = 0; k < classifiers.size(); ++k) {
        const std::string cwhere = where + " classifier " + std::to_string(k);
        const auto nodes = numbers(child(*classifiers[k], "internalNodes", cwhere).data(), cwhere);
        const auto leaves = numbers(child(*classifiers[k], "leafValues", cwhere).data(), cwhere);
        if (nodes.size() != 4 || leaves.size() != 2)
            throw UnsupportedFeatureError("cascade: " + cwhere + " is a tree, only stumps are supported");
        if (nodes[0] != 0.0 || nodes[1] != -1.0)
            throw UnsupportedFeatureError("cascade: " + cwhere + " has unexpected stump child links");
        if (nodes[2] < 0.0) throw ParseError("cascade: " + cwhere + " has a negative feature index");
        stage.weak_classifiers.push_back(
            {static_cast<std::size_t>(nodes[2]), nodes[3], leaves[0], leaves[1]});
    }
    if (declared != static_cast<long>(stage.weak_classifiers.size()))
        throw ParseError("cascade: " + where + " declares " + std::to_string(declared) + " weak classifiers but has " +
                         std::to_string(stage.weak_classifiers.size()));
    return stage;
}

HaarFeature parse_feature(const pt::ptree& node, std::size_t index) {
    const std::string where = "feature " + std::to_string(index);
    if (const auto tilted = node.get_optional<std::string>("tilted")) {
        const auto v = numbers(*tilted, where + "/tilted");
        if (v.size() != 1) throw ParseError("cascade: bad <tilted> in " + where);
        if (v[0] != 0.0) throw UnsupportedFeatureError("cascade: " + where + " is tilted");
    }
    HaarFeature f;
    for (const auto* r : items(child(node, "rects", where))) {
        const auto v = numbers(r->data(), where);
        if (v.size() != 5) throw ParseError("cascade: rect in " + where + " needs 'x y w h weight'");
        f.rects.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                           static_cast<int>(v[3]), v[4]});
    }
    return f;
}

} // namespace

Cascade parse_cascade(std::string_view text) {
    if (trimmed(std::string(text)).empty()) throw ParseError("cascade: empty document");
    pt::ptree doc;
    try {
        std::istringstream in{std::string(text)};
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError("cascade: malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
    }
    const auto storage = doc.get_child_optional("opencv_storage");
    if (!storage) throw ParseError("cascade: missing <opencv_storage> root");

    const pt::ptree* root = nullptr;
    for (const auto& [key, value] : *storage) {
        if (key == "<xmlcomment>") continue;
        if (value.find("stages") != value.not_found()) {
            root = &value;
            break;
        }
    }
    if (root == nullptr) throw ParseError("cascade: no element with <stages> under <opencv_storage>");

    const auto stage_type = root->get_optional<std::string>("stageType");
    const auto feature_type = root->get_optional<std::string>("featureType");
    if (!stage_type || !feature_type)
        throw UnsupportedFeatureError("cascade: old-style cascade without stageType/featureType");
    if (trimmed(*stage_type) != "BOOST")
        throw UnsupportedFeatureError("cascade: stageType '" + trimmed(*stage_type) + "' is not BOOST");
    if (trimmed(*feature_type) != "HAAR")
        throw UnsupportedFeatureError("cascade: featureType '" + trimmed(*feature_type) + "' is not HAAR");

    Cascade c;
    c.base_width = scalar<int>(*root, "width", "cascade");
    c.base_height = scalar<int>(*root, "height", "cascade");
    const auto stages = items(child(*root, "stages", "cascade"));
    for (std::size_t s = 0; s < stages.size(); ++s) c.stages.push_back(parse_stage(*stages[s], s));
    if (root->find("stageNum") != root->not_found()) {
        const auto declared = scalar<long>(*root, "stageNum", "cascade");
        if (declared != static_cast<long>(c.stages.size()))
            throw ParseError("cascade: stageNum is " + std::to_string(declared) + " but " +
                             std::to_string(c.stages.size()) + " stages are present");
    }
    const auto features = items(child(*root, "features", "cascade"));
    for (std::size_t f = 0; f < features.size(); ++f) c.features.push_back(parse_feature(*features[f], f));
    c.validate();
    return c;
}

std::string serialize_cascade(const Cascade& c) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << std::setprecision(17);
    out << "<?xml version=\"1.0\"?>\n<opencv_storage>\n<cascade type_id=\"opencv-cascade-classifier\">"
        << "<stageType>BOOST</stageType>\n  <featureType>HAAR</featureType>\n"
        << "  <height>" << c.base_height << "</height>\n  <width>" << c.base_width << "</width>\n"
        << "  <stageNum>" << c.stages.size() << "</stageNum>\n  <stages>\n";
    for (const auto& s : c.stages) {
        out << "    <_>\n      <maxWeakCount>" << s.weak_classifiers.size() << "</maxWeakCount>\n"
            << "      <stageThreshold>" << s.stage_threshold << "</stageThreshold>\n      <weakClassifiers>\n";
        for (const auto& w : s.weak_classifiers)
            out << "        <_>\n          <internalNodes>0 -1 " << w.feature_index << ' ' << w.threshold
                << "</internalNodes>\n          <leafValues>" << w.left_value << ' ' << w.right_value
                << "</leafValues></_>\n";
        out << "      </weakClassifiers></_>\n";
    }
    out << "  </stages>\n  <features>\n";
    for (const auto& f : c.features) {
        out << "    <_>\n      <rects>\n";
        for (const auto& r : f.rects)
            out << "        <_>" << r.x << ' ' << r.y << ' ' << r.w << ' ' << r.h << ' ' << r.weight << "</_>\n";
        out << "      </rects></_>\n";
    }
    out << "  </features></cascade>\n</opencv_storage>\n";
    return out.str();
}

GrayFrame to_grayscale(const ColorFrame& color) {
    GrayFrame g(color.width, color.height);
    for (std::size_t i = 0; i < color.pixels.size(); ++i) {
        const Rgb& p = color.pixels[i];
        const double y = std::round(0.299 * p.r + 0.587 * p.g + 0.114 * p.b);
        g.pixels[i] = static_cast<std::uint8_t>(std::clamp(y, 0.0, 255.0));
    }
    return g;
}

IntegralImages integral_images(const GrayFrame& gray) {
    IntegralImages ii{SummedArea(gray.width, gray.height), SummedArea(gray.width, gray.height)};
    for (int y = 0; y < gray.height; ++y) {
        std::int64_t row = 0;
        std::int64_t row_sq = 0;
        for (int x = 0; x < gray.width; ++x) {
            const std::int64_t p = gray.at(x, y);
            row += p;
            row_sq += p * p;
            ii.sum.at(x + 1, y + 1) = ii.sum.at(x + 1, y) + row;
            ii.squared.at(x + 1, y + 1) = ii.squared.at(x + 1, y) + row_sq;
        }
    }
    return ii;
}

namespace {

int scaled(double v, double scale) { return static_cast<int>(std::lround(v * scale)); }

} // namespace

bool evaluate_window(const Cascade& c, const SummedArea& sum, const SummedArea& squared, int x, int y,
                     double scale) {
    if (!(scale >= 1.0)) throw UsageError("evaluate_window: scale must be >= 1");
    const int win_w = scaled(c.base_width, scale);
    const int win_h = scaled(c.base_height, scale);
    if (x < 0 || y < 0 || x + win_w > sum.width() || y + win_h > sum.height())
        throw UsageError("evaluate_window: window leaves the frame");

    const double inv = 1.0 / (static_cast<double>(win_w) * win_h);
    const double mean = static_cast<double>(sum.rect_sum(x, y, win_w, win_h)) * inv;
    const double var = static_cast<double>(squared.rect_sum(x, y, win_w, win_h)) * inv - mean * mean;
    double var_norm = std::sqrt(std::max(var, 0.0));
    if (var_norm == 0.0) var_norm = 1.0;

    for (const auto& stage : c.stages) {
        double stage_sum = 0.0;
        for (const auto& wc : stage.weak_classifiers) {
            double value = 0.0;
            for (const auto& r : c.features[wc.feature_index].rects) {
                const int rx = std::min(scaled(r.x, scale), win_w);
                const int ry = std::min(scaled(r.y, scale), win_h);
                const int rw = std::min(scaled(r.w, scale), win_w - rx);
                const int rh = std::min(scaled(r.h, scale), win_h - ry);
                value += r.weight * static_cast<double>(sum.rect_sum(x + rx, y + ry, rw, rh));
            }
            stage_sum += inv * value < wc.threshold * var_norm ? wc.left_value : wc.right_value;
        }
        if (stage_sum < stage.stage_threshold) return false;
    }
    return true;
}

std::vector<PixelRect> group_rectangles(const std::vector<PixelRect>& rects, int min_neighbors, double eps) {
    const std::size_t n = rects.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    auto similar = [eps](const PixelRect& a, const PixelRect& b) {
        const double delta = eps * (std::min(a.w, b.w) + std::min(a.h, b.h)) * 0.5;
        return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
               std::abs(a.x + a.w - b.x - b.w) <= delta && std::abs(a.y + a.h - b.y - b.h) <= delta;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (similar(rects[i], rects[j])) parent[find(i)] = find(j);

    struct Acc {
        long long x = 0, y = 0, w = 0, h = 0;
        int count = 0;
    };
    std::vector<Acc> acc(n);
    for (std::size_t i = 0; i < n; ++i) {
        Acc& a = acc[find(i)];
        a.x += rects[i].x;
        a.y += rects[i].y;
        a.w += rects[i].w;
        a.h += rects[i].h;
        ++a.count;
    }
    std::vector<PixelRect> out;
    for (const auto& a : acc) {
        if (a.count == 0 || a.count < min_neighbors) continue;
        auto mean = [&](long long s) { return static_cast<int>(std::lround(static_cast<double>(s) / a.count)); };
        out.push_back({mean(a.x), mean(a.y), mean(a.w), mean(a.h)});
    }
    std::sort(out.begin(), out.end(), [](const PixelRect& a, const PixelRect& b) {
        if (a.area() != b.area()) return a.area() > b.area();
        return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
    });
    return out;
}

std::vector<PixelRect> detect_faces(const Cascade& c, const GrayFrame& gray, const DetectParams& params) {
    if (!(params.scale_factor > 1.0)) throw UsageError("detect_faces: scale_factor must exceed 1");
    if (params.min_neighbors < 0) throw UsageError("detect_faces: min_neighbors must be non-negative");
    const IntegralImages ii = integral_images(gray);
    std::vector<PixelRect> hits;
    for (double scale = 1.0;; scale *= params.scale_factor) {
        const int win_w = scaled(c.base_width, scale);
        const int win_h = scaled(c.base_height, scale);
        if (win_w > gray.width || win_h > gray.height) break;
        const int step = std::max(1, static_cast<int>(std::lround(scale)));
        for (int y = 0; y + win_h <= gray.height; y += step)
            for (int x = 0; x + win_w <= gray.width; x += step)
                if (evaluate_window(c, ii.sum, ii.squared, x, y, scale)) hits.push_back({x, y, win_w, win_h});
    }
    return group_rectangles(hits, params.min_neighbors, params.group_eps);
}

PixelRect face_region(const std::vector<PixelRect>& detections, const std::optional<PixelRect>& override_rect) {
    if (override_rect) return *override_rect;
    if (detections.empty()) throw NoFaceError("no face detected and no face bounding box given");
    return *std::max_element(detections.begin(), detections.end(),
                             [](const PixelRect& a, const PixelRect& b) { return a.area() < b.area(); });
}

} // namespace densiface
