#include "densiface/io_formats.hpp"

#include "densiface/errors.hpp"

#include "json.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace densiface {

namespace {

struct NetpbmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t payload_offset = 0;
};

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(what + " at byte offset " + std::to_string(pos_));
    }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    int number(const char* field) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) {
            pos_ = start;
            fail(std::string("expected ") + field);
        }
        int value = 0;
        const auto [ptr, ec] = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, value);
        if (ec != std::errc{} || ptr != bytes_.data() + pos_) {
            pos_ = start;
            fail(std::string(field) + " out of range");
        }
        return value;
    }

    NetpbmHeader read(std::string_view magic, int required_maxval) {
        if (bytes_.substr(0, 2) != magic) fail("expected magic " + std::string(magic));
        pos_ = 2;
        NetpbmHeader h;
        h.width = number("width");
        h.height = number("height");
        const std::size_t maxval_pos = pos_;
        h.maxval = number("maxval");
        if (h.maxval != required_maxval) {
            pos_ = maxval_pos;
            skip_space_and_comments();
            fail("maxval must be " + std::to_string(required_maxval) + ", got " + std::to_string(h.maxval));
        }
        if (h.width <= 0 || h.height <= 0) fail("image dimensions must be positive");
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            fail("expected a single whitespace before the payload");
        h.payload_offset = ++pos_;
        return h;
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void check_payload(std::string_view bytes, const NetpbmHeader& h, std::size_t bytes_per_pixel) {
    const std::size_t expected = static_cast<std::size_t>(h.width) * h.height * bytes_per_pixel;
    const std::size_t available = bytes.size() - h.payload_offset;
    if (available < expected)
        throw ParseError("truncated payload: expected " + std::to_string(expected) + " bytes, file ends at byte offset " +
                         std::to_string(bytes.size()));
    if (available > expected)
        throw ParseError("trailing data after payload at byte offset " + std::to_string(h.payload_offset + expected));
}

std::string header(const char* magic, int w, int h, int maxval) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) +
           "\n";
}

using nlohmann::json;

const json& field(const json& obj, const std::string& name, const std::string& path) {
    const auto it = obj.find(name);
    if (it == obj.end()) throw ValidationError("intrinsics: missing field '" + path + name + "'");
    return *it;
}

double number_field(const json& obj, const std::string& name, const std::string& path) {
    const json& v = field(obj, name, path);
    if (!v.is_number()) throw ValidationError("intrinsics: field '" + path + name + "' must be a number");
    return v.get<double>();
}

int integer_field(const json& obj, const std::string& name, const std::string& path) {
    const json& v = field(obj, name, path);
    if (!v.is_number_integer()) throw ValidationError("intrinsics: field '" + path + name + "' must be an integer");
    return v.get<int>();
}

Intrinsics parse_camera(const json& doc, const std::string& name) {
    const json& cam = field(doc, name, "");
    if (!cam.is_object()) throw ValidationError("intrinsics: field '" + name + "' must be an object");
    const std::string path = name + ".";
    Intrinsics intr;
    intr.focal_px = number_field(cam, "focal_px", path);
    intr.principal_u = number_field(cam, "principal_u", path);
    intr.principal_v = number_field(cam, "principal_v", path);
    intr.width = integer_field(cam, "width", path);
    intr.height = integer_field(cam, "height", path);
    try {
        intr.validate();
    } catch (const ConfigError& e) {
        throw ValidationError(name + ": " + e.what());
    }
    return intr;
}

json camera_json(const Intrinsics& intr) {
    return {{"focal_px", intr.focal_px},
            {"principal_u", intr.principal_u},
            {"principal_v", intr.principal_v},
            {"width", intr.width},
            {"height", intr.height}};
}

} // namespace

DepthFrame read_depth_pgm(std::string_view bytes) {
    const NetpbmHeader h = HeaderReader(bytes).read("P5", 65535);
    check_payload(bytes, h, 2);
    DepthFrame frame(h.width, h.height);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
    for (std::size_t i = 0; i < frame.samples.size(); ++i)
        frame.samples[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    return frame;
}

std::string write_depth_pgm(const DepthFrame& frame) {
    frame.validate();
    std::string out = header("P5", frame.width, frame.height, 65535);
    out.reserve(out.size() + frame.samples.size() * 2);
    for (std::uint16_t s : frame.samples) {
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xFF));
    }
    return out;
}

ColorFrame read_color_ppm(std::string_view bytes) {
    const NetpbmHeader h = HeaderReader(bytes).read("P6", 255);
    check_payload(bytes, h, 3);
    ColorFrame frame(h.width, h.height);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) frame.pixels[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    return frame;
}

std::string write_color_ppm(const ColorFrame& frame) {
    frame.validate();
    std::string out = header("P6", frame.width, frame.height, 255);
    out.reserve(out.size() + frame.pixels.size() * 3);
    for (const Rgb& c : frame.pixels) {
        out.push_back(static_cast<char>(c.r));
        out.push_back(static_cast<char>(c.g));
        out.push_back(static_cast<char>(c.b));
    }
    return out;
}

IntrinsicsDoc read_intrinsics(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("intrinsics: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("intrinsics: document must be a JSON object");
    IntrinsicsDoc out;
    out.depth_intrinsics = parse_camera(doc, "depth_intrinsics");
    out.color_intrinsics = parse_camera(doc, "color_intrinsics");
    const json& b = field(doc, "baseline", "");
    if (!b.is_array() || b.size() != 3)
        throw ValidationError("intrinsics: field 'baseline' must be an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
        if (!b[i].is_number()) throw ValidationError("intrinsics: field 'baseline' must be an array of 3 numbers");
        out.rig.baseline[i] = b[i].get<double>();
    }
    try {
        out.rig.validate();
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    }
    return out;
}

std::string write_intrinsics(const IntrinsicsDoc& doc) {
    json j{{"depth_intrinsics", camera_json(doc.depth_intrinsics)},
           {"color_intrinsics", camera_json(doc.color_intrinsics)},
           {"baseline", doc.rig.baseline}};
    return j.dump(2) + "\n";
}

std::string write_ply(const PointCloud& cloud) {
    cloud.validate();
    std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                      "\nproperty float x\nproperty float y\nproperty float z\n"
                      "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    char line[160];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        const auto& c = cloud.colors[i];
        const int n = std::snprintf(line, sizeof line, "%.6f %.6f %.6f %u %u %u\n", p[0], p[1], p[2], unsigned{c.r},
                                    unsigned{c.g}, unsigned{c.b});
        out.append(line, static_cast<std::size_t>(n));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError("failed writing " + path);
}

} // namespace densiface
