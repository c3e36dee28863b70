#include "ofrseg/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ofrseg/errors.hpp"

namespace ofr {

namespace {

void append_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8)
        out.push_back(char((v >> shift) & 0xff));
}

void append_f32(std::string& out, float v) {
    append_u32(out, std::bit_cast<std::uint32_t>(v));
}

class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string path)
        : bytes_(bytes), path_(std::move(path)) {}

    std::string take(std::size_t n, const char* what) {
        require(n, what);
        std::string out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint8_t u8(const char* what) {
        require(1, what);
        return std::uint8_t(bytes_[pos_++]);
    }

    std::uint16_t u16(const char* what) {
        require(2, what);
        const auto* b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
        pos_ += 2;
        return std::uint16_t(b[0] | (b[1] << 8));
    }

    std::uint32_t u32(const char* what) {
        require(4, what);
        const auto* b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
        pos_ += 4;
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
               (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void expect_end() {
        if (pos_ != bytes_.size())
            throw CorruptionError(path_ + ": " + std::to_string(remaining()) +
                                  " trailing bytes after the payload");
    }

private:
    void require(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            throw CorruptionError(path_ + ": truncated while reading " +
                                  std::string(what));
    }

    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (!in)
        throw IoError("cannot read " + path.string());
    return std::move(buffer).str();
}

// Writers never touch the destination in place: the bytes go to a
// sibling temp file which is then renamed over the target.
void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot create " + tmp.string());
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out)
            throw IoError("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot move " + tmp.string() + " to " + path.string() +
                      ": " + ec.message());
}

} // namespace

FeatureGrid read_feature_file(const std::filesystem::path& path) {
    const std::string bytes = read_all(path);
    ByteReader r(bytes, path.string());

    if (r.take(4, "magic") != "OFRD")
        throw FormatError(path.string() + ": not an OFRD feature file");
    const std::uint16_t version = r.u16("version");
    if (version != kFeatureFileVersion)
        throw FormatError(path.string() + ": unsupported OFRD version " +
                          std::to_string(version));

    FeatureGrid grid;
    grid.patch_rows = r.u32("patch rows");
    grid.patch_cols = r.u32("patch cols");
    grid.dim = r.u32("feature dim");
    if (grid.patch_rows < 1 || grid.patch_cols < 1 || grid.dim < 1)
        throw CorruptionError(path.string() + ": zero dimension in header");
    constexpr std::size_t kMaxAxis = 1u << 20;
    if (grid.patch_rows > kMaxAxis || grid.patch_cols > kMaxAxis ||
        grid.dim > kMaxAxis)
        throw CorruptionError(path.string() + ": implausible dimension in header");

    const std::size_t count = grid.patch_rows * grid.patch_cols * grid.dim;
    if (r.remaining() != count * 4)
        throw CorruptionError(path.string() + ": payload holds " +
                              std::to_string(r.remaining()) + " bytes, header implies " +
                              std::to_string(count * 4));
    grid.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        grid.data[i] = r.f32("payload");
        if (!std::isfinite(grid.data[i]))
            throw ValidationError(path.string() + ": non-finite feature value at index " +
                                  std::to_string(i));
    }
    r.expect_end();
    return grid;
}

void write_feature_file(const FeatureGrid& grid, const std::filesystem::path& path) {
    grid.validate();
    std::string bytes;
    bytes.reserve(18 + 4 * grid.data.size());
    bytes += "OFRD";
    append_u16(bytes, kFeatureFileVersion);
    append_u32(bytes, std::uint32_t(grid.patch_rows));
    append_u32(bytes, std::uint32_t(grid.patch_cols));
    append_u32(bytes, std::uint32_t(grid.dim));
    for (float v : grid.data)
        append_f32(bytes, v);
    write_atomic(path, bytes);
}

LabelMask read_mask_file(const std::filesystem::path& path) {
    const std::string bytes = read_all(path);
    ByteReader r(bytes, path.string());

    if (r.take(4, "magic") != "OFRM")
        throw FormatError(path.string() + ": not an OFRM mask file");
    const std::uint16_t version = r.u16("version");
    if (version != kMaskFileVersion)
        throw FormatError(path.string() + ": unsupported OFRM version " +
                          std::to_string(version));

    LabelMask mask;
    mask.rows = r.u32("rows");
    mask.cols = r.u32("cols");
    const std::uint16_t palette_count = r.u16("palette count");
    if (palette_count == 0)
        throw ValidationError(path.string() + ": empty palette");
    for (std::uint16_t i = 0; i < palette_count; ++i) {
        ClassDef def;
        def.id = r.u8("palette id");
        const std::uint16_t name_len = r.u16("palette name length");
        def.name = r.take(name_len, "palette name");
        if (palette_contains(mask.palette, def.id))
            throw ValidationError(path.string() + ": duplicate palette id " +
                                  std::to_string(int(def.id)));
        mask.palette.push_back(std::move(def));
    }

    const std::size_t count = mask.rows * mask.cols;
    if (r.remaining() != count)
        throw CorruptionError(path.string() + ": payload holds " +
                              std::to_string(r.remaining()) + " bytes, header implies " +
                              std::to_string(count));
    const std::string payload = r.take(count, "payload");
    mask.classes.assign(payload.begin(), payload.end());
    r.expect_end();

    for (std::uint8_t id : mask.classes) {
        if (!palette_contains(mask.palette, id))
            throw ValidationError(path.string() + ": class id " +
                                  std::to_string(int(id)) + " not in the palette");
    }
    return mask;
}

void write_mask_file(const LabelMask& mask, const std::filesystem::path& path) {
    mask.validate();
    if (mask.palette.empty())
        throw ValidationError("mask palette is empty");
    if (mask.palette.size() > 0xffff)
        throw ValidationError("mask palette too large for the format");

    std::string bytes;
    bytes += "OFRM";
    append_u16(bytes, kMaskFileVersion);
    append_u32(bytes, std::uint32_t(mask.rows));
    append_u32(bytes, std::uint32_t(mask.cols));
    append_u16(bytes, std::uint16_t(mask.palette.size()));
    for (const ClassDef& def : mask.palette) {
        if (def.name.size() > 0xffff)
            throw ValidationError("palette name too long for the format");
        bytes.push_back(char(def.id));
        append_u16(bytes, std::uint16_t(def.name.size()));
        bytes += def.name;
    }
    bytes.append(mask.classes.begin(), mask.classes.end());
    write_atomic(path, bytes);
}

namespace {

using nlohmann::json;

const json& require_key(const json& obj, const char* key,
                        const std::filesystem::path& path) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ValidationError(path.string() + ": manifest is missing \"" +
                              key + "\"");
    return *it;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& relative,
                              const std::filesystem::path& manifest) {
    std::filesystem::path p(relative);
    if (p.is_relative())
        p = base / p;
    if (!std::filesystem::exists(p))
        throw IoError(manifest.string() + ": referenced file does not exist: " +
                      p.string());
    return p;
}

} // namespace

namespace {

Manifest parse_manifest(const json& doc, const std::filesystem::path& path) {
    if (!doc.is_object())
        throw ValidationError(path.string() + ": manifest root must be an object");

    Manifest manifest;
    manifest.sequence = require_key(doc, "sequence", path).get<std::string>();

    for (const json& entry : require_key(doc, "palette", path)) {
        ClassDef def;
        const int id = require_key(entry, "id", path).get<int>();
        if (id < 0 || id > 255)
            throw ValidationError(path.string() + ": palette id " +
                                  std::to_string(id) + " outside [0, 255]");
        def.id = std::uint8_t(id);
        def.name = require_key(entry, "name", path).get<std::string>();
        if (palette_contains(manifest.palette, def.id))
            throw ValidationError(path.string() + ": duplicate palette id " +
                                  std::to_string(id));
        manifest.palette.push_back(std::move(def));
    }
    if (manifest.palette.empty())
        throw ValidationError(path.string() + ": palette is empty");

    const std::filesystem::path base = path.parent_path();
    for (const json& entry : require_key(doc, "frames", path)) {
        FrameEntry frame;
        frame.feature_path =
            resolve(base, require_key(entry, "feature", path).get<std::string>(), path);
        if (entry.contains("mask"))
            frame.mask_path = resolve(base, entry["mask"].get<std::string>(), path);
        if (entry.contains("score")) {
            const double score = entry["score"].get<double>();
            if (!std::isfinite(score) || score < 0.0)
                throw ValidationError(path.string() +
                                      ": frame scores must be finite and >= 0");
            frame.score = score;
        }
        manifest.frames.push_back(std::move(frame));
    }
    if (manifest.frames.empty())
        throw ValidationError(path.string() + ": manifest lists no frames");

    if (doc.contains("config")) {
        const json& cfg = doc["config"];
        if (!cfg.is_object())
            throw ValidationError(path.string() + ": \"config\" must be an object");
        if (cfg.contains("count"))
            manifest.config.count = cfg["count"].get<std::size_t>();
        if (cfg.contains("lambda_e"))
            manifest.config.lambda_e = cfg["lambda_e"].get<double>();
        if (cfg.contains("sign"))
            manifest.config.sign = cfg["sign"].get<std::string>();
        if (cfg.contains("steps"))
            manifest.config.steps = cfg["steps"].get<std::size_t>();
        if (cfg.contains("top_k"))
            manifest.config.top_k = cfg["top_k"].get<std::size_t>();
        if (cfg.contains("temperature"))
            manifest.config.temperature = cfg["temperature"].get<double>();
        if (cfg.contains("context_length"))
            manifest.config.context_length = cfg["context_length"].get<std::size_t>();
    }
    return manifest;
}

} // namespace

Manifest read_manifest(const std::filesystem::path& path) {
    const std::string text = read_all(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        return parse_manifest(doc, path);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed manifest: " + e.what());
    }
}

UncertaintyScores read_scores(const std::filesystem::path& path,
                              std::size_t frame_count) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());

    UncertaintyScores scores;
    scores.values.assign(frame_count, 0.0);
    std::vector<bool> seen(frame_count, false);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::istringstream fields(line);
        std::size_t index;
        double value;
        if (!(fields >> index))
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected \"frame_index value\"");
        if (!(fields >> value))
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected \"frame_index value\"");
        std::string rest;
        if (fields >> rest)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": unexpected trailing field \"" + rest + "\"");
        if (index >= frame_count)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": frame index " + std::to_string(index) +
                                  " out of range");
        if (seen[index])
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": duplicate frame index " + std::to_string(index));
        if (!std::isfinite(value) || value < 0.0)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": scores must be finite and >= 0");
        seen[index] = true;
        scores.values[index] = value;
    }

    for (std::size_t i = 0; i < frame_count; ++i) {
        if (!seen[i])
            throw ValidationError(path.string() + ": no score for frame " +
                                  std::to_string(i) + " (all " +
                                  std::to_string(frame_count) + " frames need one)");
    }
    return scores;
}

} // namespace ofr
