#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ofrseg/selection.hpp"
#include "ofrseg/types.hpp"

namespace ofr {

// OFRD feature container, little-endian throughout:
//   "OFRD" | version u16 (=1) | Hp u32 | Wp u32 | D u32 |
//   Hp*Wp*D float32 payload, patch-major / feature-minor.
// File length is exactly 18 + 4*Hp*Wp*D bytes.
inline constexpr std::uint16_t kFeatureFileVersion = 1;

// OFRM mask container, little-endian throughout:
//   "OFRM" | version u16 (=1) | H u32 | W u32 | palette_count u16 |
//   palette entries (id u8, name length u16, UTF-8 name bytes) |
//   H*W class-id payload.
inline constexpr std::uint16_t kMaskFileVersion = 1;

FeatureGrid read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureGrid& grid, const std::filesystem::path& path);

LabelMask read_mask_file(const std::filesystem::path& path);
void write_mask_file(const LabelMask& mask, const std::filesystem::path& path);

// Optional per-sequence defaults a manifest may carry; explicit CLI
// flags take precedence over these.
struct ManifestConfig {
    std::optional<std::size_t> count;
    std::optional<double> lambda_e;
    std::optional<std::string> sign;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> top_k;
    std::optional<double> temperature;
    std::optional<std::size_t> context_length;
};

struct FrameEntry {
    std::filesystem::path feature_path;             // resolved against the manifest dir
    std::optional<std::filesystem::path> mask_path; // resolved against the manifest dir
    std::optional<double> score;
};

// Frame order in the manifest defines the frame indices used everywhere
// else (anchors files, scores files, output mask names). All referenced
// paths are checked for existence at load time.
struct Manifest {
    std::string sequence;
    Palette palette;
    std::vector<FrameEntry> frames;
    ManifestConfig config;

    std::size_t frame_count() const { return frames.size(); }
};

Manifest read_manifest(const std::filesystem::path& path);

// One "frame_index value" pair per line, '#' starts a comment; every
// frame of the sequence must be covered exactly once.
UncertaintyScores read_scores(const std::filesystem::path& path,
                              std::size_t frame_count);

} // namespace ofr
