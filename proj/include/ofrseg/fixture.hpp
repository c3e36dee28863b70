#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ofrseg/types.hpp"

namespace ofr {

enum class MotionRule { Static, Translate };

// Parameters of the deterministic synthetic sequence used for
// desk-scale testing. Per-class features are well-separated Gaussian
// clusters (inter-class mean distance at least 6x the intra-class
// standard deviation), so nearest-feature propagation is correct on the
// fixture by construction. Under Translate the class regions shift by
// one patch per frame and the cluster directions rotate slowly, so
// propagation error grows with temporal distance from the anchor.
struct FixtureSpec {
    std::size_t frames = 0;
    std::size_t patch_rows = 8;
    std::size_t patch_cols = 8;
    std::size_t dim = 8;
    std::size_t classes = 2;
    MotionRule motion = MotionRule::Translate;
    double noise = 0.02;
    std::size_t pixels_per_patch = 4;

    void validate() const;
};

struct FixtureData {
    std::vector<FeatureGrid> features;
    std::vector<LabelMask> masks; // ground truth, one per frame
    std::vector<std::vector<std::uint8_t>> patch_labels;
    Palette palette;
};

// Pure function of (spec, seed).
FixtureData generate_fixture_data(const FixtureSpec& spec, std::uint64_t seed);

// Writes features/, masks/ and manifest.json under out_dir and returns
// the manifest path. Identical (spec, seed) pairs produce bitwise
// identical trees.
std::filesystem::path generate_fixture(const FixtureSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir);

} // namespace ofr
