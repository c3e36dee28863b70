#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ofr {

// One frame's patch-feature tensor: patch_rows x patch_cols cells, each a
// dim-long embedding. Values are stored as float32 (the on-disk width);
// all arithmetic on them is done in double.
struct FeatureGrid {
    std::size_t frame_id = 0;
    std::size_t patch_rows = 0;
    std::size_t patch_cols = 0;
    std::size_t dim = 0;
    std::vector<float> data; // row-major, patch-major / feature-minor

    std::size_t patch_count() const { return patch_rows * patch_cols; }

    std::span<const float> patch(std::size_t row, std::size_t col) const {
        return {data.data() + (row * patch_cols + col) * dim, dim};
    }

    std::span<const float> patch(std::size_t flat_index) const {
        return {data.data() + flat_index * dim, dim};
    }

    // Throws InputError / ValidationError when an invariant is broken.
    void validate() const;
};

// Mean-pooled whole-frame embedding used by the selection stage.
struct FrameSummaryVector {
    std::size_t frame_id = 0;
    std::vector<double> vector;

    std::size_t dim() const { return vector.size(); }
};

struct ClassDef {
    std::uint8_t id = 0;
    std::string name;

    friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

using Palette = std::vector<ClassDef>;

// Per-pixel class-id grid plus the palette describing the ids.
struct LabelMask {
    std::size_t frame_id = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> classes; // row-major
    Palette palette;

    std::uint8_t at(std::size_t row, std::size_t col) const {
        return classes[row * cols + col];
    }

    void validate() const;
};

// Softmax output together with the temperature that produced it.
struct TemperedDistribution {
    std::vector<double> probs;
    double temperature = 1.0;

    std::size_t size() const { return probs.size(); }
};

bool palette_contains(const Palette& palette, std::uint8_t id);

} // namespace ofr
