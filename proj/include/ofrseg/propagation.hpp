#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ofrseg/types.hpp"

namespace ofr {

// Contiguous frame range [begin, end) served by one anchor frame.
struct BatchRange {
    std::size_t anchor = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Partition of a sequence into per-anchor batches. A batch runs from
// its anchor up to (not including) the next anchor; frames before the
// first anchor belong to the first batch.
struct SequencePlan {
    std::size_t frame_count = 0;
    std::vector<std::size_t> anchors; // sorted ascending
    std::vector<BatchRange> batches;  // one per anchor, in order
};

struct PropagationConfig {
    std::size_t top_k = 5;
    double similarity_temperature = 0.1;
    std::size_t context_length = 3;   // propagated frames kept besides the anchor
    std::optional<std::size_t> spatial_radius; // patch-grid box radius; nullopt = unlimited

    void validate() const;
};

SequencePlan plan_batches(std::size_t frame_count,
                          std::vector<std::size_t> anchor_indices);

// Pixel mask -> patch-level label grid by per-block majority vote,
// ties toward the lowest class id. Pixel (r, c) belongs to patch
// (r*patch_rows/rows, c*patch_cols/cols).
std::vector<std::uint8_t> downsample_mask(const LabelMask& mask,
                                          std::size_t patch_rows,
                                          std::size_t patch_cols);

// Patch label grid -> pixel mask by the inverse of the block map above
// (nearest rule). Exact round-trip on block-constant masks.
LabelMask upsample_labels(std::span<const std::uint8_t> patch_labels,
                          std::size_t patch_rows, std::size_t patch_cols,
                          std::size_t rows, std::size_t cols,
                          const Palette& palette, std::size_t frame_id);

// One reference frame: its features plus patch-level labels.
struct ContextFrame {
    const FeatureGrid* features = nullptr;
    const std::vector<std::uint8_t>* labels = nullptr;
};

// Per-patch result: hard labels plus the class score distribution the
// soft vote produced (row-major patches, num_classes scores per patch).
struct PatchPropagation {
    std::size_t patch_rows = 0;
    std::size_t patch_cols = 0;
    std::size_t num_classes = 0;
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;

    std::span<const double> patch_scores(std::size_t flat_index) const {
        return {scores.data() + flat_index * num_classes, num_classes};
    }
};

// Labels each target patch by a tempered-softmax-weighted vote over its
// top_k most cosine-similar context patches (within spatial_radius when
// set). Class-score ties go to the lowest class id.
PatchPropagation propagate_frame(const FeatureGrid& target,
                                 std::span<const ContextFrame> context,
                                 std::size_t num_classes,
                                 const PropagationConfig& config);

// Runs every batch of the plan: the anchor mask is emitted verbatim,
// the other frames are labelled in temporal order away from the anchor,
// each seeing the anchor plus up to context_length most recently
// propagated frames. anchor_masks[i] annotates plan.anchors[i].
std::vector<LabelMask> propagate_sequence(std::span<const FeatureGrid> features,
                                          const SequencePlan& plan,
                                          std::span<const LabelMask> anchor_masks,
                                          const PropagationConfig& config);

} // namespace ofr
