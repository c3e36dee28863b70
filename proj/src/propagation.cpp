#include "ofrseg/propagation.hpp"

#include <algorithm>
#include <cmath>

#include "ofrseg/errors.hpp"
#include "ofrseg/numerics.hpp"

namespace ofr {

void PropagationConfig::validate() const {
    if (top_k < 1)
        throw ParameterError("top_k must be >= 1");
    if (!(similarity_temperature > 0.0))
        throw ParameterError("similarity temperature must be > 0");
}

SequencePlan plan_batches(std::size_t frame_count,
                          std::vector<std::size_t> anchor_indices) {
    if (anchor_indices.empty())
        throw ParameterError("at least one anchor frame is required");
    if (frame_count == 0)
        throw ParameterError("sequence has no frames");
    std::sort(anchor_indices.begin(), anchor_indices.end());
    for (std::size_t i = 0; i < anchor_indices.size(); ++i) {
        if (anchor_indices[i] >= frame_count)
            throw InputError("anchor index " + std::to_string(anchor_indices[i]) +
                             " is out of range for " + std::to_string(frame_count) +
                             " frames");
        if (i > 0 && anchor_indices[i] == anchor_indices[i - 1])
            throw InputError("duplicate anchor index " +
                             std::to_string(anchor_indices[i]));
    }

    SequencePlan plan;
    plan.frame_count = frame_count;
    plan.anchors = std::move(anchor_indices);
    plan.batches.reserve(plan.anchors.size());
    for (std::size_t i = 0; i < plan.anchors.size(); ++i) {
        BatchRange batch;
        batch.anchor = plan.anchors[i];
        batch.begin = i == 0 ? 0 : plan.anchors[i];
        batch.end = i + 1 < plan.anchors.size() ? plan.anchors[i + 1] : frame_count;
        plan.batches.push_back(batch);
    }
    return plan;
}

std::vector<std::uint8_t> downsample_mask(const LabelMask& mask,
                                          std::size_t patch_rows,
                                          std::size_t patch_cols) {
    if (patch_rows < 1 || patch_cols < 1)
        throw ParameterError("patch grid dimensions must be >= 1");
    if (patch_rows > mask.rows || patch_cols > mask.cols)
        throw ParameterError("patch grid exceeds mask dimensions");

    // Per-patch class histogram, then majority with ties toward the
    // lowest class id.
    std::vector<std::uint32_t> hist(patch_rows * patch_cols * 256, 0);
    for (std::size_t r = 0; r < mask.rows; ++r) {
        const std::size_t pr = r * patch_rows / mask.rows;
        for (std::size_t c = 0; c < mask.cols; ++c) {
            const std::size_t pc = c * patch_cols / mask.cols;
            ++hist[(pr * patch_cols + pc) * 256 + mask.at(r, c)];
        }
    }

    std::vector<std::uint8_t> labels(patch_rows * patch_cols, 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        std::uint32_t best_count = 0;
        std::uint8_t best_id = 0;
        for (std::size_t id = 0; id < 256; ++id) {
            const std::uint32_t count = hist[p * 256 + id];
            if (count > best_count) {
                best_count = count;
                best_id = static_cast<std::uint8_t>(id);
            }
        }
        labels[p] = best_id;
    }
    return labels;
}

LabelMask upsample_labels(std::span<const std::uint8_t> patch_labels,
                          std::size_t patch_rows, std::size_t patch_cols,
                          std::size_t rows, std::size_t cols,
                          const Palette& palette, std::size_t frame_id) {
    if (patch_labels.size() != patch_rows * patch_cols)
        throw InputError("patch label grid length does not match its dimensions");
    if (rows < patch_rows || cols < patch_cols)
        throw ParameterError("pixel grid smaller than patch grid");

    LabelMask mask;
    mask.frame_id = frame_id;
    mask.rows = rows;
    mask.cols = cols;
    mask.palette = palette;
    mask.classes.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t pr = r * patch_rows / rows;
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t pc = c * patch_cols / cols;
            mask.classes[r * cols + c] = patch_labels[pr * patch_cols + pc];
        }
    }
    return mask;
}

namespace {

struct Candidate {
    double similarity;
    std::size_t ordinal; // position in the deterministic enumeration order
    std::uint8_t label;
};

void gather_candidates(const FeatureGrid& target, std::size_t row, std::size_t col,
                       std::span<const ContextFrame> context,
                       std::optional<std::size_t> radius,
                       std::vector<Candidate>& out) {
    out.clear();
    std::size_t ordinal = 0;
    const auto query = target.patch(row, col);
    for (const ContextFrame& frame : context) {
        for (std::size_t qr = 0; qr < target.patch_rows; ++qr) {
            for (std::size_t qc = 0; qc < target.patch_cols; ++qc, ++ordinal) {
                if (radius) {
                    const std::size_t dr = qr > row ? qr - row : row - qr;
                    const std::size_t dc = qc > col ? qc - col : col - qc;
                    if (dr > *radius || dc > *radius)
                        continue;
                }
                const std::size_t q = qr * target.patch_cols + qc;
                out.push_back({cosine_similarity(query, frame.features->patch(q)),
                               ordinal, (*frame.labels)[q]});
            }
        }
    }
}

} // namespace

PatchPropagation propagate_frame(const FeatureGrid& target,
                                 std::span<const ContextFrame> context,
                                 std::size_t num_classes,
                                 const PropagationConfig& config) {
    config.validate();
    if (context.empty())
        throw InputError("propagation context is empty");
    if (num_classes < 1)
        throw ParameterError("num_classes must be >= 1");
    target.validate();
    for (const ContextFrame& frame : context) {
        frame.features->validate();
        if (frame.features->patch_rows != target.patch_rows ||
            frame.features->patch_cols != target.patch_cols ||
            frame.features->dim != target.dim)
            throw InputError("context frame shape differs from the target frame");
        if (frame.labels->size() != target.patch_count())
            throw InputError("context label grid length does not match the patch grid");
        for (std::uint8_t id : *frame.labels) {
            if (id >= num_classes)
                throw InputError("context label " + std::to_string(int(id)) +
                                 " is outside the class range");
        }
    }

    PatchPropagation result;
    result.patch_rows = target.patch_rows;
    result.patch_cols = target.patch_cols;
    result.num_classes = num_classes;
    result.labels.resize(target.patch_count());
    result.scores.assign(target.patch_count() * num_classes, 0.0);

    std::vector<Candidate> candidates;
    std::vector<double> top_sims;
    for (std::size_t r = 0; r < target.patch_rows; ++r) {
        for (std::size_t c = 0; c < target.patch_cols; ++c) {
            gather_candidates(target, r, c, context, config.spatial_radius, candidates);
            if (candidates.empty() && config.spatial_radius)
                gather_candidates(target, r, c, context, std::nullopt, candidates);

            const std::size_t k = std::min<std::size_t>(config.top_k, candidates.size());
            std::partial_sort(candidates.begin(), candidates.begin() + k,
                              candidates.end(),
                              [](const Candidate& a, const Candidate& b) {
                                  if (a.similarity != b.similarity)
                                      return a.similarity > b.similarity;
                                  return a.ordinal < b.ordinal;
                              });

            top_sims.clear();
            for (std::size_t i = 0; i < k; ++i)
                top_sims.push_back(candidates[i].similarity);
            const TemperedDistribution weights =
                tempered_softmax(top_sims, config.similarity_temperature);

            const std::size_t p = r * target.patch_cols + c;
            double* score = result.scores.data() + p * num_classes;
            for (std::size_t i = 0; i < k; ++i)
                score[candidates[i].label] += weights.probs[i];

            std::uint8_t best = 0;
            double best_score = score[0];
            for (std::size_t id = 1; id < num_classes; ++id) {
                if (score[id] > best_score) {
                    best_score = score[id];
                    best = static_cast<std::uint8_t>(id);
                }
            }
            result.labels[p] = best;
        }
    }
    return result;
}

namespace {

// Context for one step: the batch anchor first, then the tail of the
// propagated history (window frames, farthest first).
std::vector<ContextFrame>
make_context(const ContextFrame& anchor,
             const std::vector<std::pair<std::size_t, std::vector<std::uint8_t>>>& history,
             std::span<const FeatureGrid> features, std::size_t window) {
    std::vector<ContextFrame> context;
    context.push_back(anchor);
    const std::size_t take = std::min(window, history.size());
    for (std::size_t i = history.size() - take; i < history.size(); ++i)
        context.push_back({&features[history[i].first], &history[i].second});
    return context;
}

} // namespace

std::vector<LabelMask> propagate_sequence(std::span<const FeatureGrid> features,
                                          const SequencePlan& plan,
                                          std::span<const LabelMask> anchor_masks,
                                          const PropagationConfig& config) {
    config.validate();
    if (plan.frame_count != features.size())
        throw InputError("plan covers " + std::to_string(plan.frame_count) +
                         " frames but " + std::to_string(features.size()) +
                         " feature grids were given");
    if (anchor_masks.size() != plan.anchors.size())
        throw InputError("expected " + std::to_string(plan.anchors.size()) +
                         " anchor masks, got " + std::to_string(anchor_masks.size()));
    if (plan.batches.empty())
        throw InputError("plan has no batches");

    std::size_t num_classes = 1;
    for (const LabelMask& mask : anchor_masks) {
        mask.validate();
        if (mask.rows != anchor_masks[0].rows || mask.cols != anchor_masks[0].cols)
            throw InputError("anchor masks have inconsistent pixel dimensions");
        for (const ClassDef& c : mask.palette)
            num_classes = std::max<std::size_t>(num_classes, std::size_t(c.id) + 1);
    }

    const std::size_t patch_rows = features.empty() ? 0 : features[0].patch_rows;
    const std::size_t patch_cols = features.empty() ? 0 : features[0].patch_cols;
    const std::size_t rows = anchor_masks[0].rows;
    const std::size_t cols = anchor_masks[0].cols;

    std::vector<LabelMask> output(plan.frame_count);
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
        const BatchRange& batch = plan.batches[b];
        const LabelMask& anchor_mask = anchor_masks[b];
        const std::vector<std::uint8_t> anchor_labels =
            downsample_mask(anchor_mask, patch_rows, patch_cols);
        const ContextFrame anchor{&features[batch.anchor], &anchor_labels};

        output[batch.anchor] = anchor_mask;

        std::vector<std::pair<std::size_t, std::vector<std::uint8_t>>> history;
        for (std::size_t t = batch.anchor + 1; t < batch.end; ++t) {
            const auto context =
                make_context(anchor, history, features, config.context_length);
            PatchPropagation step =
                propagate_frame(features[t], context, num_classes, config);
            output[t] = upsample_labels(step.labels, patch_rows, patch_cols, rows,
                                        cols, anchor_mask.palette, t);
            history.emplace_back(t, std::move(step.labels));
        }

        // Frames before the first anchor are filled backward from it.
        history.clear();
        for (std::size_t t = batch.anchor; t-- > batch.begin;) {
            const auto context =
                make_context(anchor, history, features, config.context_length);
            PatchPropagation step =
                propagate_frame(features[t], context, num_classes, config);
            output[t] = upsample_labels(step.labels, patch_rows, patch_cols, rows,
                                        cols, anchor_mask.palette, t);
            history.emplace_back(t, std::move(step.labels));
        }
    }
    return output;
}

} // namespace ofr
