#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ofrseg/types.hpp"

namespace ofr {

// How the per-frame uncertainty term enters the pick score:
// Promote adds lambda_e * E(i) (difficult frames favoured),
// Penalize subtracts it.
enum class UncertaintySign { Promote, Penalize };

// How the first frame is chosen when the annotated set is still empty.
enum class SeedRule { FirstFrame, GivenIndex, MaxNorm };

struct SelectionConfig {
    std::size_t count = 1;         // frames to select in total
    double lambda_e = 0.0;         // weight of the uncertainty term
    UncertaintySign sign = UncertaintySign::Promote;
    std::size_t steps = 1;         // selection rounds; scores refresh per round
    SeedRule seed_rule = SeedRule::FirstFrame;
    std::size_t seed_index = 0;    // used by SeedRule::GivenIndex
    bool normalize_features = false;

    void validate(std::size_t total_frames) const;
};

// One non-negative score per frame, same index space as the sequence.
struct UncertaintyScores {
    std::vector<double> values;

    void validate(std::size_t total_frames) const;
};

// Partition of a sequence into the annotated set and the remainder,
// carrying the incremental min-distance cache: min_distance(u) is the
// exact minimum L2 distance from frame u to any annotated frame
// (0 for annotated frames themselves).
class SelectionState {
public:
    explicit SelectionState(std::size_t total);

    // Moves `index` into the annotated set and refreshes the cache
    // against the new member. O(total * dim).
    void add(std::size_t index, std::span<const FrameSummaryVector> features);

    std::size_t total() const { return total_; }
    const std::vector<std::size_t>& annotated() const { return annotated_; }
    bool is_annotated(std::size_t index) const { return selected_[index]; }
    std::vector<std::size_t> unselected() const;
    double min_distance(std::size_t index) const { return min_dist_[index]; }

private:
    std::size_t total_;
    std::vector<std::size_t> annotated_;
    std::vector<bool> selected_;
    std::vector<double> min_dist_;
};

// Per-pick record for provenance output. The seed pick carries NaN
// scores (it is chosen by rule, not by score).
struct PickTrace {
    std::size_t frame = 0;
    std::size_t round = 0;
    bool seeded = false;
    double min_dist = 0.0;
    double uncertainty = 0.0;
    double combined = 0.0;
};

// Pure diversity sampling: greedy farthest-point selection. Each pick
// after the seed maximizes the minimum distance to the annotated set;
// ties go to the lowest frame index.
std::vector<std::size_t>
select_diverse(std::span<const FrameSummaryVector> features,
               const SelectionConfig& config,
               std::vector<PickTrace>* trace = nullptr);

// Diversity plus weighted uncertainty: each pick maximizes
// min_dist(i) + s * lambda_e * E(i), s = +1 for Promote, -1 for Penalize.
// With lambda_e = 0 the result equals select_diverse.
std::vector<std::size_t>
select_with_uncertainty(std::span<const FrameSummaryVector> features,
                        const UncertaintyScores& scores,
                        const SelectionConfig& config,
                        std::vector<PickTrace>* trace = nullptr);

using ScoresProvider =
    std::function<UncertaintyScores(const std::vector<std::size_t>& annotated)>;

// T-step schedule: the pick budget is split into config.steps rounds of
// ceil(count/steps) picks (the last round takes the remainder) and the
// scores are refreshed from the provider once per round, against the
// annotated set accumulated so far.
std::vector<std::size_t>
select_stepped(std::span<const FrameSummaryVector> features,
               const ScoresProvider& scores_provider,
               const SelectionConfig& config,
               std::vector<PickTrace>* trace = nullptr);

} // namespace ofr
