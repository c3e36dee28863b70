#include "ofrseg/selection.hpp"

#include <cmath>
#include <limits>

#include "ofrseg/errors.hpp"
#include "ofrseg/numerics.hpp"

namespace ofr {

void SelectionConfig::validate(std::size_t total_frames) const {
    if (total_frames == 0)
        throw ParameterError("selection needs at least one frame");
    if (count < 1)
        throw ParameterError("selection count must be >= 1");
    if (count > total_frames)
        throw ParameterError("selection count " + std::to_string(count) +
                             " exceeds frame count " + std::to_string(total_frames));
    if (steps < 1 || steps > count)
        throw ParameterError("selection steps must satisfy 1 <= steps <= count");
    if (!(lambda_e >= 0.0) || !std::isfinite(lambda_e))
        throw ParameterError("lambda_e must be finite and >= 0");
    if (seed_rule == SeedRule::GivenIndex && seed_index >= total_frames)
        throw ParameterError("seed index " + std::to_string(seed_index) +
                             " is out of range");
}

void UncertaintyScores::validate(std::size_t total_frames) const {
    if (values.size() != total_frames)
        throw InputError("uncertainty scores cover " + std::to_string(values.size()) +
                         " frames, sequence has " + std::to_string(total_frames));
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("uncertainty scores must be finite and >= 0");
    }
}

SelectionState::SelectionState(std::size_t total)
    : total_(total),
      selected_(total, false),
      min_dist_(total, std::numeric_limits<double>::infinity()) {}

void SelectionState::add(std::size_t index,
                         std::span<const FrameSummaryVector> features) {
    if (index >= total_)
        throw InputError("selection index out of range");
    if (selected_[index])
        throw InputError("frame " + std::to_string(index) + " already annotated");
    annotated_.push_back(index);
    selected_[index] = true;
    const FrameSummaryVector& anchor = features[index];
    for (std::size_t u = 0; u < total_; ++u) {
        const double d = l2_distance(features[u], anchor);
        if (d < min_dist_[u])
            min_dist_[u] = d;
    }
}

std::vector<std::size_t> SelectionState::unselected() const {
    std::vector<std::size_t> out;
    out.reserve(total_ - annotated_.size());
    for (std::size_t u = 0; u < total_; ++u) {
        if (!selected_[u])
            out.push_back(u);
    }
    return out;
}

namespace {

std::vector<FrameSummaryVector>
prepare_features(std::span<const FrameSummaryVector> features, bool normalize) {
    if (features.empty())
        throw ParameterError("selection needs at least one frame");
    const std::size_t dim = features[0].dim();
    for (const auto& f : features) {
        if (f.dim() != dim)
            throw InputError("frame summaries have mismatched dimensions");
    }
    std::vector<FrameSummaryVector> out(features.begin(), features.end());
    if (normalize) {
        for (auto& f : out) {
            double norm = 0.0;
            for (double c : f.vector)
                norm += c * c;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (double& c : f.vector)
                    c /= norm;
            }
        }
    }
    return out;
}

// Seed rules operate on the raw summaries so MaxNorm stays meaningful
// when normalize_features is on.
std::size_t pick_seed(std::span<const FrameSummaryVector> raw,
                      const SelectionConfig& config) {
    switch (config.seed_rule) {
    case SeedRule::FirstFrame:
        return 0;
    case SeedRule::GivenIndex:
        return config.seed_index;
    case SeedRule::MaxNorm: {
        std::size_t best = 0;
        double best_norm = -1.0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            double norm = 0.0;
            for (double c : raw[i].vector)
                norm += c * c;
            if (norm > best_norm) {
                best_norm = norm;
                best = i;
            }
        }
        return best;
    }
    }
    throw ParameterError("unknown seed rule");
}

// Core greedy loop shared by all three entry points. `provider` is
// consulted once per round; a null provider means all-zero scores.
std::vector<std::size_t>
run_selection(std::span<const FrameSummaryVector> features,
              const ScoresProvider* provider,
              const SelectionConfig& config,
              std::vector<PickTrace>* trace) {
    config.validate(features.size());
    const std::vector<FrameSummaryVector> prepared =
        prepare_features(features, config.normalize_features);

    const double sign = config.sign == UncertaintySign::Promote ? 1.0 : -1.0;
    const std::size_t n = prepared.size();
    const std::size_t per_round = (config.count + config.steps - 1) / config.steps;

    SelectionState state(n);
    for (std::size_t round = 0; round < config.steps; ++round) {
        const std::size_t remaining = config.count - state.annotated().size();
        const std::size_t take = std::min(per_round, remaining);
        if (take == 0)
            break;

        std::vector<double> scores(n, 0.0);
        if (provider && *provider) {
            UncertaintyScores fresh = (*provider)(state.annotated());
            fresh.validate(n);
            scores = std::move(fresh.values);
        }

        for (std::size_t k = 0; k < take; ++k) {
            std::size_t pick;
            PickTrace entry;
            entry.round = round;
            if (state.annotated().empty()) {
                pick = pick_seed(features, config);
                entry.seeded = true;
                entry.min_dist = std::numeric_limits<double>::quiet_NaN();
                entry.uncertainty = std::numeric_limits<double>::quiet_NaN();
                entry.combined = std::numeric_limits<double>::quiet_NaN();
            } else {
                bool found = false;
                std::size_t best = 0;
                double best_score = -std::numeric_limits<double>::infinity();
                for (std::size_t u = 0; u < n; ++u) {
                    if (state.is_annotated(u))
                        continue;
                    const double combined =
                        state.min_distance(u) + sign * config.lambda_e * scores[u];
                    if (!found || combined > best_score) {
                        found = true;
                        best = u;
                        best_score = combined;
                    }
                }
                pick = best;
                entry.min_dist = state.min_distance(pick);
                entry.uncertainty = scores[pick];
                entry.combined = best_score;
            }
            entry.frame = pick;
            state.add(pick, prepared);
            if (trace)
                trace->push_back(entry);
        }
    }
    return state.annotated();
}

} // namespace

std::vector<std::size_t>
select_diverse(std::span<const FrameSummaryVector> features,
               const SelectionConfig& config,
               std::vector<PickTrace>* trace) {
    SelectionConfig pure = config;
    pure.lambda_e = 0.0;
    pure.steps = 1;
    return run_selection(features, nullptr, pure, trace);
}

std::vector<std::size_t>
select_with_uncertainty(std::span<const FrameSummaryVector> features,
                        const UncertaintyScores& scores,
                        const SelectionConfig& config,
                        std::vector<PickTrace>* trace) {
    scores.validate(features.size());
    SelectionConfig single = config;
    single.steps = 1;
    ScoresProvider constant = [&scores](const std::vector<std::size_t>&) {
        return scores;
    };
    return run_selection(features, &constant, single, trace);
}

std::vector<std::size_t>
select_stepped(std::span<const FrameSummaryVector> features,
               const ScoresProvider& scores_provider,
               const SelectionConfig& config,
               std::vector<PickTrace>* trace) {
    return run_selection(features, &scores_provider, config, trace);
}

} // namespace ofr
