#pragma once

#include <span>

#include "ofrseg/types.hpp"

namespace ofr {

// Softmax of logits/temperature, computed with max-subtraction so large
// logits cannot overflow. temperature must be > 0, logits finite and
// non-empty.
TemperedDistribution tempered_softmax(std::span<const double> logits,
                                      double temperature);

// Shannon entropy in nats, with 0*ln(0) taken as 0. Result lies in
// [0, ln K] for a valid distribution.
double entropy(const TemperedDistribution& dist);

// Euclidean distance between two equal-dimension summary vectors.
double l2_distance(const FrameSummaryVector& a, const FrameSummaryVector& b);
double l2_distance(std::span<const double> a, std::span<const double> b);

// Component-wise arithmetic mean over all patches of a grid.
FrameSummaryVector mean_pool(const FeatureGrid& grid);

// Cosine similarity between two patch embeddings, in double. A zero
// vector has similarity 0 with everything.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

} // namespace ofr
