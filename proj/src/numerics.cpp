#include "ofrseg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ofrseg/errors.hpp"

namespace ofr {

void FeatureGrid::validate() const {
    if (patch_rows < 1 || patch_cols < 1 || dim < 1)
        throw InputError("feature grid dimensions must all be >= 1");
    if (data.size() != patch_rows * patch_cols * dim)
        throw InputError("feature grid data length does not match its dimensions");
    for (float v : data) {
        if (!std::isfinite(v))
            throw ValidationError("feature grid contains a non-finite value");
    }
}

void LabelMask::validate() const {
    if (rows * cols != classes.size())
        throw InputError("label mask grid length does not match rows*cols");
    for (std::uint8_t id : classes) {
        if (!palette_contains(palette, id))
            throw ValidationError("label mask contains class id " +
                                  std::to_string(int(id)) + " absent from its palette");
    }
}

bool palette_contains(const Palette& palette, std::uint8_t id) {
    return std::any_of(palette.begin(), palette.end(),
                       [id](const ClassDef& c) { return c.id == id; });
}

TemperedDistribution tempered_softmax(std::span<const double> logits,
                                      double temperature) {
    if (!(temperature > 0.0))
        throw ParameterError("softmax temperature must be > 0");
    if (logits.empty())
        throw ParameterError("softmax needs at least one logit");
    for (double l : logits) {
        if (!std::isfinite(l))
            throw InputError("softmax logit is not finite");
    }

    const double max_logit = *std::max_element(logits.begin(), logits.end());

    TemperedDistribution out;
    out.temperature = temperature;
    out.probs.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double e = std::exp((logits[i] - max_logit) / temperature);
        out.probs[i] = e;
        sum += e;
    }
    for (double& p : out.probs)
        p /= sum;
    return out;
}

double entropy(const TemperedDistribution& dist) {
    double h = 0.0;
    for (double p : dist.probs) {
        if (p > 0.0)
            h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw InputError("l2_distance dimension mismatch: " +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double l2_distance(const FrameSummaryVector& a, const FrameSummaryVector& b) {
    return l2_distance(std::span<const double>(a.vector),
                       std::span<const double>(b.vector));
}

FrameSummaryVector mean_pool(const FeatureGrid& grid) {
    grid.validate();
    FrameSummaryVector out;
    out.frame_id = grid.frame_id;
    out.vector.assign(grid.dim, 0.0);
    const std::size_t patches = grid.patch_count();
    for (std::size_t p = 0; p < patches; ++p) {
        const auto v = grid.patch(p);
        for (std::size_t d = 0; d < grid.dim; ++d)
            out.vector[d] += v[d];
    }
    for (double& c : out.vector)
        c /= double(patches);
    return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw InputError("cosine_similarity dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace ofr
