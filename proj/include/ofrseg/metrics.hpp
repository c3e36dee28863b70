#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ofrseg/types.hpp"

namespace ofr {

// C x C pixel-count accumulator: counts(g, p) is the number of pixels
// with ground-truth class g predicted as class p, indexed by palette
// position. Accumulation is plain addition, so frame order never
// matters and per-worker matrices can be merged element-wise.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(Palette palette);

    // Adds one pred/gt mask pair. Validates everything before touching
    // the counts, so a throw leaves the matrix unchanged.
    void accumulate(const LabelMask& pred, const LabelMask& gt);

    void merge(const ConfusionMatrix& other);

    const Palette& palette() const { return palette_; }
    std::size_t class_count() const { return palette_.size(); }
    std::uint64_t counts(std::size_t gt_index, std::size_t pred_index) const {
        return counts_[gt_index * palette_.size() + pred_index];
    }
    std::uint64_t total() const;

private:
    Palette palette_;
    std::vector<std::uint64_t> counts_;
};

struct ClassIoU {
    std::uint8_t id = 0;
    std::string name;
    std::optional<double> iou; // absent when TP+FP+FN == 0
};

struct IoUReport {
    std::vector<ClassIoU> per_class;
    std::optional<double> miou; // mean over present classes
    std::vector<std::string> absent_classes;
};

struct ImbalanceReport {
    // Ground-truth pixel share per class, aligned with the palette;
    // sums to 1.
    std::vector<double> frequencies;
    // Classes present in the ground truth but with IoU exactly 0.
    std::vector<std::string> flagged_classes;
};

// Per-class IoU_c = TP_c / (TP_c + FP_c + FN_c); zero-denominator
// classes are reported absent and excluded from the mean.
IoUReport iou_per_class(const ConfusionMatrix& cm);

// Arithmetic mean of per-class IoU values in [0, 1].
double aggregate_miou(std::span<const double> per_class_ious);

ImbalanceReport imbalance_report(const ConfusionMatrix& cm);

// Rounds a [0, 1] value to integer percent, half away from zero: the
// rendering rule for text reports. Raw values stay at full precision.
int percent(double value);

} // namespace ofr
