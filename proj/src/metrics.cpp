#include "ofrseg/metrics.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ofrseg/errors.hpp"

namespace ofr {

ConfusionMatrix::ConfusionMatrix(Palette palette) : palette_(std::move(palette)) {
    if (palette_.empty())
        throw ParameterError("confusion matrix needs a non-empty palette");
    for (std::size_t i = 0; i < palette_.size(); ++i) {
        for (std::size_t j = i + 1; j < palette_.size(); ++j) {
            if (palette_[i].id == palette_[j].id)
                throw ParameterError("palette has duplicate class id " +
                                     std::to_string(int(palette_[i].id)));
        }
    }
    counts_.assign(palette_.size() * palette_.size(), 0);
}

void ConfusionMatrix::accumulate(const LabelMask& pred, const LabelMask& gt) {
    if (pred.rows != gt.rows || pred.cols != gt.cols)
        throw InputError("prediction and ground truth dimensions differ");
    if (pred.palette != palette_ || gt.palette != palette_)
        throw InputError("mask palette differs from the confusion matrix palette");
    pred.validate();
    gt.validate();

    std::unordered_map<std::uint8_t, std::size_t> index;
    for (std::size_t i = 0; i < palette_.size(); ++i)
        index[palette_[i].id] = i;

    for (std::size_t p = 0; p < gt.classes.size(); ++p)
        ++counts_[index[gt.classes[p]] * palette_.size() + index[pred.classes[p]]];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.palette_ != palette_)
        throw InputError("cannot merge confusion matrices with different palettes");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

IoUReport iou_per_class(const ConfusionMatrix& cm) {
    const std::size_t n = cm.class_count();
    IoUReport report;
    report.per_class.reserve(n);

    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const std::uint64_t tp = cm.counts(c, c);
        std::uint64_t gt_row = 0, pred_col = 0;
        for (std::size_t j = 0; j < n; ++j) {
            gt_row += cm.counts(c, j);
            pred_col += cm.counts(j, c);
        }
        const std::uint64_t denom = gt_row + pred_col - tp; // TP + FP + FN

        ClassIoU entry;
        entry.id = cm.palette()[c].id;
        entry.name = cm.palette()[c].name;
        if (denom == 0) {
            report.absent_classes.push_back(entry.name);
        } else {
            entry.iou = double(tp) / double(denom);
            sum += *entry.iou;
            ++present;
        }
        report.per_class.push_back(std::move(entry));
    }
    if (present > 0)
        report.miou = sum / double(present);
    return report;
}

double aggregate_miou(std::span<const double> per_class_ious) {
    if (per_class_ious.empty())
        throw ParameterError("cannot aggregate an empty IoU list");
    double sum = 0.0;
    for (double v : per_class_ious) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ParameterError("IoU values must lie in [0, 1]");
        sum += v;
    }
    return sum / double(per_class_ious.size());
}

ImbalanceReport imbalance_report(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0)
        throw ParameterError("confusion matrix is empty");

    const std::size_t n = cm.class_count();
    ImbalanceReport report;
    report.frequencies.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::uint64_t gt_pixels = 0;
        for (std::size_t j = 0; j < n; ++j)
            gt_pixels += cm.counts(c, j);
        report.frequencies[c] = double(gt_pixels) / double(total);
        // IoU is exactly 0 iff there are no true positives; the class is
        // flagged when that happens despite ground-truth presence.
        if (gt_pixels > 0 && cm.counts(c, c) == 0)
            report.flagged_classes.push_back(cm.palette()[c].name);
    }
    return report;
}

int percent(double value) {
    return static_cast<int>(std::floor(value * 100.0 + 0.5));
}

} // namespace ofr
