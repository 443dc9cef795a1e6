#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathrel/data.hpp"

namespace mathrel::metrics {

struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exact rational value. Kept reduced; intermediates use 128-bit arithmetic so
// macro averages over six class ratios stay exact.
class Ratio {
public:
    Ratio() = default;
    Ratio(std::int64_t num, std::int64_t den);

    Ratio operator+(const Ratio& o) const;
    Ratio operator-(const Ratio& o) const;
    Ratio operator*(const Ratio& o) const;
    Ratio operator/(const Ratio& o) const;
    bool operator==(const Ratio& o) const;

    std::int64_t num() const;
    std::int64_t den() const;
    double to_double() const;
    // exact value * 100, rendered with two decimals ("92.52")
    std::string percent() const;

private:
    __int128 num_ = 0;
    __int128 den_ = 1;
    void normalize();
};

// A metric value plus the 0/0 marker: undefined ratios are reported as 0 and
// flagged.
struct MetricValue {
    Ratio value;
    bool undefined = false;
};

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, data::kNumClasses>, data::kNumClasses> counts{};

    std::int64_t total() const;
    std::int64_t trace() const;
    std::int64_t& at(data::RelationLabel t, data::RelationLabel p);
    std::int64_t at(data::RelationLabel t, data::RelationLabel p) const;
};

struct PerClassCounts {
    data::RelationLabel label = data::RelationLabel::Addition;
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

// One-vs-rest metrics for a single class (precision, recall/sensitivity,
// specificity, error rate, F1).
struct ClassMetrics {
    PerClassCounts counts;
    MetricValue precision;
    MetricValue recall;
    MetricValue specificity;
    MetricValue error_rate;
    MetricValue f1;
};

struct MicroMetrics {
    MetricValue precision;
    MetricValue recall;
    MetricValue f1;
};

struct MacroMetrics {
    MetricValue precision;
    MetricValue recall;
    MetricValue specificity;
    MetricValue error_rate;
    MetricValue f1;
};

struct MetricsReport {
    std::array<ClassMetrics, data::kNumClasses> per_class;
    MacroMetrics macro;
    MicroMetrics micro;
    MetricValue accuracy;
    std::int64_t n = 0;
};

ConfusionMatrix build_confusion(const std::vector<data::RelationLabel>& truth,
                                const std::vector<data::RelationLabel>& predicted);

std::array<PerClassCounts, data::kNumClasses> per_class_counts(
    const ConfusionMatrix& matrix);

// Per-class ratios from one-vs-rest counts. Usable directly on externally
// provided counts (e.g. a published table) as well as on matrix-derived ones.
ClassMetrics class_metrics(const PerClassCounts& counts);

// Pooled-count micro averages.
MicroMetrics micro_from_counts(const std::array<PerClassCounts, data::kNumClasses>& counts);

MetricsReport compute_report(const ConfusionMatrix& matrix);

std::string report_to_text(const MetricsReport& report);
// machine-readable table mirroring the per-class columns plus macro/micro rows
std::string report_to_csv(const MetricsReport& report);
std::string confusion_to_csv(const ConfusionMatrix& matrix);

}  // namespace mathrel::metrics
