#include "mathrel/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace mathrel::metrics {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

std::int64_t narrow(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN) {
        throw std::overflow_error("rational value out of int64 range");
    }
    return static_cast<std::int64_t>(v);
}

Ratio make_counts_ratio(std::int64_t num, std::int64_t den, MetricValue& out) {
    if (den == 0) {
        out.undefined = true;
        return Ratio(0, 1);
    }
    return Ratio(num, den);
}

// num/den as a metric value with the 0/0 -> 0 (flagged) convention
MetricValue metric_ratio(std::int64_t num, std::int64_t den) {
    MetricValue v;
    v.value = make_counts_ratio(num, den, v);
    return v;
}

MetricValue mean6(const std::array<MetricValue, data::kNumClasses>& vs) {
    MetricValue out;
    Ratio sum;
    for (const auto& v : vs) {
        sum = sum + v.value;
        out.undefined = out.undefined || v.undefined;
    }
    out.value = sum / Ratio(data::kNumClasses, 1);
    return out;
}

}  // namespace

Ratio::Ratio(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    normalize();
}

void Ratio::normalize() {
    if (den_ < 0) {
        num_ = -num_;
        den_ = -den_;
    }
    if (num_ == 0) {
        den_ = 1;
        return;
    }
    const __int128 g = gcd128(num_, den_);
    num_ /= g;
    den_ /= g;
}

Ratio Ratio::operator+(const Ratio& o) const {
    Ratio r;
    r.num_ = num_ * o.den_ + o.num_ * den_;
    r.den_ = den_ * o.den_;
    r.normalize();
    return r;
}

Ratio Ratio::operator-(const Ratio& o) const {
    Ratio r;
    r.num_ = num_ * o.den_ - o.num_ * den_;
    r.den_ = den_ * o.den_;
    r.normalize();
    return r;
}

Ratio Ratio::operator*(const Ratio& o) const {
    Ratio r;
    r.num_ = num_ * o.num_;
    r.den_ = den_ * o.den_;
    r.normalize();
    return r;
}

Ratio Ratio::operator/(const Ratio& o) const {
    if (o.num_ == 0) throw std::invalid_argument("division by zero ratio");
    Ratio r;
    r.num_ = num_ * o.den_;
    r.den_ = den_ * o.num_;
    r.normalize();
    return r;
}

bool Ratio::operator==(const Ratio& o) const {
    return num_ == o.num_ && den_ == o.den_;
}

std::int64_t Ratio::num() const { return narrow(num_); }
std::int64_t Ratio::den() const { return narrow(den_); }

double Ratio::to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Ratio::percent() const {
    // round(value * 100 * 100) with half-up rounding, then place the point
    __int128 scaled = num_ * 10000;
    const bool neg = (scaled < 0);
    if (neg) scaled = -scaled;
    __int128 q = scaled / den_;
    const __int128 rem = scaled % den_;
    if (2 * rem >= den_) ++q;
    const auto whole = static_cast<long long>(q / 100);
    const auto frac = static_cast<int>(q % 100);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%lld.%02d", neg ? "-" : "", whole, frac);
    return buf;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts) {
        for (std::int64_t c : row) n += c;
    }
    return n;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int i = 0; i < data::kNumClasses; ++i) {
        t += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    return t;
}

std::int64_t& ConfusionMatrix::at(data::RelationLabel t, data::RelationLabel p) {
    return counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
}

std::int64_t ConfusionMatrix::at(data::RelationLabel t, data::RelationLabel p) const {
    return counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
}

ConfusionMatrix build_confusion(const std::vector<data::RelationLabel>& truth,
                                const std::vector<data::RelationLabel>& predicted) {
    if (truth.size() != predicted.size()) {
        throw LengthMismatch("label lists differ in length");
    }
    if (truth.empty()) throw EmptyInput("no labels");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++m.at(truth[i], predicted[i]);
    }
    return m;
}

std::array<PerClassCounts, data::kNumClasses> per_class_counts(
    const ConfusionMatrix& matrix) {
    const std::int64_t n = matrix.total();
    std::array<PerClassCounts, data::kNumClasses> out{};
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        PerClassCounts& pc = out[ci];
        pc.label = static_cast<data::RelationLabel>(c);
        pc.tp = matrix.counts[ci][ci];
        std::int64_t row = 0, col = 0;
        for (int k = 0; k < data::kNumClasses; ++k) {
            row += matrix.counts[ci][static_cast<std::size_t>(k)];
            col += matrix.counts[static_cast<std::size_t>(k)][ci];
        }
        pc.fn = row - pc.tp;
        pc.fp = col - pc.tp;
        pc.tn = n - pc.tp - pc.fp - pc.fn;
    }
    return out;
}

ClassMetrics class_metrics(const PerClassCounts& counts) {
    ClassMetrics m;
    m.counts = counts;
    m.precision = metric_ratio(counts.tp, counts.tp + counts.fp);
    m.recall = metric_ratio(counts.tp, counts.tp + counts.fn);
    m.specificity = metric_ratio(counts.tn, counts.tn + counts.fp);
    m.error_rate = metric_ratio(counts.fp + counts.fn, counts.total());
    // F1 = 2PR/(P+R) = 2TP / (2TP + FP + FN)
    m.f1 = metric_ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn);
    return m;
}

MicroMetrics micro_from_counts(
    const std::array<PerClassCounts, data::kNumClasses>& counts) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& c : counts) {
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    MicroMetrics m;
    m.precision = metric_ratio(tp, tp + fp);
    m.recall = metric_ratio(tp, tp + fn);
    // pooled counts: 2*sum(TP) / (2*sum(TP) + sum(FN) + sum(FP))
    m.f1 = metric_ratio(2 * tp, 2 * tp + fn + fp);
    return m;
}

MetricsReport compute_report(const ConfusionMatrix& matrix) {
    MetricsReport report;
    report.n = matrix.total();
    if (report.n == 0) throw EmptyInput("empty confusion matrix");

    const auto counts = per_class_counts(matrix);
    std::array<MetricValue, data::kNumClasses> ps, rs, ss, es, fs;
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        report.per_class[ci] = class_metrics(counts[ci]);
        ps[ci] = report.per_class[ci].precision;
        rs[ci] = report.per_class[ci].recall;
        ss[ci] = report.per_class[ci].specificity;
        es[ci] = report.per_class[ci].error_rate;
        fs[ci] = report.per_class[ci].f1;
    }
    report.macro.precision = mean6(ps);
    report.macro.recall = mean6(rs);
    report.macro.specificity = mean6(ss);
    report.macro.error_rate = mean6(es);
    report.macro.f1 = mean6(fs);
    report.micro = micro_from_counts(counts);
    report.accuracy = metric_ratio(matrix.trace(), report.n);
    return report;
}

namespace {

std::string cell(const MetricValue& v) {
    std::string s = v.value.percent();
    if (v.undefined) s += " (undefined)";
    return s;
}

}  // namespace

std::string report_to_text(const MetricsReport& report) {
    std::ostringstream out;
    out << "Evaluation over " << report.n << " observations\n";
    out << "accuracy: " << cell(report.accuracy) << "%\n\n";
    out << "class            TP    TN    FP    FN   precision  recall  specificity  error  f1\n";
    for (const auto& cm : report.per_class) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-15s %5lld %5lld %5lld %5lld   %8s %8s %11s %6s %6s\n",
                      std::string(data::label_name(cm.counts.label)).c_str(),
                      static_cast<long long>(cm.counts.tp),
                      static_cast<long long>(cm.counts.tn),
                      static_cast<long long>(cm.counts.fp),
                      static_cast<long long>(cm.counts.fn),
                      cm.precision.value.percent().c_str(),
                      cm.recall.value.percent().c_str(),
                      cm.specificity.value.percent().c_str(),
                      cm.error_rate.value.percent().c_str(),
                      cm.f1.value.percent().c_str());
        out << line;
    }
    out << "\nmacro average:  precision " << cell(report.macro.precision)
        << "  recall " << cell(report.macro.recall) << "  specificity "
        << cell(report.macro.specificity) << "  error "
        << cell(report.macro.error_rate) << "  f1 " << cell(report.macro.f1)
        << "\n";
    out << "micro average:  precision " << cell(report.micro.precision)
        << "  recall " << cell(report.micro.recall) << "  f1 "
        << cell(report.micro.f1) << "\n";
    return out.str();
}

std::string report_to_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "class,tp,tn,fp,fn,precision,recall,specificity,error_rate,f1\n";
    for (const auto& cm : report.per_class) {
        out << data::label_name(cm.counts.label) << ',' << cm.counts.tp << ','
            << cm.counts.tn << ',' << cm.counts.fp << ',' << cm.counts.fn << ','
            << cm.precision.value.percent() << ',' << cm.recall.value.percent()
            << ',' << cm.specificity.value.percent() << ','
            << cm.error_rate.value.percent() << ',' << cm.f1.value.percent()
            << '\n';
    }
    out << "Macro Average,,,,," << report.macro.precision.value.percent() << ','
        << report.macro.recall.value.percent() << ','
        << report.macro.specificity.value.percent() << ','
        << report.macro.error_rate.value.percent() << ','
        << report.macro.f1.value.percent() << '\n';
    out << "Micro Average,,,,," << report.micro.precision.value.percent() << ','
        << report.micro.recall.value.percent() << ",,,"
        << report.micro.f1.value.percent() << '\n';
    out << "Accuracy,,,,," << report.accuracy.value.percent() << ",,,,\n";
    return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix& matrix) {
    std::ostringstream out;
    out << "true\\pred";
    for (auto l : data::all_labels()) out << ',' << data::label_name(l);
    out << '\n';
    for (auto t : data::all_labels()) {
        out << data::label_name(t);
        for (auto p : data::all_labels()) out << ',' << matrix.at(t, p);
        out << '\n';
    }
    return out.str();
}

}  // namespace mathrel::metrics
