#include "mathrel/metrics.hpp"

#include <cmath>

#include "doctest.h"
#include "mathrel/rng.hpp"

using namespace mathrel;
using namespace mathrel::metrics;
using data::RelationLabel;

namespace {

// Brute-force one-vs-rest oracle: enumerate (true, pred) pairs directly.
std::array<PerClassCounts, data::kNumClasses> pairwise_oracle(
    const std::vector<RelationLabel>& truth,
    const std::vector<RelationLabel>& pred) {
    std::array<PerClassCounts, data::kNumClasses> out{};
    for (int c = 0; c < data::kNumClasses; ++c) {
        auto& pc = out[static_cast<std::size_t>(c)];
        pc.label = static_cast<RelationLabel>(c);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool t = static_cast<int>(truth[i]) == c;
            const bool p = static_cast<int>(pred[i]) == c;
            if (t && p) ++pc.tp;
            else if (t && !p) ++pc.fn;
            else if (!t && p) ++pc.fp;
            else ++pc.tn;
        }
    }
    return out;
}

std::vector<RelationLabel> random_labels(Rng& rng, std::size_t n) {
    std::vector<RelationLabel> v(n);
    for (auto& l : v) {
        l = static_cast<RelationLabel>(rng.uniform_int(0, data::kNumClasses - 1));
    }
    return v;
}

}  // namespace

TEST_CASE("Ratio exact arithmetic and rendering") {
    const Ratio p(99, 107);
    CHECK(p.num() == 99);
    CHECK(p.den() == 107);
    CHECK(p.percent() == "92.52");
    CHECK(Ratio(459, 467).percent() == "98.29");
    CHECK(Ratio(1, 1).percent() == "100.00");
    CHECK(Ratio(0, 5).num() == 0);
    CHECK(Ratio(2, 4) == Ratio(1, 2));
    CHECK(Ratio(1, 3) + Ratio(1, 6) == Ratio(1, 2));
    CHECK(Ratio(1, 2) * Ratio(2, 3) == Ratio(1, 3));
    CHECK(Ratio(1, 2) / Ratio(1, 4) == Ratio(2, 1));
    CHECK_THROWS(Ratio(1, 0));
}

TEST_CASE("build_confusion") {
    using L = RelationLabel;
    const std::vector<L> truth = {L::Addition, L::Addition, L::Division};
    const std::vector<L> pred = {L::Addition, L::Subtraction, L::Division};
    const auto m = build_confusion(truth, pred);
    CHECK(m.at(L::Addition, L::Addition) == 1);
    CHECK(m.at(L::Addition, L::Subtraction) == 1);
    CHECK(m.at(L::Division, L::Division) == 1);
    CHECK(m.total() == 3);
    CHECK(m.trace() == 2);

    CHECK_THROWS_AS(build_confusion(truth, {L::Addition}), LengthMismatch);
    CHECK_THROWS_AS(build_confusion({}, {}), EmptyInput);
}

TEST_CASE("perfect predictions give a diagonal matrix and perfect scores") {
    Rng rng(3);
    const auto truth = random_labels(rng, 60);
    const auto m = build_confusion(truth, truth);
    for (int i = 0; i < data::kNumClasses; ++i) {
        for (int j = 0; j < data::kNumClasses; ++j) {
            if (i != j) {
                CHECK(m.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 0);
            }
        }
    }
    const auto counts = per_class_counts(m);
    for (const auto& pc : counts) {
        CHECK(pc.fp == 0);
        CHECK(pc.fn == 0);
    }
    const auto report = compute_report(m);
    CHECK(report.accuracy.value == Ratio(1, 1));
    CHECK(report.micro.f1.value == Ratio(1, 1));
    CHECK(report.macro.f1.value == Ratio(1, 1));
}

TEST_CASE("off-diagonal error patterns land in the right cells") {
    // 7 Addition->Subtraction, 1 Addition->Multiplication, 4 Division->Multiplication
    using L = RelationLabel;
    std::vector<L> truth, pred;
    const auto add_n = [&](L t, L p, int k) {
        for (int i = 0; i < k; ++i) {
            truth.push_back(t);
            pred.push_back(p);
        }
    };
    add_n(L::Addition, L::Subtraction, 7);
    add_n(L::Addition, L::Multiplication, 1);
    add_n(L::Division, L::Multiplication, 4);
    add_n(L::Addition, L::Addition, 92);
    add_n(L::Division, L::Division, 101);
    const auto m = build_confusion(truth, pred);
    CHECK(m.at(L::Addition, L::Subtraction) == 7);
    CHECK(m.at(L::Addition, L::Multiplication) == 1);
    CHECK(m.at(L::Division, L::Multiplication) == 4);
    CHECK(m.at(L::Addition, L::Addition) == 92);
}

TEST_CASE("single (i,j) pair puts one count in one cell") {
    const auto m = build_confusion({RelationLabel::SquareRoot},
                                   {RelationLabel::Factorial});
    CHECK(m.at(RelationLabel::SquareRoot, RelationLabel::Factorial) == 1);
    CHECK(m.total() == 1);
    CHECK(m.trace() == 0);
}

TEST_CASE("per-class counts match the pairwise oracle on random matrices") {
    Rng rng(99);
    for (int iter = 0; iter < 500; ++iter) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 400));
        const auto truth = random_labels(rng, n);
        const auto pred = random_labels(rng, n);
        const auto m = build_confusion(truth, pred);
        const auto fast = per_class_counts(m);
        const auto slow = pairwise_oracle(truth, pred);
        for (int c = 0; c < data::kNumClasses; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            REQUIRE(fast[ci].tp == slow[ci].tp);
            REQUIRE(fast[ci].tn == slow[ci].tn);
            REQUIRE(fast[ci].fp == slow[ci].fp);
            REQUIRE(fast[ci].fn == slow[ci].fn);
            REQUIRE(fast[ci].total() == static_cast<std::int64_t>(n));
        }
    }
}

TEST_CASE("multiclass identities hold exactly") {
    Rng rng(123);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 600));
        const auto truth = random_labels(rng, n);
        const auto pred = random_labels(rng, n);
        const auto m = build_confusion(truth, pred);
        const auto counts = per_class_counts(m);

        std::int64_t sum_fp = 0, sum_fn = 0;
        for (const auto& c : counts) {
            sum_fp += c.fp;
            sum_fn += c.fn;
        }
        REQUIRE(sum_fp == sum_fn);
        REQUIRE(sum_fp == m.total() - m.trace());

        // micro precision = micro recall = accuracy = micro F1, exactly
        const auto report = compute_report(m);
        REQUIRE(report.micro.precision.value == report.micro.recall.value);
        REQUIRE(report.micro.precision.value == report.accuracy.value);
        REQUIRE(report.micro.f1.value == report.accuracy.value);
    }
}

TEST_CASE("metrics are invariant under class permutation") {
    Rng rng(5);
    const std::size_t n = 300;
    const auto truth = random_labels(rng, n);
    const auto pred = random_labels(rng, n);
    const auto base = compute_report(build_confusion(truth, pred));

    // rotate all class codes by 2
    const auto rot = [](RelationLabel l) {
        return static_cast<RelationLabel>((static_cast<int>(l) + 2) % data::kNumClasses);
    };
    std::vector<RelationLabel> truth2, pred2;
    for (std::size_t i = 0; i < n; ++i) {
        truth2.push_back(rot(truth[i]));
        pred2.push_back(rot(pred[i]));
    }
    const auto rotated = compute_report(build_confusion(truth2, pred2));

    CHECK(base.accuracy.value == rotated.accuracy.value);
    CHECK(base.micro.f1.value == rotated.micro.f1.value);
    CHECK(base.macro.f1.value == rotated.macro.f1.value);
    CHECK(base.macro.precision.value == rotated.macro.precision.value);
    CHECK(base.macro.error_rate.value == rotated.macro.error_rate.value);
    // per-class metrics permute along
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto& a = base.per_class[static_cast<std::size_t>(c)];
        const auto& b = rotated.per_class[static_cast<std::size_t>((c + 2) % data::kNumClasses)];
        CHECK(a.f1.value == b.f1.value);
        CHECK(a.precision.value == b.precision.value);
    }
}

TEST_CASE("exact values from reference per-class counts") {
    // Addition row: TP=99, TN=459, FP=8, FN=1
    PerClassCounts add{RelationLabel::Addition, 99, 459, 8, 1};
    const auto m = class_metrics(add);
    CHECK(m.precision.value == Ratio(99, 107));
    CHECK(m.recall.value == Ratio(99, 100));
    CHECK(m.specificity.value == Ratio(459, 467));
    CHECK(m.f1.value == Ratio(198, 207));
    CHECK(m.precision.value.percent() == "92.52");

    // Subtraction row: TP=96, TN=467, FP=0, FN=2 -> error rate 2/565
    PerClassCounts sub{RelationLabel::Subtraction, 96, 467, 0, 2};
    const auto ms = class_metrics(sub);
    CHECK(ms.error_rate.value == Ratio(2, 565));
    CHECK(std::abs(ms.error_rate.value.to_double() - 0.00354) < 1e-4);

    // Factorial row: TP=70, TN=466, FP=0, FN=0 -> all perfect
    PerClassCounts fac{RelationLabel::Factorial, 70, 466, 0, 0};
    const auto mf = class_metrics(fac);
    CHECK(mf.precision.value == Ratio(1, 1));
    CHECK(mf.recall.value == Ratio(1, 1));
    CHECK(mf.specificity.value == Ratio(1, 1));
    CHECK(mf.error_rate.value == Ratio(0, 1));
    CHECK(mf.f1.value == Ratio(1, 1));
}

TEST_CASE("0/0 ratios are zero and flagged undefined") {
    // class never present and never predicted: TP=FP=FN=0
    PerClassCounts empty{RelationLabel::Factorial, 0, 50, 0, 0};
    const auto m = class_metrics(empty);
    CHECK(m.precision.undefined);
    CHECK(m.precision.value == Ratio(0, 1));
    CHECK(m.recall.undefined);
    CHECK(m.f1.undefined);
    CHECK(!m.specificity.undefined);
}

TEST_CASE("report serializations carry the table columns") {
    Rng rng(17);
    const auto truth = random_labels(rng, 100);
    const auto pred = random_labels(rng, 100);
    const auto report = compute_report(build_confusion(truth, pred));

    const auto text = report_to_text(report);
    CHECK(text.find("accuracy") != std::string::npos);
    CHECK(text.find("Square Root") != std::string::npos);

    const auto csv = report_to_csv(report);
    CHECK(csv.find("class,tp,tn,fp,fn,precision,recall,specificity,error_rate,f1") == 0);
    CHECK(csv.find("Macro Average") != std::string::npos);
    CHECK(csv.find("Micro Average") != std::string::npos);

    const auto conf = confusion_to_csv(build_confusion(truth, pred));
    CHECK(conf.find("Factorial") != std::string::npos);
}
