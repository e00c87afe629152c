#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "qfusion/rng.hpp"
#include "qfusion/stats.hpp"
#include "testutil.hpp"

using namespace qfusion;
using namespace qfusion::stats;

namespace {

// Independent brute-force signed-rank p-value: every sign assignment is
// materialized and W+ recomputed from scratch.
double wilcoxon_bruteforce(std::span<const double> diffs) {
    std::vector<double> mags;
    std::vector<bool> pos;
    for (double d : diffs) {
        if (d == 0.0) continue;
        mags.push_back(std::abs(d));
        pos.push_back(d > 0.0);
    }
    const std::size_t n = mags.size();
    if (n == 0) return 1.0;

    std::vector<double> ranks(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }

    double w_obs = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (pos[k]) w_obs += ranks[k];

    std::size_t at_least = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double w = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (mask & (std::size_t{1} << k)) w += ranks[k];
        if (w >= w_obs - 1e-12) ++at_least;
    }
    return static_cast<double>(at_least) / static_cast<double>(std::size_t{1} << n);
}

}  // namespace

TEST_CASE("metrics reproduce the published aggregate confusion counts") {
    // counts with benign as the positive class
    ConfusionMatrix hybrid{549, 84, 126, 21, 1};
    const MetricSet hm = compute_metrics(hybrid);
    CHECK(*hm.accuracy == doctest::Approx(0.8654).epsilon(0.0002 / 0.8654));
    CHECK(*hm.precision == doctest::Approx(0.8670).epsilon(0.0005 / 0.8670));
    CHECK(*hm.recall == doctest::Approx(0.9632).epsilon(0.0002 / 0.9632));
    CHECK(*hm.f1 == doctest::Approx(0.9131).epsilon(0.0010 / 0.9131));

    ConfusionMatrix classical{550, 105, 105, 20, 1};
    const MetricSet cm = compute_metrics(classical);
    CHECK(*cm.recall == doctest::Approx(0.9649).epsilon(0.0002 / 0.9649));
    CHECK(*cm.precision == doctest::Approx(0.8397).epsilon(0.0005 / 0.8397));
}

TEST_CASE("perfect classifier scores 1.0 on every metric") {
    ConfusionMatrix cm{1, 0, 1, 0, 1};
    const MetricSet m = compute_metrics(cm);
    CHECK(*m.accuracy == 1.0);
    CHECK(*m.recall == 1.0);
    CHECK(*m.precision == 1.0);
    CHECK(*m.f1 == 1.0);
}

TEST_CASE("zero denominators leave metrics undefined rather than zero") {
    ConfusionMatrix empty{0, 0, 0, 0, 1};
    const MetricSet m = compute_metrics(empty);
    CHECK_FALSE(m.accuracy);
    CHECK_FALSE(m.recall);
    CHECK_FALSE(m.precision);
    CHECK_FALSE(m.f1);
    CHECK(m.any_undefined());

    ConfusionMatrix no_pos{0, 0, 5, 0, 1};  // nothing labeled or predicted positive
    const MetricSet m2 = compute_metrics(no_pos);
    CHECK(*m2.accuracy == 1.0);
    CHECK_FALSE(m2.recall);
    CHECK_FALSE(m2.precision);
}

TEST_CASE("F1 equals the harmonic mean of precision and recall") {
    Xoshiro256 rng(61);
    for (int round = 0; round < 200; ++round) {
        ConfusionMatrix cm{rng.bounded(500) + 1, rng.bounded(500) + 1,
                           rng.bounded(500) + 1, rng.bounded(500) + 1, 1};
        const MetricSet m = compute_metrics(cm);
        const double hmean =
            2.0 * (*m.recall) * (*m.precision) / (*m.recall + *m.precision);
        CHECK(std::abs(*m.f1 - hmean) < 1e-12);
    }
}

TEST_CASE("swapping the positive class swaps counts and keeps accuracy") {
    ConfusionMatrix cm{549, 84, 126, 21, 1};
    const ConfusionMatrix sw = cm.swapped();
    CHECK(sw.tp == cm.tn);
    CHECK(sw.fp == cm.fn);
    CHECK(sw.tn == cm.tp);
    CHECK(sw.fn == cm.fp);
    CHECK(sw.positive_class == 0);
    CHECK(*compute_metrics(sw).accuracy == *compute_metrics(cm).accuracy);
}

TEST_CASE("confusion_from_predictions counts by definition") {
    const std::vector<int> labels = {1, 1, 0, 0, 1};
    const std::vector<int> same = labels;
    const ConfusionMatrix exact = confusion_from_predictions(labels, same, 1);
    CHECK(exact.fp == 0);
    CHECK(exact.fn == 0);
    CHECK(exact.tp == 3);
    CHECK(exact.tn == 2);

    const std::vector<int> all_pos = {1, 1, 1, 1, 1};
    const ConfusionMatrix ap = confusion_from_predictions(labels, all_pos, 1);
    CHECK(ap.tn == 0);
    CHECK(ap.fn == 0);
    CHECK(ap.tp == 3);
    CHECK(ap.fp == 2);
    CHECK(ap.total() == 5);
}

TEST_CASE("confusion_from_predictions rejects length mismatch") {
    const std::vector<int> labels = {1, 0};
    const std::vector<int> preds = {1};
    CHECK_THROWS_AS(confusion_from_predictions(labels, preds, 1),
                    std::invalid_argument);
}

TEST_CASE("five positive differences give p = 1/32 exactly") {
    const std::vector<double> diffs = {0.01, 0.02, 0.005, 0.03, 0.015};
    const WilcoxonResult r = wilcoxon_one_sided(diffs);
    CHECK(r.p == 0.03125);
    CHECK(r.n_used == 5);
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("a single positive difference gives p = 0.5") {
    const std::vector<double> diffs = {0.1};
    CHECK(wilcoxon_one_sided(diffs).p == 0.5);
}

TEST_CASE("tied opposite differences give p = 0.75") {
    const std::vector<double> diffs = {1.0, -1.0};
    CHECK(wilcoxon_one_sided(diffs).p == 0.75);
}

TEST_CASE("all-zero differences are degenerate with p = 1") {
    const std::vector<double> diffs = {0.0, 0.0, 0.0};
    const WilcoxonResult r = wilcoxon_one_sided(diffs);
    CHECK(r.p == 1.0);
    CHECK(r.degenerate);
    CHECK(r.n_used == 0);
}

TEST_CASE("wilcoxon matches the brute-force oracle for every n <= 10") {
    Xoshiro256 rng(62);
    for (std::size_t n = 1; n <= 10; ++n) {
        // all sign patterns over a fixed magnitude set, including ties
        std::vector<double> mags(n);
        for (std::size_t i = 0; i < n; ++i)
            mags[i] = 0.01 * static_cast<double>(1 + (i % 4));  // repeated -> ties
        for (std::size_t pattern = 0; pattern < (std::size_t{1} << n); ++pattern) {
            std::vector<double> diffs(n);
            for (std::size_t i = 0; i < n; ++i)
                diffs[i] = (pattern & (std::size_t{1} << i)) ? mags[i] : -mags[i];
            const double expect = wilcoxon_bruteforce(diffs);
            const double got = wilcoxon_one_sided(diffs).p;
            REQUIRE(got == expect);
        }
    }
    // random magnitudes as well
    for (int round = 0; round < 50; ++round) {
        const std::size_t n = 2 + rng.bounded(8);
        std::vector<double> diffs(n);
        for (double& d : diffs) d = rng.uniform(-1.0, 1.0);
        CHECK(wilcoxon_one_sided(diffs).p == wilcoxon_bruteforce(diffs));
    }
}

TEST_CASE("wilcoxon p always lies in (0, 1]") {
    Xoshiro256 rng(63);
    for (int round = 0; round < 300; ++round) {
        const std::size_t n = 1 + rng.bounded(12);
        std::vector<double> diffs(n);
        for (double& d : diffs) d = rng.uniform(-1.0, 1.0);
        const double p = wilcoxon_one_sided(diffs).p;
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("cohens d closed forms") {
    const std::vector<double> a = {2, 4};
    const std::vector<double> b = {0, 2};
    const CohensD d = cohens_d(a, b);
    CHECK(*d.d == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    const std::vector<double> same = {1, 2, 3};
    CHECK(*cohens_d(same, same).d == 0.0);

    const CohensD swapped = cohens_d(b, a);
    CHECK(*swapped.d == doctest::Approx(-*d.d).epsilon(1e-15));
}

TEST_CASE("cohens d flags zero pooled variance with a mean gap as infinite") {
    const std::vector<double> a = {1, 1};
    const std::vector<double> b = {0, 0};
    const CohensD d = cohens_d(a, b);
    CHECK_FALSE(d.d);
    CHECK(d.infinite_effect);

    const std::vector<double> c = {1, 1};
    const CohensD zero = cohens_d(c, c);
    CHECK(*zero.d == 0.0);
    CHECK_FALSE(zero.infinite_effect);
}

TEST_CASE("cohens d requires n >= 2 per group") {
    const std::vector<double> a = {1};
    const std::vector<double> b = {1, 2};
    CHECK_THROWS_AS(cohens_d(a, b), std::invalid_argument);
}

namespace {

void write_fake_run(const std::string& dir, const std::string& model,
                    std::uint64_t seed, double accuracy,
                    const ConfusionMatrix& cm) {
    namespace fs = std::filesystem;
    const fs::path run_dir = fs::path(dir) / ("seed-" + std::to_string(seed));
    fs::create_directories(run_dir);
    std::ofstream out(run_dir / "result.json");
    out << "{\n"
        << "  \"model\": \"" << model << "\",\n"
        << "  \"seed\": " << seed << ",\n"
        << "  \"test\": {\"accuracy\": " << accuracy
        << ", \"recall\": 0.9, \"precision\": 0.8, \"f1\": 0.85, \"loss\": 0.4},\n"
        << "  \"best_epoch_metrics\": {\"train_acc\": 0.8, \"val_acc\": 0.82, "
           "\"train_loss\": 0.5, \"val_loss\": 0.45},\n"
        << "  \"test_confusion\": {\"tp\": " << cm.tp << ", \"fp\": " << cm.fp
        << ", \"tn\": " << cm.tn << ", \"fn\": " << cm.fn
        << ", \"positive_class\": 1}\n"
        << "}\n";
}

}  // namespace

TEST_CASE("compare_runs pairs by seed and reproduces the 1/32 p-value") {
    testutil::TempDir tmp("compare");
    const std::string dir_a = tmp.str("a");
    const std::string dir_b = tmp.str("b");
    // five seeds, a beats b everywhere; counts sum to 156 per run
    const ConfusionMatrix cm{110, 17, 25, 4, 1};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        write_fake_run(dir_a, "hybrid", seed, 0.86 + 0.001 * static_cast<double>(seed), cm);
        write_fake_run(dir_b, "classical", seed, 0.84 + 0.001 * static_cast<double>(seed), cm);
    }
    const ComparisonReport report = compare_runs(dir_a, dir_b);
    CHECK(report.wilcoxon.p == 0.03125);
    CHECK(report.reject_null);
    CHECK(report.summary_a.aggregate.total() == 5 * 156);
    CHECK(report.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(report.effect_size.d);
    CHECK(*report.effect_size.d > 0.0);

    const std::string json_text = comparison_report_to_json(report);
    CHECK(json_text.find("\"p\": 0.03125") != std::string::npos);
}

TEST_CASE("comparing identical run sets is degenerate with d = 0") {
    testutil::TempDir tmp("compare2");
    const std::string dir_a = tmp.str("a");
    const std::string dir_b = tmp.str("b");
    const ConfusionMatrix cm{100, 20, 30, 6, 1};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const double acc = 0.8 + 0.01 * static_cast<double>(seed);
        write_fake_run(dir_a, "hybrid", seed, acc, cm);
        write_fake_run(dir_b, "classical", seed, acc, cm);
    }
    const ComparisonReport report = compare_runs(dir_a, dir_b);
    CHECK(report.wilcoxon.degenerate);
    CHECK(report.wilcoxon.p == 1.0);
    CHECK(*report.effect_size.d == 0.0);
    CHECK_FALSE(report.reject_null);
}

TEST_CASE("compare_runs rejects mismatched seed sets") {
    testutil::TempDir tmp("compare3");
    const std::string dir_a = tmp.str("a");
    const std::string dir_b = tmp.str("b");
    const ConfusionMatrix cm{100, 20, 30, 6, 1};
    write_fake_run(dir_a, "hybrid", 1, 0.8, cm);
    write_fake_run(dir_a, "hybrid", 2, 0.8, cm);
    write_fake_run(dir_b, "classical", 1, 0.8, cm);
    write_fake_run(dir_b, "classical", 3, 0.8, cm);
    CHECK_THROWS_WITH_AS(compare_runs(dir_a, dir_b), doctest::Contains("seed"),
                         std::runtime_error);
}
