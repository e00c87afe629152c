#include "qfusion/stats.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace qfusion::stats {

namespace fs = std::filesystem;
using nlohmann::json;

MetricSet compute_metrics(const ConfusionMatrix& cm) {
    MetricSet m;
    const double tp = static_cast<double>(cm.tp);
    const double tn = static_cast<double>(cm.tn);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    if (cm.total() > 0) m.accuracy = (tp + tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fn > 0) m.recall = tp / (tp + fn);
    if (cm.tp + cm.fp > 0) m.precision = tp / (tp + fp);
    if (m.recall && m.precision && (*m.recall + *m.precision) > 0.0)
        m.f1 = 2.0 * (*m.recall) * (*m.precision) / (*m.recall + *m.precision);
    return m;
}

ConfusionMatrix confusion_from_predictions(std::span<const int> labels,
                                           std::span<const int> predictions,
                                           int positive_class) {
    if (labels.size() != predictions.size())
        throw std::invalid_argument(
            "confusion_from_predictions: " + std::to_string(labels.size()) +
            " labels vs " + std::to_string(predictions.size()) + " predictions");
    ConfusionMatrix cm;
    cm.positive_class = positive_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual_pos = labels[i] == positive_class;
        const bool pred_pos = predictions[i] == positive_class;
        if (actual_pos && pred_pos) ++cm.tp;
        else if (actual_pos && !pred_pos) ++cm.fn;
        else if (!actual_pos && pred_pos) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

WilcoxonResult wilcoxon_one_sided(std::span<const double> diffs) {
    std::vector<double> magnitudes;
    std::vector<bool> positive;
    for (double d : diffs) {
        if (d == 0.0) continue;  // standard signed-rank practice: drop zeros
        magnitudes.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }
    const std::size_t n = magnitudes.size();

    WilcoxonResult result;
    result.n_used = n;
    if (n == 0) {
        result.degenerate = true;
        result.p = 1.0;
        return result;
    }
    if (n > 20)
        throw std::invalid_argument(
            "wilcoxon_one_sided: exact enumeration supports n <= 20, got " +
            std::to_string(n));

    // Average ranks over tied magnitudes. Doubled ranks stay integral
    // (lo + hi of each 1-based tie group), which keeps the null
    // distribution arithmetic exact.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return magnitudes[a] < magnitudes[b];
    });
    std::vector<std::uint64_t> rank2(n);  // 2 * rank
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
        const std::uint64_t doubled = (i + 1) + (j + 1);  // lo + hi, 1-based
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
        i = j + 1;
    }

    std::uint64_t w2_obs = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (positive[k]) w2_obs += rank2[k];
    result.w_plus = static_cast<double>(w2_obs) / 2.0;

    // Null distribution of 2*W+ by subset-sum counting over the doubled
    // ranks: product of (1 + x^rank2_i).
    std::uint64_t max_sum = 0;
    for (std::uint64_t r : rank2) max_sum += r;
    std::vector<std::uint64_t> counts(max_sum + 1, 0);
    counts[0] = 1;
    for (std::uint64_t r : rank2) {
        for (std::size_t s = max_sum + 1; s-- > r;)
            counts[s] += counts[s - r];
    }
    std::uint64_t at_least = 0;
    for (std::size_t s = w2_obs; s <= max_sum; ++s) at_least += counts[s];
    result.p = static_cast<double>(at_least) /
               static_cast<double>(std::uint64_t{1} << n);
    return result;
}

CohensD cohens_d(std::span<const double> group_a, std::span<const double> group_b) {
    if (group_a.size() < 2 || group_b.size() < 2)
        throw std::invalid_argument("cohens_d: each group needs n >= 2");
    auto mean = [](std::span<const double> g) {
        double s = 0.0;
        for (double v : g) s += v;
        return s / static_cast<double>(g.size());
    };
    auto sum_sq_dev = [&](std::span<const double> g, double mu) {
        double s = 0.0;
        for (double v : g) s += (v - mu) * (v - mu);
        return s;
    };
    const double mean_a = mean(group_a), mean_b = mean(group_b);
    const double na = static_cast<double>(group_a.size());
    const double nb = static_cast<double>(group_b.size());
    const double pooled_var =
        (sum_sq_dev(group_a, mean_a) + sum_sq_dev(group_b, mean_b)) / (na + nb - 2.0);

    CohensD out;
    if (pooled_var <= 0.0) {
        if (mean_a == mean_b) {
            out.d = 0.0;  // identical constant groups: no effect
        } else {
            out.infinite_effect = true;
        }
        return out;
    }
    out.d = (mean_a - mean_b) / std::sqrt(pooled_var);
    return out;
}

std::vector<RunRecord> load_run_records(const std::string& dir) {
    std::vector<RunRecord> records;
    if (!fs::is_directory(dir))
        throw std::runtime_error("compare: '" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() == "result.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        std::ifstream in(file);
        json j = json::parse(in);
        RunRecord r;
        r.seed = j.at("seed").get<std::uint64_t>();
        r.model = j.at("model").get<std::string>();
        const json& test = j.at("test");
        r.test_accuracy = test.at("accuracy").get<double>();
        if (test.contains("recall") && !test["recall"].is_null())
            r.recall = test["recall"].get<double>();
        if (test.contains("precision") && !test["precision"].is_null())
            r.precision = test["precision"].get<double>();
        if (test.contains("f1") && !test["f1"].is_null())
            r.f1 = test["f1"].get<double>();
        const json& best = j.at("best_epoch_metrics");
        r.train_acc = best.at("train_acc").get<double>();
        r.val_acc = best.at("val_acc").get<double>();
        r.train_loss = best.at("train_loss").get<double>();
        r.val_loss = best.at("val_loss").get<double>();
        const json& cm = j.at("test_confusion");
        r.confusion.tp = cm.at("tp").get<std::uint64_t>();
        r.confusion.fp = cm.at("fp").get<std::uint64_t>();
        r.confusion.tn = cm.at("tn").get<std::uint64_t>();
        r.confusion.fn = cm.at("fn").get<std::uint64_t>();
        r.confusion.positive_class = cm.at("positive_class").get<int>();
        records.push_back(std::move(r));
    }
    if (records.empty())
        throw std::runtime_error("compare: no result.json files under '" + dir + "'");
    return records;
}

namespace {

GroupSummary summarize(const std::vector<RunRecord>& records) {
    GroupSummary s;
    s.model = records.front().model;
    const double n = static_cast<double>(records.size());
    double acc_sum = 0.0;
    bool have_prf = true;
    double recall_sum = 0.0, precision_sum = 0.0, f1_sum = 0.0;
    s.aggregate.positive_class = records.front().confusion.positive_class;
    for (const RunRecord& r : records) {
        acc_sum += r.test_accuracy;
        s.mean_train_acc += r.train_acc / n;
        s.mean_val_acc += r.val_acc / n;
        s.mean_train_loss += r.train_loss / n;
        s.mean_val_loss += r.val_loss / n;
        s.aggregate.tp += r.confusion.tp;
        s.aggregate.fp += r.confusion.fp;
        s.aggregate.tn += r.confusion.tn;
        s.aggregate.fn += r.confusion.fn;
        if (r.recall && r.precision && r.f1) {
            recall_sum += *r.recall;
            precision_sum += *r.precision;
            f1_sum += *r.f1;
        } else {
            have_prf = false;
        }
    }
    s.mean_accuracy = acc_sum / n;
    double sq = 0.0;
    for (const RunRecord& r : records)
        sq += (r.test_accuracy - s.mean_accuracy) * (r.test_accuracy - s.mean_accuracy);
    s.std_accuracy = records.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    if (have_prf) {
        s.mean_recall = recall_sum / n;
        s.mean_precision = precision_sum / n;
        s.mean_f1 = f1_sum / n;
    }
    s.aggregate_metrics = compute_metrics(s.aggregate);
    return s;
}

}  // namespace

ComparisonReport compare_records(std::vector<RunRecord> a, std::vector<RunRecord> b) {
    auto by_seed = [](const RunRecord& x, const RunRecord& y) {
        return x.seed < y.seed;
    };
    std::sort(a.begin(), a.end(), by_seed);
    std::sort(b.begin(), b.end(), by_seed);

    auto seeds_of = [](const std::vector<RunRecord>& v) {
        std::vector<std::uint64_t> s;
        for (const RunRecord& r : v) s.push_back(r.seed);
        return s;
    };
    const std::vector<std::uint64_t> seeds_a = seeds_of(a), seeds_b = seeds_of(b);
    if (seeds_a != seeds_b) {
        auto fmt = [](const std::vector<std::uint64_t>& s) {
            std::string out;
            for (std::uint64_t v : s) out += std::to_string(v) + " ";
            return out;
        };
        throw std::runtime_error("compare: seed sets differ ({" + fmt(seeds_a) +
                                 "} vs {" + fmt(seeds_b) + "})");
    }

    ComparisonReport report;
    report.seeds = seeds_a;
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        report.accuracies_a.push_back(a[i].test_accuracy);
        report.accuracies_b.push_back(b[i].test_accuracy);
        diffs.push_back(a[i].test_accuracy - b[i].test_accuracy);
    }
    report.wilcoxon = wilcoxon_one_sided(diffs);
    report.effect_size = cohens_d(report.accuracies_a, report.accuracies_b);
    report.summary_a = summarize(a);
    report.summary_b = summarize(b);
    report.reject_null = report.wilcoxon.p < 0.05;
    return report;
}

ComparisonReport compare_runs(const std::string& dir_a, const std::string& dir_b) {
    return compare_records(load_run_records(dir_a), load_run_records(dir_b));
}

namespace {

json metric_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

json summary_json(const GroupSummary& s) {
    return json{
        {"model", s.model},
        {"mean_test_accuracy", s.mean_accuracy},
        {"std_test_accuracy", s.std_accuracy},
        {"mean_train_accuracy", s.mean_train_acc},
        {"mean_val_accuracy", s.mean_val_acc},
        {"mean_train_loss", s.mean_train_loss},
        {"mean_val_loss", s.mean_val_loss},
        {"mean_recall", metric_json(s.mean_recall)},
        {"mean_precision", metric_json(s.mean_precision)},
        {"mean_f1", metric_json(s.mean_f1)},
        {"aggregate_confusion",
         {{"tp", s.aggregate.tp},
          {"fp", s.aggregate.fp},
          {"tn", s.aggregate.tn},
          {"fn", s.aggregate.fn},
          {"positive_class", s.aggregate.positive_class},
          {"total", s.aggregate.total()}}},
        {"aggregate_metrics",
         {{"accuracy", metric_json(s.aggregate_metrics.accuracy)},
          {"recall", metric_json(s.aggregate_metrics.recall)},
          {"precision", metric_json(s.aggregate_metrics.precision)},
          {"f1", metric_json(s.aggregate_metrics.f1)}}}};
}

}  // namespace

std::string comparison_report_to_json(const ComparisonReport& report) {
    json j;
    j["seeds"] = report.seeds;
    j["paired_accuracies"] = json::array();
    for (std::size_t i = 0; i < report.seeds.size(); ++i)
        j["paired_accuracies"].push_back({{"seed", report.seeds[i]},
                                          {"a", report.accuracies_a[i]},
                                          {"b", report.accuracies_b[i]}});
    j["wilcoxon"] = {{"p", report.wilcoxon.p},
                     {"w_plus", report.wilcoxon.w_plus},
                     {"n_used", report.wilcoxon.n_used},
                     {"degenerate", report.wilcoxon.degenerate}};
    j["cohens_d"] = report.effect_size.d ? json(*report.effect_size.d) : json(nullptr);
    j["infinite_effect"] = report.effect_size.infinite_effect;
    j["reject_null_at_0.05"] = report.reject_null;
    j["group_a"] = summary_json(report.summary_a);
    j["group_b"] = summary_json(report.summary_b);
    return j.dump(2);
}

}  // namespace qfusion::stats
