#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qfusion::stats {

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    int positive_class = 1;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    /// Same outcomes counted with the other class as positive.
    ConfusionMatrix swapped() const {
        return {tn, fn, tp, fp, 1 - positive_class};
    }
};

/// accuracy = (TP+TN)/total, recall = TP/(TP+FN), precision = TP/(TP+FP),
/// F1 = harmonic mean of precision and recall. A zero denominator leaves
/// the metric unset rather than zero.
struct MetricSet {
    std::optional<double> accuracy, recall, precision, f1;
    bool any_undefined() const {
        return !accuracy || !recall || !precision || !f1;
    }
};

MetricSet compute_metrics(const ConfusionMatrix& cm);

ConfusionMatrix confusion_from_predictions(std::span<const int> labels,
                                           std::span<const int> predictions,
                                           int positive_class);

struct WilcoxonResult {
    double p = 1.0;
    double w_plus = 0.0;
    std::size_t n_used = 0;  // nonzero differences
    bool degenerate = false;  // all differences were zero
};

/// Exact one-sided signed-rank test on paired differences (alternative:
/// differences > 0). Zeros are dropped, ties get average ranks, and the
/// p-value P(W+ >= observed) is computed over all 2^n sign assignments.
/// Exact-enumeration regime: n <= 20 after dropping zeros.
WilcoxonResult wilcoxon_one_sided(std::span<const double> diffs);

struct CohensD {
    std::optional<double> d;
    bool infinite_effect = false;  // zero pooled variance, nonzero mean gap
};

/// Pooled-standard-deviation effect size between two independent groups,
/// sample (n-1) variances. Each group needs n >= 2.
CohensD cohens_d(std::span<const double> group_a, std::span<const double> group_b);

/// One model's run set as read back from result.json files.
struct RunRecord {
    std::uint64_t seed = 0;
    std::string model;
    double test_accuracy = 0.0;
    double train_acc = 0.0, val_acc = 0.0, train_loss = 0.0, val_loss = 0.0;
    std::optional<double> recall, precision, f1;
    ConfusionMatrix confusion;
};

struct GroupSummary {
    std::string model;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_train_acc = 0.0, mean_val_acc = 0.0;
    double mean_train_loss = 0.0, mean_val_loss = 0.0;
    std::optional<double> mean_recall, mean_precision, mean_f1;
    ConfusionMatrix aggregate;  // counts summed over runs
    MetricSet aggregate_metrics;
};

struct ComparisonReport {
    std::vector<std::uint64_t> seeds;
    std::vector<double> accuracies_a, accuracies_b;  // aligned by seed
    WilcoxonResult wilcoxon;                         // diffs = a - b
    CohensD effect_size;
    GroupSummary summary_a, summary_b;
    bool reject_null = false;  // p < 0.05
};

std::vector<RunRecord> load_run_records(const std::string& dir);

/// Pairs two run directories by seed and runs the statistical comparison.
ComparisonReport compare_runs(const std::string& dir_a, const std::string& dir_b);
ComparisonReport compare_records(std::vector<RunRecord> a, std::vector<RunRecord> b);

std::string comparison_report_to_json(const ComparisonReport& report);

}  // namespace qfusion::stats
