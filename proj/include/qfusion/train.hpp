#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qfusion/data.hpp"
#include "qfusion/models.hpp"
#include "qfusion/stats.hpp"
#include "qfusion/tensor.hpp"

namespace qfusion::train {

/// Every knob of a training run, defaulted to the reference protocol.
struct RunConfig {
    std::string model = "hybrid";
    std::uint64_t seed = 1;
    std::string data_path;
    std::string out_dir = ".";

    double lr = 0.001;           // optimizer base learning rate
    double weight_decay = 0.01;  // decoupled
    double max_lr = 0.002;       // schedule peak
    double warmup_frac = 0.3;
    double init_div = 25.0;
    double final_div = 1e4;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 80;
    std::size_t patience = 25;
    double clip_norm = 1.0;
    double label_smoothing = 0.1;
    double dropout = 0.3;
    int positive_class = 1;  // benign
    bool swap_labels = false;

    /// Flat key=value view, echoed verbatim into result.json.
    std::vector<std::pair<std::string, std::string>> echo() const;
    /// Applies one "key = value" config-file line.
    void set_field(const std::string& key, const std::string& value);
};

/// AdamW with decoupled weight decay; moments keyed by parameter identity.
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
          double weight_decay = 0.01);

    /// w -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * w.
    /// Throws on a non-finite gradient, naming the parameter.
    void step(std::vector<NamedParam>& params, double lr);
    std::size_t step_count() const { return step_count_; }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;  // per registered parameter
    std::vector<const void*> keys_;
};

/// Cosine one-cycle policy: ramp from max_lr/init_div to max_lr over the
/// warmup fraction of total_steps, then anneal to max_lr/final_div. Both
/// phases are half-cosines; the peak is hit exactly at the warmup boundary.
struct OneCycleSchedule {
    double max_lr = 0.002;
    double warmup_frac = 0.3;
    double init_div = 25.0;
    double final_div = 1e4;
    std::size_t total_steps = 0;

    double lr_at(std::size_t step) const;  // step in [0, total_steps)
};

/// Scales all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm; returns the pre-clip norm.
double clip_grad_norm(std::vector<NamedParam>& params, double max_norm);

/// Tracks the best validation accuracy; ties keep the earlier epoch.
struct EarlyStopper {
    std::size_t patience = 25;
    double best_value = -1.0;
    std::size_t best_epoch = 0;
    std::size_t since_improvement = 0;

    /// Returns true if `value` is a new best.
    bool observe(std::size_t epoch, double value);
    bool should_stop() const { return since_improvement >= patience; }
};

struct EpochRecord {
    std::size_t epoch;
    double train_loss, train_acc, val_loss, val_acc, lr;
};

struct RunResult {
    std::uint64_t seed = 0;
    std::string model;
    std::vector<EpochRecord> curves;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    bool stopped_early = false;
    std::size_t total_steps = 0;

    stats::ConfusionMatrix test_confusion;   // positive class per config
    stats::MetricSet test_metrics;           // positive class per config
    stats::MetricSet test_metrics_swapped;   // other orientation
    double test_loss = 0.0;

    ParamCounts param_counts;
};

struct EvalOutcome {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> predictions;
};

/// Eval-mode pass over one split (fixed batch order, no dropout).
EvalOutcome evaluate_split(Model& model, const data::SplitDataset& split,
                           const RunConfig& config);

/// The full training protocol: shuffled minibatches, smoothed cross
/// entropy, gradient clipping, AdamW under the one-cycle schedule, early
/// stopping on validation accuracy, best-checkpoint test evaluation.
/// Writes curves.csv, result.json, confusion.csv and model.ckpt into
/// config.out_dir. Deterministic given (model kind, seed, config, data).
RunResult fit(Model& model, const data::Dataset& dataset, const RunConfig& config);

/// result.json serialization (shared with the CLI and experiment driver).
std::string run_result_to_json(const RunResult& result, const RunConfig& config);

}  // namespace qfusion::train
