#include "qfusion/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "qfusion/nn.hpp"
#include "qfusion/rng.hpp"

namespace qfusion::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamDropout = 21;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    return {
        {"model", model},
        {"seed", std::to_string(seed)},
        {"data", data_path},
        {"out", out_dir},
        {"lr", fmt(lr)},
        {"weight_decay", fmt(weight_decay)},
        {"max_lr", fmt(max_lr)},
        {"warmup_frac", fmt(warmup_frac)},
        {"init_div", fmt(init_div)},
        {"final_div", fmt(final_div)},
        {"batch_size", std::to_string(batch_size)},
        {"max_epochs", std::to_string(max_epochs)},
        {"patience", std::to_string(patience)},
        {"clip_norm", fmt(clip_norm)},
        {"label_smoothing", fmt(label_smoothing)},
        {"dropout", fmt(dropout)},
        {"positive_class", std::to_string(positive_class)},
        {"swap_labels", swap_labels ? "1" : "0"},
    };
}

void RunConfig::set_field(const std::string& key, const std::string& value) {
    auto as_u64 = [&] { return std::stoull(value); };
    auto as_f64 = [&] { return std::stod(value); };
    if (key == "model") model = value;
    else if (key == "seed") seed = as_u64();
    else if (key == "data") data_path = value;
    else if (key == "out") out_dir = value;
    else if (key == "lr") lr = as_f64();
    else if (key == "weight_decay") weight_decay = as_f64();
    else if (key == "max_lr") max_lr = as_f64();
    else if (key == "warmup_frac") warmup_frac = as_f64();
    else if (key == "init_div") init_div = as_f64();
    else if (key == "final_div") final_div = as_f64();
    else if (key == "batch_size") batch_size = as_u64();
    else if (key == "max_epochs") max_epochs = as_u64();
    else if (key == "patience") patience = as_u64();
    else if (key == "clip_norm") clip_norm = as_f64();
    else if (key == "label_smoothing") label_smoothing = as_f64();
    else if (key == "dropout") dropout = as_f64();
    else if (key == "positive_class") positive_class = std::stoi(value);
    else if (key == "swap_labels") swap_labels = (value == "1" || value == "true");
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(std::vector<NamedParam>& params, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("AdamW: learning rate must be positive");
    if (keys_.empty()) {
        for (NamedParam& p : params) {
            keys_.push_back(p.tensor.data());
            m_.emplace_back(p.tensor.numel(), 0.0);
            v_.emplace_back(p.tensor.numel(), 0.0);
        }
    } else if (keys_.size() != params.size()) {
        throw std::logic_error("AdamW: parameter set changed between steps");
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& t = params[pi].tensor;
        if (t.data() != keys_[pi])
            throw std::logic_error("AdamW: parameter order changed between steps");
        auto g = t.grad();
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        double* w = t.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("AdamW: non-finite gradient in parameter '" +
                                         params[pi].name + "'");
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_) + lr * weight_decay_ * w[i];
        }
    }
}

double OneCycleSchedule::lr_at(std::size_t step) const {
    if (total_steps == 0 || step >= total_steps)
        throw std::out_of_range("OneCycleSchedule: step " + std::to_string(step) +
                                " outside [0," + std::to_string(total_steps) + ")");
    const double initial = max_lr / init_div;
    const double final_lr = max_lr / final_div;
    if (total_steps == 1) return max_lr;

    std::size_t warmup_steps = static_cast<std::size_t>(
        std::llround(warmup_frac * static_cast<double>(total_steps)));
    warmup_steps = std::clamp<std::size_t>(warmup_steps, 1, total_steps - 1);

    const double pi = 3.14159265358979323846;
    if (step <= warmup_steps) {
        const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
        return initial + (max_lr - initial) * (1.0 - std::cos(pi * t)) / 2.0;
    }
    const double t = static_cast<double>(step - warmup_steps) /
                     static_cast<double>(total_steps - 1 - warmup_steps);
    return final_lr + (max_lr - final_lr) * (1.0 + std::cos(pi * t)) / 2.0;
}

double clip_grad_norm(std::vector<NamedParam>& params, double max_norm) {
    if (max_norm <= 0.0)
        throw std::invalid_argument("clip_grad_norm: max_norm must be positive");
    double sq = 0.0;
    for (NamedParam& p : params)
        for (double g : p.tensor.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (NamedParam& p : params)
            for (double& g : p.tensor.grad()) g *= scale;
    }
    return norm;
}

bool EarlyStopper::observe(std::size_t epoch, double value) {
    if (value > best_value) {  // strict: ties keep the earlier epoch
        best_value = value;
        best_epoch = epoch;
        since_improvement = 0;
        return true;
    }
    ++since_improvement;
    return false;
}

EvalOutcome evaluate_split(Model& model, const data::SplitDataset& split,
                           const RunConfig& config) {
    EvalOutcome out;
    Tape no_tape(false);
    Xoshiro256 unused_rng(0);  // eval-mode dropout never draws
    const auto batches =
        data::make_batches(split.count, config.batch_size, 0, 0, /*shuffle=*/false);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : batches) {
        Tensor x = split.batch_images(batch);
        const std::vector<int> labels = split.batch_labels(batch);
        Tensor logits = model.forward(no_tape, x, /*training=*/false, unused_rng);
        Tensor loss = nn::cross_entropy_smoothed(no_tape, logits, labels,
                                                 config.label_smoothing);
        loss_sum += loss.item() * static_cast<double>(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double* row = logits.data() + i * 2;
            const int pred = row[1] > row[0] ? 1 : 0;
            out.predictions.push_back(pred);
            if (pred == labels[i]) ++correct;
        }
    }
    out.loss = loss_sum / static_cast<double>(split.count);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(split.count);
    return out;
}

namespace {

void write_curves_csv(const std::string& path, const std::vector<EpochRecord>& curves) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("fit: cannot write '" + path + "'");
    out << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    char buf[256];
    for (const EpochRecord& r : curves) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr);
        out << buf;
    }
}

void write_confusion_csv(const std::string& path, const stats::ConfusionMatrix& cm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("fit: cannot write '" + path + "'");
    out << "tp,fp,tn,fn,positive_class\n";
    out << cm.tp << "," << cm.fp << "," << cm.tn << "," << cm.fn << ","
        << cm.positive_class << "\n";
}

json metric_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

json metrics_to_json(const stats::MetricSet& m, double loss) {
    return json{{"accuracy", metric_json(m.accuracy)},
                {"recall", metric_json(m.recall)},
                {"precision", metric_json(m.precision)},
                {"f1", metric_json(m.f1)},
                {"loss", loss}};
}

}  // namespace

std::string run_result_to_json(const RunResult& result, const RunConfig& config) {
    json j;
    j["model"] = result.model;
    j["seed"] = result.seed;
    json cfg = json::object();
    for (const auto& [k, v] : config.echo()) cfg[k] = v;
    j["config"] = cfg;
    j["param_counts"] = {{"backbone", result.param_counts.backbone},
                         {"projections", result.param_counts.projections},
                         {"circuits", result.param_counts.circuits},
                         {"fusion", result.param_counts.fusion},
                         {"classifier", result.param_counts.classifier},
                         {"total", result.param_counts.total()}};
    j["epochs_trained"] = result.curves.size();
    j["total_steps_planned"] = result.total_steps;
    j["stopped_early"] = result.stopped_early;
    j["best_epoch"] = result.best_epoch;
    j["best_val_acc"] = result.best_val_acc;
    const EpochRecord& best = result.curves.at(result.best_epoch);
    j["best_epoch_metrics"] = {{"train_acc", best.train_acc},
                               {"val_acc", best.val_acc},
                               {"train_loss", best.train_loss},
                               {"val_loss", best.val_loss}};
    j["test"] = metrics_to_json(result.test_metrics, result.test_loss);
    j["test_swapped_positive"] =
        metrics_to_json(result.test_metrics_swapped, result.test_loss);
    j["test_confusion"] = {{"tp", result.test_confusion.tp},
                           {"fp", result.test_confusion.fp},
                           {"tn", result.test_confusion.tn},
                           {"fn", result.test_confusion.fn},
                           {"positive_class", result.test_confusion.positive_class}};
    return j.dump(2);
}

RunResult fit(Model& model, const data::Dataset& dataset, const RunConfig& config) {
    if (dataset.train.count == 0) throw std::invalid_argument("fit: empty train split");
    if (config.max_epochs == 0) throw std::invalid_argument("fit: max_epochs must be >= 1");

    const std::size_t batches_per_epoch =
        (dataset.train.count + config.batch_size - 1) / config.batch_size;

    RunResult result;
    result.seed = model.seed();
    result.model = model_kind_name(model.kind());
    result.total_steps = config.max_epochs * batches_per_epoch;
    result.param_counts = model.param_counts();

    std::vector<NamedParam> params = model.parameters();
    AdamW optimizer(0.9, 0.999, 1e-8, config.weight_decay);
    OneCycleSchedule schedule{config.max_lr, config.warmup_frac, config.init_div,
                              config.final_div, result.total_steps};
    EarlyStopper stopper;
    stopper.patience = config.patience;
    Xoshiro256 dropout_rng(derive_stream_seed(config.seed, kStreamDropout));

    std::map<std::string, std::vector<double>> best_snapshot;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto batches = data::make_batches(dataset.train.count, config.batch_size,
                                                config.seed, epoch, /*shuffle=*/true);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        double last_lr = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            Tape tape;
            Tensor x = dataset.train.batch_images(batch);
            const std::vector<int> labels = dataset.train.batch_labels(batch);
            Tensor logits = model.forward(tape, x, /*training=*/true, dropout_rng);
            Tensor loss = nn::cross_entropy_smoothed(tape, logits, labels,
                                                     config.label_smoothing);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error(
                    "fit: non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(bi));

            for (NamedParam& p : params) p.tensor.zero_grad();
            tape.backward(loss);
            clip_grad_norm(params, config.clip_norm);
            last_lr = schedule.lr_at(global_step);
            optimizer.step(params, last_lr);
            ++global_step;

            loss_sum += loss.item() * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double* row = logits.data() + i * 2;
                const int pred = row[1] > row[0] ? 1 : 0;
                if (pred == labels[i]) ++correct;
            }
        }

        const EvalOutcome val = evaluate_split(model, dataset.val, config);
        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(dataset.train.count);
        record.train_acc =
            static_cast<double>(correct) / static_cast<double>(dataset.train.count);
        record.val_loss = val.loss;
        record.val_acc = val.accuracy;
        record.lr = last_lr;
        result.curves.push_back(record);

        if (stopper.observe(epoch, val.accuracy))
            best_snapshot = snapshot_parameters(model);
        if (stopper.should_stop()) {
            result.stopped_early = true;
            break;
        }
    }

    result.best_epoch = stopper.best_epoch;
    result.best_val_acc = stopper.best_value;
    restore_parameters(model, best_snapshot);

    const EvalOutcome test = evaluate_split(model, dataset.test, config);
    result.test_loss = test.loss;
    result.test_confusion = stats::confusion_from_predictions(
        dataset.test.labels, test.predictions, config.positive_class);
    result.test_metrics = stats::compute_metrics(result.test_confusion);
    result.test_metrics_swapped =
        stats::compute_metrics(result.test_confusion.swapped());

    fs::create_directories(config.out_dir);
    write_curves_csv((fs::path(config.out_dir) / "curves.csv").string(), result.curves);
    write_confusion_csv((fs::path(config.out_dir) / "confusion.csv").string(),
                        result.test_confusion);
    {
        std::ofstream out(fs::path(config.out_dir) / "result.json", std::ios::binary);
        out << run_result_to_json(result, config) << "\n";
    }
    save_checkpoint((fs::path(config.out_dir) / "model.ckpt").string(), model);
    return result;
}

}  // namespace qfusion::train
