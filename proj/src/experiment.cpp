#include "qfusion/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace qfusion::experiment {

namespace fs = std::filesystem;

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const data::Dataset& dataset) {
    if (config.seeds.empty())
        throw std::invalid_argument("run_experiment: empty seed set");

    struct Task {
        ModelKind kind;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (ModelKind kind : {ModelKind::Hybrid, ModelKind::Classical})
        for (std::uint64_t seed : config.seeds) tasks.push_back({kind, seed});

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::vector<std::string> errors;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            try {
                train::RunConfig run = config.base;
                run.model = model_kind_name(task.kind);
                run.seed = task.seed;
                run.out_dir = (fs::path(config.out_dir) / run.model /
                               ("seed-" + std::to_string(task.seed)))
                                  .string();
                auto model = make_model(task.kind, task.seed);
                set_dropout_rate(*model, run.dropout);
                train::fit(*model, dataset, run);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors.push_back(model_kind_name(task.kind) + "/seed-" +
                                 std::to_string(task.seed) + ": " + e.what());
            }
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (!errors.empty()) {
        std::string msg = "run_experiment: " + std::to_string(errors.size()) +
                          " run(s) failed:";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }

    ExperimentResult result;
    result.report =
        stats::compare_runs((fs::path(config.out_dir) / "hybrid").string(),
                            (fs::path(config.out_dir) / "classical").string());
    result.report_path = (fs::path(config.out_dir) / "report.json").string();
    result.summary_path = (fs::path(config.out_dir) / "summary.csv").string();
    {
        std::ofstream out(result.report_path, std::ios::binary);
        out << stats::comparison_report_to_json(result.report) << "\n";
    }
    {
        std::ofstream out(result.summary_path, std::ios::binary);
        out << summary_csv(result.report);
    }
    return result;
}

std::string summary_csv(const stats::ComparisonReport& report) {
    std::string out =
        "model,train_accuracy,val_accuracy,train_loss,val_loss,"
        "test_accuracy,recall,precision,f1\n";
    auto cell = [](const std::optional<double>& v) -> std::string {
        if (!v) return "";  // undefined metric, not zero
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", *v);
        return buf;
    };
    auto row = [&](const stats::GroupSummary& s) {
        char buf[512];
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%s,%s,%s\n",
                      s.model.c_str(), s.mean_train_acc, s.mean_val_acc,
                      s.mean_train_loss, s.mean_val_loss, s.mean_accuracy,
                      cell(s.mean_recall).c_str(), cell(s.mean_precision).c_str(),
                      cell(s.mean_f1).c_str());
        out += buf;
    };
    row(report.summary_a);
    row(report.summary_b);
    return out;
}

}  // namespace qfusion::experiment
