#include "qfusion/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "qfusion/branches.hpp"
#include "qfusion/data.hpp"
#include "qfusion/experiment.hpp"
#include "qfusion/models.hpp"
#include "qfusion/quantum.hpp"
#include "qfusion/stats.hpp"
#include "qfusion/train.hpp"

namespace qfusion::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDataEnvVar = "QFUSION_DATA";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void apply_config_file(train::RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config file '" + path + "' is not readable");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const char* ws = " \t\r";
            const std::size_t b = s.find_first_not_of(ws);
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(ws) - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config file '" + path + "' line " +
                             std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            config.set_field(key, value);
        } catch (const std::exception& e) {
            throw UsageError("config file '" + path + "' line " +
                             std::to_string(line_no) + ": " + e.what());
        }
    }
}

// Config-file values must load before CLI11 assigns flag values, so the
// flag wins; scan for --config ahead of the real parse.
std::string find_config_arg(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

void add_hyperparam_options(CLI::App* cmd, train::RunConfig& config) {
    cmd->add_option("--lr", config.lr, "optimizer base learning rate");
    cmd->add_option("--weight-decay", config.weight_decay, "decoupled weight decay");
    cmd->add_option("--max-lr", config.max_lr, "one-cycle peak learning rate");
    cmd->add_option("--warmup-frac", config.warmup_frac, "one-cycle warmup fraction");
    cmd->add_option("--init-div", config.init_div, "initial lr divisor");
    cmd->add_option("--final-div", config.final_div, "final lr divisor");
    cmd->add_option("--batch-size", config.batch_size, "minibatch size");
    cmd->add_option("--max-epochs", config.max_epochs, "epoch cap");
    cmd->add_option("--patience", config.patience, "early-stopping patience (epochs)");
    cmd->add_option("--clip-norm", config.clip_norm, "gradient clipping max norm");
    cmd->add_option("--label-smoothing", config.label_smoothing,
                    "cross-entropy smoothing factor");
    cmd->add_option("--dropout", config.dropout, "dropout rate");
    cmd->add_option("--positive-class", config.positive_class,
                    "class id treated as positive in metrics");
    cmd->add_flag("--swap-labels", config.swap_labels,
                  "swap the 0/1 label coding of the archive");
    cmd->add_option("--config", "flat key = value config file")
        ->check(CLI::ExistingFile);
}

std::string resolve_data_path(const std::string& flag_value) {
    std::string path = flag_value;
    if (path.empty()) {
        if (const char* env = std::getenv(kDataEnvVar)) path = env;
    }
    if (path.empty())
        throw UsageError(std::string("no data archive given (use --data, a config "
                                     "file, or ") + kDataEnvVar + ")");
    if (!fs::exists(path))
        throw UsageError("data archive '" + path + "' does not exist");
    return path;
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

int cmd_train(train::RunConfig config) {
    config.data_path = resolve_data_path(config.data_path);
    const data::Dataset dataset = data::load_archive(config.data_path, config.swap_labels);
    auto model = make_model(model_kind_from_name(config.model), config.seed);
    set_dropout_rate(*model, config.dropout);
    const train::RunResult result = train::fit(*model, dataset, config);
    std::printf("trained %s seed=%llu: best epoch %zu, val acc %.4f, test acc %s\n",
                result.model.c_str(),
                static_cast<unsigned long long>(result.seed), result.best_epoch,
                result.best_val_acc, fmt_opt(result.test_metrics.accuracy).c_str());
    std::printf("artifacts in %s: curves.csv result.json confusion.csv model.ckpt\n",
                config.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_flag,
             const std::string& split_name, const std::string& out_dir,
             int positive_class, bool swap_labels) {
    const std::string data_path = resolve_data_path(data_flag);
    const CheckpointInfo info = peek_checkpoint(checkpoint_path);
    auto model = make_model(info.kind, info.seed);
    load_checkpoint(checkpoint_path, *model);

    const data::Dataset dataset = data::load_archive(data_path, swap_labels);
    const data::SplitDataset* split = nullptr;
    if (split_name == "test") split = &dataset.test;
    else if (split_name == "val") split = &dataset.val;
    else if (split_name == "train") split = &dataset.train;
    else throw UsageError("unknown split '" + split_name + "'");

    train::RunConfig config;
    config.positive_class = positive_class;
    const train::EvalOutcome outcome = train::evaluate_split(*model, *split, config);
    const stats::ConfusionMatrix cm = stats::confusion_from_predictions(
        split->labels, outcome.predictions, positive_class);
    const stats::MetricSet metrics = stats::compute_metrics(cm);
    const stats::MetricSet swapped = stats::compute_metrics(cm.swapped());

    std::printf("%s split: %zu samples, model %s\n", split_name.c_str(), split->count,
                model_kind_name(info.kind).c_str());
    std::printf("confusion (positive=%d): TP=%llu FP=%llu TN=%llu FN=%llu\n",
                positive_class, static_cast<unsigned long long>(cm.tp),
                static_cast<unsigned long long>(cm.fp),
                static_cast<unsigned long long>(cm.tn),
                static_cast<unsigned long long>(cm.fn));
    std::printf("accuracy=%s recall=%s precision=%s f1=%s loss=%.4f\n",
                fmt_opt(metrics.accuracy).c_str(), fmt_opt(metrics.recall).c_str(),
                fmt_opt(metrics.precision).c_str(), fmt_opt(metrics.f1).c_str(),
                outcome.loss);

    fs::create_directories(out_dir);
    json j;
    j["split"] = split_name;
    j["model"] = model_kind_name(info.kind);
    j["samples"] = split->count;
    j["loss"] = outcome.loss;
    auto mset = [](const stats::MetricSet& m) {
        auto v = [](const std::optional<double>& x) {
            return x ? json(*x) : json(nullptr);
        };
        return json{{"accuracy", v(m.accuracy)},
                    {"recall", v(m.recall)},
                    {"precision", v(m.precision)},
                    {"f1", v(m.f1)}};
    };
    j["metrics"] = mset(metrics);
    j["metrics_swapped_positive"] = mset(swapped);
    j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn},
                      {"fn", cm.fn}, {"positive_class", cm.positive_class}};
    {
        std::ofstream out(fs::path(out_dir) / ("eval_" + split_name + ".json"),
                          std::ios::binary);
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / ("confusion_" + split_name + ".csv"),
                          std::ios::binary);
        out << "tp,fp,tn,fn,positive_class\n"
            << cm.tp << "," << cm.fp << "," << cm.tn << "," << cm.fn << ","
            << cm.positive_class << "\n";
    }
    return 0;
}

void print_comparison(const stats::ComparisonReport& report) {
    std::printf("paired runs: %zu seeds\n", report.seeds.size());
    std::printf("mean test accuracy: %s=%.4f (std %.4f), %s=%.4f (std %.4f)\n",
                report.summary_a.model.c_str(), report.summary_a.mean_accuracy,
                report.summary_a.std_accuracy, report.summary_b.model.c_str(),
                report.summary_b.mean_accuracy, report.summary_b.std_accuracy);
    std::printf("wilcoxon one-sided p = %.6f%s\n", report.wilcoxon.p,
                report.wilcoxon.degenerate ? " (degenerate: all differences zero)" : "");
    if (report.effect_size.d)
        std::printf("cohens d = %.4f\n", *report.effect_size.d);
    else
        std::printf("cohens d undefined (zero pooled variance)\n");
    std::printf("%s\n", report.reject_null ? "reject H0 at 0.05"
                                           : "fail to reject H0 at 0.05");
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b,
                const std::string& out_path) {
    const stats::ComparisonReport report = stats::compare_runs(dir_a, dir_b);
    {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("compare: cannot write '" + out_path + "'");
        out << stats::comparison_report_to_json(report) << "\n";
    }
    print_comparison(report);
    std::printf("report written to %s\n", out_path.c_str());
    return 0;
}

std::vector<double> load_params_file(const std::string& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw UsageError("params file '" + path + "' is not readable");
    std::vector<double> params;
    double v;
    while (in >> v) params.push_back(v);
    if (params.size() != expected)
        throw UsageError("params file '" + path + "' holds " +
                         std::to_string(params.size()) + " values, circuit needs " +
                         std::to_string(expected));
    return params;
}

int cmd_circuit_dump(const std::string& circuit_name, const std::string& params_arg,
                     bool with_unitary, const std::string& out_path) {
    quantum::CircuitSpec spec;
    if (circuit_name == "amplitude") spec = make_amplitude_circuit();
    else if (circuit_name == "angle") spec = make_angle_circuit();
    else throw UsageError("unknown circuit '" + circuit_name +
                          "' (expected amplitude or angle)");

    std::vector<double> params(static_cast<std::size_t>(spec.n_params), 0.0);
    if (params_arg != "zeros")
        params = load_params_file(params_arg, params.size());
    const std::vector<double> inputs(static_cast<std::size_t>(spec.n_inputs), 0.0);

    std::ostringstream text;
    text << quantum::dump_circuit(spec, inputs, params);
    if (with_unitary) {
        // dense matrix of the variational block only (embedding excluded)
        std::vector<quantum::GateOp> variational;
        for (const quantum::GateOp& g : spec.gates)
            if (g.source != quantum::AngleSource::Input) variational.push_back(g);
        const quantum::DenseMatrix u = quantum::circuit_unitary_dense(
            spec.n_qubits, variational, params, inputs);
        text << "unitary " << u.dim << "\n";
        char buf[96];
        for (std::size_t r = 0; r < u.dim; ++r) {
            for (std::size_t c = 0; c < u.dim; ++c) {
                std::snprintf(buf, sizeof(buf), "%s(%.17g,%.17g)", c ? " " : "",
                              u.at(r, c).real(), u.at(r, c).imag());
                text << buf;
            }
            text << "\n";
        }
    }

    if (out_path.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("circuit dump: cannot write '" + out_path + "'");
        out << text.str();
    }
    return 0;
}

int cmd_data_synth(const std::string& out_path, std::size_t n_train, std::size_t n_val,
                   std::size_t n_test, std::uint64_t seed) {
    data::write_synthetic_archive(out_path, n_train, n_val, n_test, seed);
    std::printf("wrote synthetic archive %s (train=%zu val=%zu test=%zu seed=%llu)\n",
                out_path.c_str(), n_train, n_val, n_test,
                static_cast<unsigned long long>(seed));
    return 0;
}

int cmd_run_experiment(train::RunConfig base, const std::string& out_dir,
                       const std::string& seeds_arg, std::size_t jobs) {
    base.data_path = resolve_data_path(base.data_path);
    experiment::ExperimentConfig config;
    config.base = base;
    config.out_dir = out_dir;
    config.jobs = jobs;
    config.seeds.clear();
    std::stringstream ss(seeds_arg);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) config.seeds.push_back(std::stoull(tok));
    if (config.seeds.empty()) throw UsageError("run-experiment: empty --seeds list");

    const data::Dataset dataset = data::load_archive(base.data_path, base.swap_labels);
    const experiment::ExperimentResult result = experiment::run_experiment(config, dataset);
    std::printf("%s", experiment::summary_csv(result.report).c_str());
    print_comparison(result.report);
    std::printf("report: %s\nsummary: %s\n", result.report_path.c_str(),
                result.summary_path.c_str());
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"hybrid quantum-classical CNN toolkit"};
    app.require_subcommand(1);

    train::RunConfig config;
    const std::string config_file = find_config_arg(argc, argv);

    // train
    CLI::App* train_cmd = app.add_subcommand("train", "train one model for one seed");
    train_cmd->add_option("--model", config.model, "hybrid or classical");
    train_cmd->add_option("--seed", config.seed, "run seed");
    train_cmd->add_option("--data", config.data_path, "path to the data archive");
    train_cmd->add_option("--out", config.out_dir, "output directory");
    add_hyperparam_options(train_cmd, config);

    // eval
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_checkpoint, eval_data, eval_split = "test", eval_out = ".";
    int eval_positive = 1;
    bool eval_swap = false;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data, "path to the data archive");
    eval_cmd->add_option("--split", eval_split, "train, val or test");
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--positive-class", eval_positive, "positive class id");
    eval_cmd->add_flag("--swap-labels", eval_swap, "swap the 0/1 label coding");

    // compare
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "statistical comparison of two run sets");
    std::string dir_a, dir_b, compare_out = "report.json";
    compare_cmd->add_option("--runs-a", dir_a, "run directory A")->required();
    compare_cmd->add_option("--runs-b", dir_b, "run directory B")->required();
    compare_cmd->add_option("--out", compare_out, "report output path");

    // circuit dump
    CLI::App* circuit_cmd = app.add_subcommand("circuit", "circuit inspection");
    CLI::App* dump_cmd = circuit_cmd->add_subcommand("dump", "emit the gate list");
    std::string dump_circuit_name, dump_params = "zeros", dump_out;
    bool dump_unitary = false;
    dump_cmd->add_option("--circuit", dump_circuit_name, "amplitude or angle")
        ->required();
    dump_cmd->add_option("--params", dump_params,
                         "'zeros' or a file of parameter values");
    dump_cmd->add_flag("--unitary", dump_unitary,
                       "also emit the dense variational-block unitary");
    dump_cmd->add_option("--out", dump_out, "write to a file instead of stdout");
    circuit_cmd->require_subcommand(1);

    // data synth
    CLI::App* data_cmd = app.add_subcommand("data", "dataset utilities");
    CLI::App* synth_cmd = data_cmd->add_subcommand("synth", "emit a synthetic archive");
    std::string synth_out;
    std::size_t synth_train = 16, synth_val = 8, synth_test = 8;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--out", synth_out, "archive path")->required();
    synth_cmd->add_option("--train", synth_train, "training samples");
    synth_cmd->add_option("--val", synth_val, "validation samples");
    synth_cmd->add_option("--test", synth_test, "test samples");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    data_cmd->require_subcommand(1);

    // run-experiment
    CLI::App* exp_cmd = app.add_subcommand(
        "run-experiment", "full protocol: every seed for both models, then compare");
    std::string exp_out = "experiment", exp_seeds = "1,2,3,4,5";
    std::size_t exp_jobs = std::max(1u, std::thread::hardware_concurrency());
    exp_cmd->add_option("--data", config.data_path, "path to the data archive");
    exp_cmd->add_option("--out", exp_out, "experiment output directory");
    exp_cmd->add_option("--seeds", exp_seeds, "comma-separated seed list");
    exp_cmd->add_option("--jobs", exp_jobs, "parallel fits");
    add_hyperparam_options(exp_cmd, config);

    try {
        if (!config_file.empty()) apply_config_file(config, config_file);
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config);
        if (eval_cmd->parsed())
            return cmd_eval(eval_checkpoint, eval_data, eval_split, eval_out,
                            eval_positive, eval_swap);
        if (compare_cmd->parsed()) return cmd_compare(dir_a, dir_b, compare_out);
        if (circuit_cmd->parsed() && dump_cmd->parsed())
            return cmd_circuit_dump(dump_circuit_name, dump_params, dump_unitary,
                                    dump_out);
        if (data_cmd->parsed() && synth_cmd->parsed())
            return cmd_data_synth(synth_out, synth_train, synth_val, synth_test,
                                  synth_seed);
        if (exp_cmd->parsed())
            return cmd_run_experiment(config, exp_out, exp_seeds, exp_jobs);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const data::LoadError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace qfusion::cli
