// treegrad: generate keyword-classification treebanks, train RNN / RLSTM
// composers, evaluate checkpoints, collect gradient ratios and render reports.
//
// Exit codes: 0 success, 1 usage error, 2 runtime or data error.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "treegrad/diagnostics.hpp"
#include "treegrad/experiment.hpp"
#include "treegrad/report.hpp"

namespace {

using namespace treegrad;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

SplitSizes parse_sizes(const std::string& text) {
    std::vector<std::size_t> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_double(item);
        if (!v || *v < 0 || static_cast<double>(static_cast<std::size_t>(*v)) != *v) {
            throw UsageError("--sizes: '" + item + "' is not a count");
        }
        parts.push_back(static_cast<std::size_t>(*v));
    }
    if (parts.size() != 3) {
        throw UsageError("--sizes expects train,dev,test");
    }
    return {parts[0], parts[1], parts[2]};
}

struct GenArgs {
    int experiment = 1;
    int index = 1;
    std::string sizes = "10000,1000,1000";
    std::uint64_t seed = 42;
    std::string out;
};

struct TrainArgs {
    std::string data;
    std::string model = "rnn";
    std::size_t batch = 0;  // 0: model default
    double lr = 0.05;
    std::size_t patience = 5;
    std::size_t max_epochs = 100;
    std::size_t dim = kDefaultDim;
    std::uint64_t seed = 1;
    std::size_t runs = 5;
    std::size_t threads = 1;
    std::string out;
    std::string ratios;
    bool no_timing = false;
    bool quiet = false;
};

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
};

struct DiagnoseArgs {
    std::string checkpoint;
    std::string data;
    std::size_t epochs = 13;
    std::size_t batch = 0;
    double lr = 0.05;
    std::uint64_t seed = 1;
    std::string out = "ratios.csv";
    std::string summary;
};

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out = "report";
    int depth = 10;
    std::size_t min_count = 1;
};

TrainConfig config_for(ModelKind kind, std::size_t batch, double lr, std::uint64_t seed) {
    TrainConfig c = TrainConfig::defaults_for(kind);
    if (batch != 0) {
        c.batch_size = batch;
    }
    c.learning_rate = lr;
    c.seed = seed;
    return c;
}

int run_gen(const GenArgs& a) {
    const SplitSizes sizes = parse_sizes(a.sizes);
    if (a.experiment < 1 || a.experiment > 3) {
        throw UsageError("--experiment must be 1, 2 or 3");
    }
    if (a.index < 1 || a.index > 10) {
        throw UsageError("--i must be in 1..10");
    }
    const Dataset d = cmd_gen(a.experiment, a.index, sizes, a.seed, a.out);
    std::cout << "wrote " << d.train.size() << "/" << d.dev.size() << "/" << d.test.size()
              << " examples (experiment " << d.provenance.experiment << ", i=" << d.provenance.index
              << ") to " << a.out << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    ExperimentSpec spec;
    spec.model = parse_model_kind(a.model);
    spec.train = config_for(spec.model, a.batch, a.lr, a.seed);
    spec.train.patience = a.patience;
    spec.train.max_epochs = a.max_epochs;
    spec.train.dim = a.dim;
    spec.train.threads = a.threads;
    spec.train.record_time = !a.no_timing;
    spec.runs = a.runs;
    spec.out = a.out;

    const Dataset data = read_dataset(a.data);
    spec.experiment = data.provenance.experiment;
    spec.index = data.provenance.index;
    spec.sizes = data.provenance.sizes;
    spec.data_seed = data.provenance.seed;

    TrainOptions options;
    options.collect_ratios = !a.ratios.empty();
    if (options.collect_ratios) {
        options.ratios_name = a.ratios;
    }
    if (!a.quiet) {
        options.progress = [](const std::string& line) { std::cerr << line << "\n"; };
    }
    const TrainSummary s = cmd_train(spec, data, options);
    const auto d = s.test_accuracy();
    std::cout << to_string(spec.model) << " experiment " << data.provenance.experiment
              << " i=" << data.provenance.index << ": best test accuracy " << d.best
              << " (run " << s.best_run().run << "), quartiles " << d.q1 << " / " << d.median
              << " / " << d.q3 << " over " << s.runs.size() << " runs\n";
    return 0;
}

int run_eval(const EvalArgs& a) {
    const EvalResult r = cmd_eval(a.checkpoint, a.data, a.split);
    std::cout << "accuracy " << format_double(r.accuracy) << " on " << r.count << " " << a.split
              << " examples\n";
    return 0;
}

int run_diagnose(const DiagnoseArgs& a) {
    const Model probe = load_checkpoint(a.checkpoint);
    TrainConfig config = config_for(probe.kind(), a.batch, a.lr, a.seed);
    const auto records = cmd_diagnose(a.checkpoint, a.data, config, a.epochs);
    write_records_csv(records, a.out, probe.kind() == ModelKind::rlstm);
    if (!a.summary.empty() && !records.empty()) {
        write_summary_csv(summarize(records), a.summary);
    }
    std::cout << "wrote " << records.size() << " ratio records to " << a.out << "\n";
    return 0;
}

int run_report(const ReportArgs& a) {
    std::vector<std::filesystem::path> inputs(a.inputs.begin(), a.inputs.end());
    ReportOptions options;
    options.fixed_depth = a.depth;
    options.min_count = a.min_count;
    const auto written = cmd_report(inputs, a.out, options);
    for (const auto& p : written) {
        std::cout << p.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treegrad: recursive neural networks and recursive LSTMs on synthetic keyword "
                 "treebanks, with gradient-ratio diagnostics"};
    app.set_config("--config", "", "Read options from an INI/TOML file; flags override it");
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset directory");
    gen_cmd->add_option("--experiment", gen.experiment,
                        "1: length bands 10i-9..10i; 2: lengths 21..30, keyword depth i or i+1; "
                        "3: same data as experiment 1, i=3")
        ->capture_default_str();
    gen_cmd->add_option("--i", gen.index, "Dataset index 1..10")->capture_default_str();
    gen_cmd->add_option("--sizes", gen.sizes, "Split sizes train,dev,test (standard: 10000,1000,1000)")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Generation seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train independent runs on a dataset directory");
    train_cmd->add_option("--data", tr.data, "Dataset directory written by gen")->required();
    train_cmd->add_option("--model", tr.model, "rnn or rlstm")
        ->check(CLI::IsMember({"rnn", "rlstm"}))
        ->capture_default_str();
    train_cmd->add_option("--batch", tr.batch, "Mini-batch size (standard: 20 for rnn, 5 for rlstm; 0 = that default)")
        ->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "AdaGrad learning rate (standard: 0.05)")->capture_default_str();
    train_cmd->add_option("--patience", tr.patience, "Epochs without dev improvement before stopping (standard: 5)")
        ->capture_default_str();
    train_cmd->add_option("--max-epochs", tr.max_epochs, "Epoch cap")->capture_default_str();
    train_cmd->add_option("--dim", tr.dim, "Representation/memory dimension (standard: 50)")
        ->capture_default_str();
    train_cmd->add_option("--seed", tr.seed, "Base seed; run k uses a seed derived from it")
        ->capture_default_str();
    train_cmd->add_option("--runs", tr.runs, "Independent runs (standard: 5)")->capture_default_str();
    train_cmd->add_option("--threads", tr.threads, "Threads per mini-batch (results are identical for any value)")
        ->capture_default_str();
    train_cmd->add_option("--out", tr.out, "Output directory")->required();
    train_cmd->add_option("--ratios", tr.ratios,
                          "Collect keyword/root gradient ratios into run<k>/<NAME> every epoch");
    train_cmd->add_flag("--no-timing", tr.no_timing, "Write 0 in the seconds column so logs compare byte-for-byte");
    train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    eval_cmd->add_option("--split", ev.split, "train, dev or test")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->capture_default_str();

    DiagnoseArgs dg;
    auto* diag_cmd = app.add_subcommand(
        "diagnose", "Continue training a checkpoint and record gradient ratios every epoch");
    diag_cmd->add_option("--checkpoint", dg.checkpoint, "Checkpoint file")->required();
    diag_cmd->add_option("--data", dg.data, "Dataset directory (train split is used)")->required();
    diag_cmd->add_option("--epochs", dg.epochs, "Epochs of continued training")->capture_default_str();
    diag_cmd->add_option("--batch", dg.batch, "Mini-batch size (0 = 20 for rnn, 5 for rlstm)")
        ->capture_default_str();
    diag_cmd->add_option("--lr", dg.lr, "AdaGrad learning rate (standard: 0.05)")->capture_default_str();
    diag_cmd->add_option("--seed", dg.seed, "Shuffle seed")->capture_default_str();
    diag_cmd->add_option("--out", dg.out, "Ratio records CSV")->capture_default_str();
    diag_cmd->add_option("--summary", dg.summary, "Also write the per-(epoch, depth) summary CSV here");

    ReportArgs rp;
    auto* report_cmd = app.add_subcommand("report", "Render CSV tables and SVG figures from results");
    report_cmd->add_option("inputs", rp.inputs, "Result directories or CSV files")->required();
    report_cmd->add_option("--out", rp.out, "Output directory")->capture_default_str();
    report_cmd->add_option("--depth", rp.depth, "Keyword depth for the ratio-per-epoch figure")
        ->capture_default_str();
    report_cmd->add_option("--min-count", rp.min_count, "Hide summary cells with fewer records")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*gen_cmd) {
            return run_gen(gen);
        }
        if (*train_cmd) {
            return run_train(tr);
        }
        if (*eval_cmd) {
            return run_eval(ev);
        }
        if (*diag_cmd) {
            return run_diagnose(dg);
        }
        if (*report_cmd) {
            return run_report(rp);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
