#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "treegrad/diagnostics.hpp"
#include "treegrad/model.hpp"
#include "treegrad/trainer.hpp"
#include "treegrad/treebank.hpp"

namespace treegrad {

/// A complete, reproducible description of one experiment cell.
struct ExperimentSpec {
    int experiment = 1;  // 1, 2, or 3 (3 = Experiment-1 data, index 3, with ratio collection)
    int index = 1;
    ModelKind model = ModelKind::rnn;
    SplitSizes sizes;
    std::uint64_t data_seed = 42;
    TrainConfig train = TrainConfig::defaults_for(ModelKind::rnn);
    std::size_t runs = 5;
    std::filesystem::path out;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    /// Experiment id used for data generation (3 maps to 1).
    int data_experiment() const noexcept { return experiment == 3 ? 1 : experiment; }
};

/// Generates the dataset described by (experiment, index, sizes, seed).
Dataset generate_dataset(int experiment, int index, SplitSizes sizes, std::uint64_t seed);

/// Writes train/dev/test + meta into `dir`; returns the dataset.
Dataset cmd_gen(int experiment, int index, SplitSizes sizes, std::uint64_t seed,
                const std::filesystem::path& dir);

struct RunResult {
    std::size_t run = 0;  // 1-based
    std::uint64_t seed = 0;
    std::size_t best_epoch = 0;
    std::size_t epochs = 0;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
    TrainLog log;
    std::vector<RatioRecord> ratios;  // empty unless collection was requested
};

struct AccuracyDistribution {
    double best = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

AccuracyDistribution distribution_of(const std::vector<double>& accuracies);

struct TrainSummary {
    Provenance data;
    ModelKind model = ModelKind::rnn;
    std::vector<RunResult> runs;

    /// Test accuracies of all runs summarised (max for best-of-N, quartiles for boxplots).
    AccuracyDistribution test_accuracy() const;
    const RunResult& best_run() const;  // highest test accuracy, earliest run on ties
};

struct TrainOptions {
    /// Collect gradient ratios on every training example of every run.
    bool collect_ratios = false;
    /// When set, each run writes <run dir>/<ratios_name> after every epoch.
    std::string ratios_name = "ratios.csv";
    /// Write run directories, logs, checkpoints and results.csv under spec.out.
    bool write_files = true;
    std::function<void(const std::string&)> progress;
};

/// Seed of run k (1-based) derived from the base training seed.
std::uint64_t run_seed(std::uint64_t base, std::size_t run);

/// Trains spec.runs independent runs on `data`.
/// Files (when enabled), under spec.out:
///   spec.ini                      resolved configuration
///   results.csv                   one row per run
///   run<k>/train_log.csv, run<k>/best.ckpt, run<k>/<ratios_name>
TrainSummary cmd_train(const ExperimentSpec& spec, const Dataset& data,
                       const TrainOptions& options = {});

/// Header: experiment,index,model,run,seed,best_epoch,epochs,dev_accuracy,test_accuracy
std::string results_csv(const TrainSummary& summary);
/// Parses one or more summary rows into (provenance, model, runs) groups.
std::vector<TrainSummary> parse_results_csv(std::string_view text);

/// INI text mirroring the CLI flags of `train` and `gen`.
std::string spec_to_ini(const ExperimentSpec& spec);

struct EvalResult {
    double accuracy = 0.0;
    std::size_t count = 0;
};

/// Accuracy of a checkpoint on <dir>/<split>.txt. Throws naming the path if missing.
EvalResult cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset_dir,
                    const std::string& split);

/// Continues training a checkpoint for `epochs` epochs on the train split
/// (fresh AdaGrad state, no early stopping), collecting ratios every epoch.
/// The dimension comes from the checkpoint; config.dim is ignored.
std::vector<RatioRecord> cmd_diagnose(const std::filesystem::path& checkpoint,
                                      const std::filesystem::path& dataset_dir,
                                      const TrainConfig& config, std::size_t epochs);

}  // namespace treegrad
