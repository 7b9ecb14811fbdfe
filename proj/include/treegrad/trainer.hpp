#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treegrad/model.hpp"
#include "treegrad/treebank.hpp"

namespace treegrad {

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t batch_size = 20;
    std::size_t patience = 5;
    std::size_t max_epochs = 100;
    std::size_t dim = kDefaultDim;
    std::uint64_t seed = 1;
    double epsilon = 1e-8;
    /// Worker threads for per-example backward passes within a minibatch.
    /// Results are bit-identical for any value (fixed reduction order).
    std::size_t threads = 1;
    /// When false the log's seconds column is written as 0 so runs compare byte-for-byte.
    bool record_time = true;

    /// Batch 20 for the RNN, 5 for the RLSTM; everything else as above.
    static TrainConfig defaults_for(ModelKind kind);
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Per-parameter sums of squared gradients, shaped like the model.
struct AdaGradState {
    Model accumulators;
    double epsilon = 1e-8;

    static AdaGradState for_model(const Model& model, double epsilon = 1e-8);
};

/// G += g²; θ -= lr · g / (√G + ε), elementwise. Throws std::domain_error
/// naming `block` if any gradient entry is non-finite (nothing is modified then).
void adagrad_step(std::span<double> param, std::span<const double> grad, std::span<double> accum,
                  double lr, double epsilon, std::string_view block);

/// One AdaGrad step for every block; embedding rows absent from the gradient are untouched.
void apply_gradients(Model& model, const Gradients& grad, AdaGradState& state, double lr);

/// Called once per training example, after its backward pass and before the
/// batch update, in batch order. `example_index` is the position in the
/// unshuffled split; the trace carries error vectors.
using ExampleObserver = std::function<void(std::size_t epoch, std::size_t example_index,
                                           const LabeledExample&, const ForwardTrace&)>;

struct EpochStats {
    double mean_loss = 0.0;
    std::size_t updates = 0;
};

/// Shuffles with a seed derived from (config.seed, epoch), sums gradients
/// over each minibatch (the last may be short) and applies one AdaGrad step per batch.
EpochStats train_epoch(Model& model, const std::vector<LabeledExample>& train,
                       const TrainConfig& config, AdaGradState& state, std::size_t epoch,
                       const ExampleObserver& observer = {});

/// Fraction of examples predicted correctly. Throws on an empty list.
double evaluate(const Model& model, const std::vector<LabeledExample>& examples);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
    double seconds = 0.0;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 before any epoch
    double best_dev_accuracy = 0.0;

    /// CSV with header "epoch,train_loss,dev_accuracy,seconds".
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
    /// Recomputes the best epoch from the rows. Throws ParseError with a line number.
    static TrainLog parse_csv(std::string_view text);
    static TrainLog read_csv(const std::filesystem::path& path);
};

/// Early-stopping rule: an epoch improves only if its dev accuracy strictly
/// exceeds the best so far; stop once `patience` epochs in a row fail to.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records the next epoch's dev accuracy; true if it is a new best.
    bool record(double dev_accuracy);
    bool should_stop() const noexcept { return since_best_ >= patience_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_accuracy() const noexcept { return best_; }
    std::size_t epochs_seen() const noexcept { return seen_; }

private:
    std::size_t patience_;
    std::size_t seen_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = -1.0;
};

struct TrainHooks {
    ExampleObserver on_example;
    std::function<void(const EpochRecord&)> on_epoch;
    /// Invoked with the new best model after each improving epoch.
    std::function<void(const Model&, const EpochRecord&)> on_new_best;
};

struct TrainResult {
    Model best;
    TrainLog log;
};

/// Epoch loop with dev-set early stopping; returns the best-dev snapshot.
/// Epochs are numbered from 1. Throws if train or dev is empty.
TrainResult train(Model model, const std::vector<LabeledExample>& train_split,
                  const std::vector<LabeledExample>& dev_split, const TrainConfig& config,
                  const TrainHooks& hooks = {});

}  // namespace treegrad
