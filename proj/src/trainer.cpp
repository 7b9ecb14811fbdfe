#include "treegrad/trainer.hpp"

#include "text_io.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

namespace treegrad {

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
    TrainConfig c;
    c.batch_size = kind == ModelKind::rnn ? 20 : 5;
    return c;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* rule) {
        if (!ok) {
            throw std::invalid_argument(std::string("TrainConfig.") + field + " " + rule);
        }
    };
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate", "must be > 0");
    require(batch_size >= 1, "batch_size", "must be >= 1");
    require(patience >= 1, "patience", "must be >= 1");
    require(max_epochs >= 1, "max_epochs", "must be >= 1");
    require(dim >= 1, "dim", "must be >= 1");
    require(epsilon > 0.0, "epsilon", "must be > 0");
    require(threads >= 1, "threads", "must be >= 1");
}

AdaGradState AdaGradState::for_model(const Model& model, double epsilon) {
    return {Model::zeros(model.kind(), model.dim()), epsilon};
}

void adagrad_step(std::span<double> param, std::span<const double> grad, std::span<double> accum,
                  double lr, double epsilon, std::string_view block) {
    if (param.size() != grad.size() || param.size() != accum.size()) {
        throw std::invalid_argument("adagrad_step: shape mismatch in block " + std::string(block));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw std::domain_error("non-finite gradient in block " + std::string(block) +
                                    " at index " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = grad[i];
        if (g == 0.0) {
            continue;
        }
        accum[i] += g * g;
        param[i] -= lr * g / (std::sqrt(accum[i]) + epsilon);
    }
}

void apply_gradients(Model& model, const Gradients& grad, AdaGradState& state, double lr) {
    auto params = model.blocks();
    auto accums = state.accumulators.blocks();
    const auto grads = grad.dense_blocks();
    // Dense gradient blocks line up with model blocks 1..end (block 0 is the embedding table).
    if (params.size() != grads.size() + 1 || accums.size() != params.size()) {
        throw std::invalid_argument("apply_gradients: gradient does not match the model kind");
    }
    for (std::size_t b = 0; b < grads.size(); ++b) {
        adagrad_step(params[b + 1].values, grads[b].values, accums[b + 1].values, lr,
                     state.epsilon, params[b + 1].name);
    }
    for (const auto& [token, row] : grad.embeddings) {
        const auto r = static_cast<std::size_t>(token);
        adagrad_step(model.embeddings.row(r), row.values(), state.accumulators.embeddings.row(r),
                     lr, state.epsilon, "embeddings[" + std::to_string(token) + "]");
    }
}

namespace {

struct ExampleResult {
    std::optional<ForwardTrace> trace;
    std::optional<Gradients> grad;
    double loss = 0.0;
};

void run_example(const Model& model, const LabeledExample& ex, bool keep_trace, ExampleResult& out) {
    ForwardTrace trace = forward(ex.tree, model, ex.label);
    out.grad = backward(trace, ex.label, model);
    out.loss = trace.loss;
    if (keep_trace) {
        out.trace = std::move(trace);
    }
}

}  // namespace

EpochStats train_epoch(Model& model, const std::vector<LabeledExample>& train,
                       const TrainConfig& config, AdaGradState& state, std::size_t epoch,
                       const ExampleObserver& observer) {
    config.validate();
    if (model.dim() != state.accumulators.dim() || model.kind() != state.accumulators.kind()) {
        throw std::invalid_argument("train_epoch: optimizer state does not match the model");
    }
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng shuffle_rng(derive_seed(derive_seed(config.seed, 0x5EED5u), epoch));
    shuffle_rng.shuffle(order);

    EpochStats stats;
    double loss_sum = 0.0;
    const bool observe = static_cast<bool>(observer);
    std::vector<ExampleResult> results;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        const std::size_t count = end - start;
        results.assign(count, {});
        const std::size_t workers = std::min(config.threads, count);
        if (workers <= 1) {
            for (std::size_t k = 0; k < count; ++k) {
                run_example(model, train[order[start + k]], observe, results[k]);
            }
        } else {
            std::vector<std::jthread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t k = w; k < count; k += workers) {
                            run_example(model, train[order[start + k]], observe, results[k]);
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            pool.clear();
            for (auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }
        // Fixed reduction order: batch position 0, 1, 2, ...
        Gradients batch = Gradients::zeros_like(model);
        for (std::size_t k = 0; k < count; ++k) {
            batch.add(*results[k].grad);
            loss_sum += results[k].loss;
            if (observe) {
                const std::size_t idx = order[start + k];
                observer(epoch, idx, train[idx], *results[k].trace);
            }
        }
        apply_gradients(model, batch, state, config.learning_rate);
        ++stats.updates;
    }
    stats.mean_loss = train.empty() ? 0.0 : loss_sum / static_cast<double>(train.size());
    return stats;
}

double evaluate(const Model& model, const std::vector<LabeledExample>& examples) {
    if (examples.empty()) {
        throw std::invalid_argument("evaluate: accuracy of an empty example list is undefined");
    }
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        if (predict(forward(ex.tree, model)) == ex.label) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

bool EarlyStopping::record(double dev_accuracy) {
    ++seen_;
    if (dev_accuracy > best_) {
        best_ = dev_accuracy;
        best_epoch_ = seen_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

TrainResult train(Model model, const std::vector<LabeledExample>& train_split,
                  const std::vector<LabeledExample>& dev_split, const TrainConfig& config,
                  const TrainHooks& hooks) {
    config.validate();
    if (train_split.empty() || dev_split.empty()) {
        throw std::invalid_argument("train: train and dev splits must be nonempty");
    }
    AdaGradState state = AdaGradState::for_model(model, config.epsilon);
    EarlyStopping stopper(config.patience);
    TrainResult result{model, {}};

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const EpochStats stats =
            train_epoch(model, train_split, config, state, epoch, hooks.on_example);
        const double dev = evaluate(model, dev_split);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;

        EpochRecord rec{epoch, stats.mean_loss, dev, config.record_time ? elapsed.count() : 0.0};
        result.log.epochs.push_back(rec);
        if (stopper.record(dev)) {
            result.best = model;
            result.log.best_epoch = epoch;
            result.log.best_dev_accuracy = dev;
            if (hooks.on_new_best) {
                hooks.on_new_best(model, rec);
            }
        }
        if (hooks.on_epoch) {
            hooks.on_epoch(rec);
        }
        if (stopper.should_stop()) {
            break;
        }
    }
    return result;
}

// TrainLog CSV ------------------------------------------------------------------

std::string TrainLog::to_csv() const {
    std::string out = "epoch,train_loss,dev_accuracy,seconds\n";
    for (const auto& r : epochs) {
        out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
               format_double(r.dev_accuracy) + "," + format_double(r.seconds) + "\n";
    }
    return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    detail::write_file(path, to_csv());
}

TrainLog TrainLog::parse_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    if (lines.empty() || lines[0] != "epoch,train_loss,dev_accuracy,seconds") {
        throw ParseError("expected header 'epoch,train_loss,dev_accuracy,seconds'", 1, 1);
    }
    TrainLog log;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) {
            continue;
        }
        const auto cells = detail::split(lines[i], ',');
        if (cells.size() != 4) {
            throw ParseError("expected 4 columns, found " + std::to_string(cells.size()), line_no, 1);
        }
        const auto epoch = parse_double(cells[0]);
        const auto loss = parse_double(cells[1]);
        const auto dev = parse_double(cells[2]);
        const auto secs = parse_double(cells[3]);
        if (!epoch || *epoch < 1 || std::floor(*epoch) != *epoch || !loss || !dev || !secs) {
            throw ParseError("malformed number", line_no, 1);
        }
        const EpochRecord r{static_cast<std::size_t>(*epoch), *loss, *dev, *secs};
        log.epochs.push_back(r);
        if (log.best_epoch == 0 || r.dev_accuracy > log.best_dev_accuracy) {
            log.best_epoch = r.epoch;
            log.best_dev_accuracy = r.dev_accuracy;
        }
    }
    return log;
}

TrainLog TrainLog::read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(detail::read_file(path));
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace treegrad
