#include "treegrad/experiment.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "text_io.hpp"

namespace treegrad {

void ExperimentSpec::validate() const {
    if (experiment < 1 || experiment > 3) {
        throw std::invalid_argument("experiment must be 1, 2 or 3");
    }
    if (index < 1 || index > 10) {
        throw std::invalid_argument("i must be in 1..10");
    }
    if (experiment == 3 && index != 3) {
        throw std::invalid_argument("experiment 3 uses dataset i=3");
    }
    if (runs < 1) {
        throw std::invalid_argument("runs must be >= 1");
    }
    train.validate();
}

Dataset generate_dataset(int experiment, int index, SplitSizes sizes, std::uint64_t seed) {
    switch (experiment) {
        case 1:
            return gen_dataset_exp1(index, sizes, seed);
        case 2:
            return gen_dataset_exp2(index, sizes, seed);
        case 3:
            if (index != 3) {
                throw std::invalid_argument("experiment 3 uses dataset i=3");
            }
            return gen_dataset_exp1(3, sizes, seed);
        default:
            throw std::invalid_argument("experiment must be 1, 2 or 3");
    }
}

Dataset cmd_gen(int experiment, int index, SplitSizes sizes, std::uint64_t seed,
                const std::filesystem::path& dir) {
    Dataset d = generate_dataset(experiment, index, sizes, seed);
    write_dataset(d, dir);
    return d;
}

AccuracyDistribution distribution_of(const std::vector<double>& accuracies) {
    if (accuracies.empty()) {
        throw std::invalid_argument("accuracy distribution of zero runs");
    }
    std::vector<double> s = accuracies;
    std::sort(s.begin(), s.end());
    return {s.back(), quantile_sorted(s, 0.25), quantile_sorted(s, 0.5), quantile_sorted(s, 0.75)};
}

AccuracyDistribution TrainSummary::test_accuracy() const {
    std::vector<double> acc;
    for (const auto& r : runs) {
        acc.push_back(r.test_accuracy);
    }
    return distribution_of(acc);
}

const RunResult& TrainSummary::best_run() const {
    if (runs.empty()) {
        throw std::logic_error("best_run: no runs");
    }
    const RunResult* best = &runs.front();
    for (const auto& r : runs) {
        if (r.test_accuracy > best->test_accuracy) {
            best = &r;
        }
    }
    return *best;
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run) { return derive_seed(base, 1000 + run); }

TrainSummary cmd_train(const ExperimentSpec& spec, const Dataset& data, const TrainOptions& options) {
    spec.validate();
    TrainSummary summary;
    summary.data = data.provenance;
    summary.model = spec.model;
    if (options.write_files) {
        std::filesystem::create_directories(spec.out);
        detail::write_file(spec.out / "spec.ini", spec_to_ini(spec));
    }
    for (std::size_t k = 1; k <= spec.runs; ++k) {
        RunResult run;
        run.run = k;
        run.seed = run_seed(spec.train.seed, k);
        TrainConfig config = spec.train;
        config.seed = run.seed;

        const auto run_dir = spec.out / ("run" + std::to_string(k));
        if (options.write_files) {
            std::filesystem::create_directories(run_dir);
        }
        Model model = Model::init(spec.model, config.dim, derive_seed(run.seed, 1));
        model.seed_lineage = {spec.train.seed, run.seed, derive_seed(run.seed, 1)};

        RatioSink sink;
        TrainHooks hooks;
        if (options.collect_ratios) {
            hooks.on_example = collect_ratios(sink);
        }
        hooks.on_epoch = [&](const EpochRecord& rec) {
            if (options.write_files && options.collect_ratios) {
                write_records_csv(sink.sorted(), run_dir / options.ratios_name);
            }
            if (options.progress) {
                std::ostringstream os;
                os << to_string(spec.model) << " run " << k << " epoch " << rec.epoch
                   << " loss " << rec.train_loss << " dev " << rec.dev_accuracy;
                options.progress(os.str());
            }
        };
        if (options.write_files) {
            hooks.on_new_best = [&](const Model& best, const EpochRecord&) {
                save_checkpoint(best, run_dir / "best.ckpt");
            };
        }
        TrainResult result = train(std::move(model), data.train, data.dev, config, hooks);
        run.best_epoch = result.log.best_epoch;
        run.epochs = result.log.epochs.size();
        run.dev_accuracy = result.log.best_dev_accuracy;
        run.test_accuracy = data.test.empty() ? 0.0 : evaluate(result.best, data.test);
        run.log = std::move(result.log);
        if (options.collect_ratios) {
            run.ratios = sink.sorted();
        }
        if (options.write_files) {
            run.log.write_csv(run_dir / "train_log.csv");
        }
        summary.runs.push_back(std::move(run));
        if (options.write_files) {
            detail::write_file(spec.out / "results.csv", results_csv(summary));
        }
    }
    return summary;
}

std::string results_csv(const TrainSummary& s) {
    std::string out =
        "experiment,index,model,run,seed,best_epoch,epochs,dev_accuracy,test_accuracy\n";
    for (const auto& r : s.runs) {
        out += std::to_string(s.data.experiment) + "," + std::to_string(s.data.index) + "," +
               std::string(to_string(s.model)) + "," + std::to_string(r.run) + "," +
               std::to_string(r.seed) + "," + std::to_string(r.best_epoch) + "," +
               std::to_string(r.epochs) + "," + format_double(r.dev_accuracy) + "," +
               format_double(r.test_accuracy) + "\n";
    }
    return out;
}

std::vector<TrainSummary> parse_results_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    const std::string header =
        "experiment,index,model,run,seed,best_epoch,epochs,dev_accuracy,test_accuracy";
    if (lines.empty() || lines[0] != header) {
        throw ParseError("expected header '" + header + "'", 1, 1);
    }
    std::map<std::tuple<int, int, std::string>, TrainSummary> groups;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        const std::size_t line_no = i + 1;
        const auto c = detail::split(lines[i], ',');
        if (c.size() != 9) {
            throw ParseError("expected 9 columns", line_no, 1);
        }
        std::vector<double> v;
        for (std::size_t col : {0u, 1u, 3u, 5u, 6u, 7u, 8u}) {
            const auto d = parse_double(c[col]);
            if (!d) {
                throw ParseError("malformed number '" + c[col] + "'", line_no, col + 1);
            }
            v.push_back(*d);
        }
        ModelKind kind;
        try {
            kind = parse_model_kind(c[2]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), line_no, 3);
        }
        std::uint64_t seed = 0;
        std::istringstream(c[4]) >> seed;
        auto& g = groups[{static_cast<int>(v[0]), static_cast<int>(v[1]), c[2]}];
        g.data.experiment = static_cast<int>(v[0]);
        g.data.index = static_cast<int>(v[1]);
        g.model = kind;
        RunResult r;
        r.run = static_cast<std::size_t>(v[2]);
        r.seed = seed;
        r.best_epoch = static_cast<std::size_t>(v[3]);
        r.epochs = static_cast<std::size_t>(v[4]);
        r.dev_accuracy = v[5];
        r.test_accuracy = v[6];
        g.runs.push_back(std::move(r));
    }
    std::vector<TrainSummary> out;
    for (auto& [key, s] : groups) {
        out.push_back(std::move(s));
    }
    return out;
}

std::string spec_to_ini(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << "# Resolved experiment configuration; replay with: treegrad --config <this file> train --data <dataset dir>\n"
       << "[train]\n"
       << "model=" << to_string(spec.model) << '\n'
       << "lr=" << format_double(spec.train.learning_rate) << '\n'
       << "batch=" << spec.train.batch_size << '\n'
       << "patience=" << spec.train.patience << '\n'
       << "max-epochs=" << spec.train.max_epochs << '\n'
       << "dim=" << spec.train.dim << '\n'
       << "seed=" << spec.train.seed << '\n'
       << "runs=" << spec.runs << '\n'
       << "threads=" << spec.train.threads << '\n'
       << "out=\"" << spec.out.generic_string() << "\"\n"
       << "[gen]\n"
       << "experiment=" << spec.experiment << '\n'
       << "i=" << spec.index << '\n'
       << "sizes=\"" << spec.sizes.train << ',' << spec.sizes.dev << ',' << spec.sizes.test << "\"\n"
       << "seed=" << spec.data_seed << '\n';
    return os.str();
}

EvalResult cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset_dir,
                    const std::string& split) {
    if (split != "train" && split != "dev" && split != "test") {
        throw std::invalid_argument("split must be train, dev or test");
    }
    const auto path = dataset_dir / (split + ".txt");
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("missing split file " + path.string());
    }
    const Model model = load_checkpoint(checkpoint);
    const auto examples = read_split(path);
    return {evaluate(model, examples), examples.size()};
}

std::vector<RatioRecord> cmd_diagnose(const std::filesystem::path& checkpoint,
                                      const std::filesystem::path& dataset_dir,
                                      const TrainConfig& config, std::size_t epochs) {
    Model model = load_checkpoint(checkpoint);
    const auto train_split = read_split(dataset_dir / "train.txt");
    AdaGradState state = AdaGradState::for_model(model, config.epsilon);
    RatioSink sink;
    const auto observer = collect_ratios(sink);
    for (std::size_t e = 1; e <= epochs; ++e) {
        train_epoch(model, train_split, config, state, e, observer);
    }
    return sink.sorted();
}

}  // namespace treegrad
