// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --criteria 1-5 --cli path/to/treegrad
//   acceptance --criteria 6-11 --scale desk --work acceptance_work
//
// Exit status is 1 if a criterion outside --expect-fail fails and --strict is
// given, 2 on errors. Expected failures still print FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "support/grad_check.hpp"
#include "treegrad/diagnostics.hpp"
#include "treegrad/experiment.hpp"
#include "treegrad/report.hpp"

using namespace treegrad;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds, as stated by each criterion.
constexpr std::size_t kOracleSeeds = 100;
constexpr std::size_t kGeneratorExamples = 10000;
constexpr double kClassFreqTol = 0.02;
constexpr std::size_t kOverfitSlice = 50;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kOverfitAccuracy = 0.95;
constexpr std::size_t kMinCellCount = 30;

struct Scale {
    std::string name;
    SplitSizes sizes;
    std::size_t runs;
};

Scale scale_named(const std::string& name) {
    if (name == "desk") {
        return {"desk", {2000, 500, 500}, 3};
    }
    if (name == "full") {
        return {"full", {10000, 1000, 1000}, 5};
    }
    throw std::invalid_argument("unknown scale '" + name + "' (desk or full)");
}

struct Verdict {
    int id;
    bool pass;
    std::string title;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

void log_line(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Criterion 1 ------------------------------------------------------------------

Verdict gradient_oracle() {
    std::size_t instances = 0;
    std::size_t coordinates = 0;
    std::size_t failures = 0;
    double worst = 0.0;
    std::string first;
    for (auto kind : {ModelKind::rnn, ModelKind::rlstm}) {
        for (std::size_t n : {1u, 3u, 5u}) {
            for (std::uint64_t seed = 0; seed < kOracleSeeds; ++seed) {
                SeededRng rng(derive_seed(derive_seed(seed, n), kind == ModelKind::rnn ? 11 : 22));
                const Model m = testing::random_model(kind, n, rng, 1.0);
                const BinaryTree tree = testing::random_small_tree(rng);
                const int label = static_cast<int>(rng.uniform_int(0, kNumClasses - 1));
                const auto r = testing::check_gradients(m, tree, label);
                ++instances;
                coordinates += r.coordinates;
                worst = std::max(worst, r.worst_excess);
                if (r.failures > 0 && first.empty()) {
                    first = std::string(to_string(kind)) + " n=" + std::to_string(n) +
                            " seed=" + std::to_string(seed) + ": " + r.first_failure;
                }
                failures += r.failures;
            }
        }
    }
    std::string detail = std::to_string(instances) + " instances, " + std::to_string(coordinates) +
                         " coordinates, " + std::to_string(failures) +
                         " mismatches, worst |a-fd| at " + fmt(worst, 3) + "x tolerance";
    if (!first.empty()) {
        detail += "; first: " + first;
    }
    return {1, failures == 0, "gradient oracle (h=1e-5, 1e-6 rel / 1e-8 abs)", detail};
}

// Criterion 2 ------------------------------------------------------------------

Verdict generator_invariants() {
    std::size_t checked = 0;
    std::vector<std::string> problems;
    double worst_freq = 0.0;
    for (int family : {1, 2}) {
        for (int i = 1; i <= 10; ++i) {
            const Dataset d = generate_dataset(family, i, {kGeneratorExamples, 0, 0},
                                               derive_seed(7, static_cast<std::uint64_t>(family * 100 + i)));
            std::map<int, std::size_t> classes;
            std::size_t bad = 0;
            for (const auto& ex : d.train) {
                const auto leaves = ex.tree.leaves();
                const auto keywords = std::count_if(leaves.begin(), leaves.end(), is_keyword);
                const std::size_t lo = family == 1 ? 10 * i - 9 : 21;
                const std::size_t hi = family == 1 ? 10 * i : 30;
                const bool depth_ok =
                    family == 1 || ex.keyword_depth == i || ex.keyword_depth == i + 1;
                const bool ok = keywords == 1 && ex.label == ex.keyword / 100 &&
                                keyword_depth(ex.tree) == ex.keyword_depth &&
                                leaves.size() >= lo && leaves.size() <= hi && depth_ok;
                bad += ok ? 0 : 1;
                ++classes[ex.label];
            }
            checked += d.train.size();
            if (bad > 0) {
                problems.push_back("exp" + std::to_string(family) + " i=" + std::to_string(i) + ": " +
                                   std::to_string(bad) + " invalid examples");
            }
            for (int c = 0; c < kNumClasses; ++c) {
                const double f = static_cast<double>(classes[c]) / static_cast<double>(d.train.size());
                worst_freq = std::max(worst_freq, std::abs(f - 0.1));
            }
        }
    }
    const bool freq_ok = worst_freq <= kClassFreqTol;
    std::string detail = std::to_string(checked) + " examples (10k per family and index), " +
                         "max |class freq - 0.1| = " + fmt(worst_freq, 3);
    for (const auto& p : problems) {
        detail += "; " + p;
    }
    return {2, problems.empty() && freq_ok, "generator invariants", detail};
}

// Criterion 3 ------------------------------------------------------------------

int run_cli(const fs::path& cli, const std::string& args) {
    const std::string cmd = "\"" + cli.string() + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

Verdict determinism(const fs::path& cli, const fs::path& work) {
    const std::string title = "determinism of gen and train";
    if (cli.empty() || !fs::exists(cli)) {
        return {3, false, title, "CLI binary not found (pass --cli)"};
    }
    const fs::path dir = work / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };

    std::vector<std::string> differ;
    std::size_t compared = 0;
    auto compare_trees = [&](const fs::path& a, const fs::path& b) {
        for (const auto& entry : fs::recursive_directory_iterator(a)) {
            if (!entry.is_regular_file() || entry.path().filename() == "spec.ini") {
                continue;  // spec.ini records the output directory
            }
            const fs::path rel = fs::relative(entry.path(), a);
            ++compared;
            if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
                differ.push_back(rel.string());
            }
        }
    };

    for (int family : {1, 2}) {
        const std::string gen = "gen --experiment " + std::to_string(family) +
                                " --i 3 --sizes 300,100,100 --seed 42 --out ";
        const fs::path a = dir / ("gen" + std::to_string(family) + "a");
        const fs::path b = dir / ("gen" + std::to_string(family) + "b");
        if (run_cli(cli, gen + q(a)) != 0 || run_cli(cli, gen + q(b)) != 0) {
            return {3, false, title, "gen failed"};
        }
        compare_trees(a, b);
    }
    for (const char* model : {"rnn", "rlstm"}) {
        const std::string train = std::string("train --data ") + q(dir / "gen1a") + " --model " + model +
                                  " --dim 10 --max-epochs 3 --runs 2 --threads 1 --no-timing --quiet"
                                  " --ratios ratios.csv --out ";
        const fs::path a = dir / (std::string(model) + "a");
        const fs::path b = dir / (std::string(model) + "b");
        if (run_cli(cli, train + q(a)) != 0 || run_cli(cli, train + q(b)) != 0) {
            return {3, false, title, std::string("train --model ") + model + " failed"};
        }
        compare_trees(a, b);
    }
    std::string detail = std::to_string(compared) + " files compared byte-for-byte";
    for (const auto& d : differ) {
        detail += "; differs: " + d;
    }
    return {3, differ.empty() && compared > 0, title, detail};
}

// Criterion 4 ------------------------------------------------------------------

Verdict observer_purity(const fs::path& work) {
    const Dataset d = generate_dataset(1, 3, {400, 100, 100}, 42);
    std::vector<std::string> differ;
    std::size_t records = 0;
    for (auto kind : {ModelKind::rnn, ModelKind::rlstm}) {
        ExperimentSpec spec;
        spec.experiment = 3;
        spec.index = 3;
        spec.model = kind;
        spec.sizes = d.provenance.sizes;
        spec.train = TrainConfig::defaults_for(kind);
        spec.train.dim = 20;
        spec.train.max_epochs = 4;
        spec.train.record_time = false;
        spec.runs = 1;

        spec.out = work / "purity" / (std::string(to_string(kind)) + "_observed");
        TrainOptions observed;
        observed.collect_ratios = true;
        const TrainSummary a = cmd_train(spec, d, observed);
        records += a.runs[0].ratios.size();

        const fs::path observed_dir = spec.out;
        spec.out = work / "purity" / (std::string(to_string(kind)) + "_plain");
        cmd_train(spec, d);

        for (const char* f : {"run1/best.ckpt", "run1/train_log.csv", "results.csv"}) {
            if (slurp(observed_dir / f) != slurp(spec.out / f)) {
                differ.push_back(std::string(to_string(kind)) + " " + f);
            }
        }
        // The final weights too, not only the best snapshot.
        TrainConfig c = spec.train;
        Model m1 = Model::init(kind, c.dim, 5);
        Model m2 = m1;
        AdaGradState s1 = AdaGradState::for_model(m1);
        AdaGradState s2 = AdaGradState::for_model(m2);
        RatioSink sink;
        for (std::size_t e = 1; e <= 3; ++e) {
            train_epoch(m1, d.train, c, s1, e, collect_ratios(sink));
            train_epoch(m2, d.train, c, s2, e);
        }
        if (serialize_checkpoint(m1) != serialize_checkpoint(m2)) {
            differ.push_back(std::string(to_string(kind)) + " final weights");
        }
    }
    std::string detail = "rnn and rlstm, " + std::to_string(records) + " ratio records collected";
    for (const auto& d : differ) {
        detail += "; differs: " + d;
    }
    return {4, differ.empty(), "observer purity (bit-identical checkpoints)", detail};
}

// Criterion 5 ------------------------------------------------------------------

Verdict overfit_sanity() {
    const Dataset d = generate_dataset(1, 3, {kOverfitSlice, 1, 1}, 42);
    std::vector<std::string> parts;
    bool pass = true;
    for (auto kind : {ModelKind::rnn, ModelKind::rlstm}) {
        TrainConfig c = TrainConfig::defaults_for(kind);
        Model m = Model::init(kind, c.dim, 1);
        AdaGradState s = AdaGradState::for_model(m);
        double acc = 0.0;
        std::size_t epoch = 0;
        while (epoch < kOverfitEpochs && acc < kOverfitAccuracy) {
            train_epoch(m, d.train, c, s, ++epoch);
            acc = evaluate(m, d.train);
        }
        pass = pass && acc >= kOverfitAccuracy;
        parts.push_back(std::string(to_string(kind)) + " train accuracy " + fmt(acc) + " after " +
                        std::to_string(epoch) + " epochs");
    }
    return {5, pass, "overfit sanity (50 examples of exp1 i=3, n=50)", parts[0] + "; " + parts[1]};
}

// Experiments -------------------------------------------------------------------

class ExperimentRunner {
public:
    ExperimentRunner(Scale scale, fs::path work, std::size_t threads)
        : scale_(std::move(scale)), work_(std::move(work)), threads_(threads) {}

    /// Best-of-runs training for one cell; cached per (experiment, index, model).
    /// Experiment 3 observes experiment-1 dataset i=3, so those runs collect ratios.
    const TrainSummary& cell(int experiment, int index, ModelKind kind) {
        const bool ratios = experiment == 1 && index == 3;
        const auto key = std::make_tuple(experiment, index, kind);
        if (auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
        const std::string name = "exp" + std::to_string(experiment) + "_i" + std::to_string(index);
        const Dataset& data = dataset(experiment, index);

        ExperimentSpec spec;
        spec.experiment = experiment;
        spec.index = index;
        spec.model = kind;
        spec.sizes = scale_.sizes;
        spec.train = TrainConfig::defaults_for(kind);
        spec.train.threads = threads_;
        spec.runs = scale_.runs;
        spec.out = work_ / scale_.name / (name + "_" + std::string(to_string(kind)));

        TrainOptions opts;
        opts.collect_ratios = ratios;
        opts.progress = [](const std::string& s) { log_line(s); };
        const auto t0 = std::chrono::steady_clock::now();
        log_line("training " + std::string(to_string(kind)) + " on " + name + " (" +
                 std::to_string(spec.runs) + " runs)");
        TrainSummary s = cmd_train(spec, data, opts);
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - t0;
        std::ostringstream os;
        os << to_string(kind) << " " << name << ": test accuracy per run";
        for (const auto& r : s.runs) {
            os << " " << fmt(r.test_accuracy) << " (" << r.epochs << " ep)";
        }
        os << ", " << fmt(took.count(), 3) << " s";
        log_line(os.str());
        return cache_.emplace(key, std::move(s)).first->second;
    }

    double best(int experiment, int index, ModelKind kind) {
        return cell(experiment, index, kind).test_accuracy().best;
    }

    const Scale& scale() const { return scale_; }
    fs::path root() const { return work_ / scale_.name; }

private:
    const Dataset& dataset(int experiment, int index) {
        const auto key = std::make_pair(experiment, index);
        if (auto it = data_.find(key); it != data_.end()) {
            return it->second;
        }
        const fs::path dir = root() / ("data_exp" + std::to_string(experiment) + "_i" + std::to_string(index));
        return data_.emplace(key, cmd_gen(experiment, index, scale_.sizes, 42, dir)).first->second;
    }

    Scale scale_;
    fs::path work_;
    std::size_t threads_;
    std::map<std::tuple<int, int, ModelKind>, TrainSummary> cache_;
    std::map<std::pair<int, int>, Dataset> data_;
};

Verdict experiment1_contrast(ExperimentRunner& x) {
    const double rnn1 = x.best(1, 1, ModelKind::rnn);
    const double rnn3 = x.best(1, 3, ModelKind::rnn);
    const double rlstm3 = x.best(1, 3, ModelKind::rlstm);
    const bool pass = rnn1 >= 0.80 && rnn3 <= 0.25 && rlstm3 >= 0.85;
    return {6, pass, "experiment 1 contrast",
            "rnn i=1 " + fmt(rnn1) + " (>= 0.80), rnn i=3 " + fmt(rnn3) + " (<= 0.25), rlstm i=3 " +
                fmt(rlstm3) + " (>= 0.85)"};
}

Verdict experiment1_long(ExperimentRunner& x) {
    const double rnn = x.best(1, 8, ModelKind::rnn);
    const double rlstm = x.best(1, 8, ModelKind::rlstm);
    const bool pass = std::abs(rnn - rlstm) <= 0.15 && rnn <= 0.35 && rlstm <= 0.35;
    return {7, pass, "experiment 1 convergence at i=8",
            "rnn " + fmt(rnn) + ", rlstm " + fmt(rlstm) + ", |diff| " + fmt(std::abs(rnn - rlstm)) +
                " (<= 0.15, both <= 0.35)"};
}

Verdict experiment2_contrast(ExperimentRunner& x) {
    const double rnn2 = x.best(2, 2, ModelKind::rnn);
    const double rnn9 = x.best(2, 9, ModelKind::rnn);
    const double rlstm7 = x.best(2, 7, ModelKind::rlstm);
    const double rlstm9 = x.best(2, 9, ModelKind::rlstm);
    const bool pass = rnn2 >= 0.80 && rnn9 <= 0.25 && rlstm7 >= 0.80 && rlstm9 > 0.20;
    return {8, pass, "experiment 2 contrast",
            "rnn i=2 " + fmt(rnn2) + " (>= 0.80), rnn i=9 " + fmt(rnn9) + " (<= 0.25), rlstm i=7 " +
                fmt(rlstm7) + " (>= 0.80), rlstm i=9 " + fmt(rlstm9) + " (> 0.20)"};
}

const std::vector<RatioRecord>& ratio_records(ExperimentRunner& x, ModelKind kind) {
    // Run 1 of each model on experiment-1 dataset i=3.
    return x.cell(1, 3, kind).runs.front().ratios;
}

std::map<int, double> medians_at(const RatioSummary& s, std::size_t epoch) {
    std::map<int, double> out;
    for (const auto& c : s.cells) {
        if (c.epoch == epoch && c.count >= kMinCellCount) {
            out[c.depth] = c.median;
        }
    }
    return out;
}

Verdict experiment3_vanishing(ExperimentRunner& x) {
    const RatioSummary s = summarize(ratio_records(x, ModelKind::rnn));
    const auto med = medians_at(s, 1);
    std::ostringstream os;
    os << "epoch-1 medians:";
    bool decreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    for (int depth = 2; depth <= 10; ++depth) {
        auto it = med.find(depth);
        if (it == med.end()) {
            continue;
        }
        os << " d" << depth << "=" << fmt(it->second, 3);
        decreasing = decreasing && it->second < prev;
        prev = it->second;
        ++used;
    }
    const bool have_ends = med.contains(2) && med.contains(10);
    const bool drop = have_ends && med.at(10) < 1e-2 * med.at(2);
    if (have_ends) {
        os << "; d10/d2 = " << fmt(med.at(10) / med.at(2), 3) << " (< 1e-2)";
    } else {
        os << "; depth 2 or 10 has fewer than 30 records";
    }
    return {9, decreasing && drop && used >= 2, "experiment 3 rnn vanishing signature", os.str()};
}

std::map<std::size_t, double> exploding_fraction_by_epoch(const std::vector<RatioRecord>& records) {
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& r : records) {
        if (r.defined()) {
            auto& [over, total] = counts[r.epoch];
            over += r.ratio > kExplodingThreshold ? 1 : 0;
            ++total;
        }
    }
    std::map<std::size_t, double> out;
    for (const auto& [epoch, c] : counts) {
        out[epoch] = static_cast<double>(c.first) / static_cast<double>(c.second);
    }
    return out;
}

Verdict experiment3_rlstm(ExperimentRunner& x) {
    const auto& rlstm = ratio_records(x, ModelKind::rlstm);
    const auto& rnn = ratio_records(x, ModelKind::rnn);
    const auto frac = exploding_fraction_by_epoch(rlstm);

    std::ostringstream os;
    bool peak = false;
    if (frac.contains(1) && frac.contains(2)) {
        double late = 0.0;
        std::size_t late_n = 0;
        for (const auto& [e, f] : frac) {
            if (e >= 5) {
                late += f;
                ++late_n;
            }
        }
        const double late_mean = late_n > 0 ? late / static_cast<double>(late_n) : 0.0;
        peak = frac.at(2) > frac.at(1) && late_n > 0 && frac.at(2) > late_mean;
        os << "fraction > 1: epoch1 " << fmt(frac.at(1), 3) << ", epoch2 " << fmt(frac.at(2), 3)
           << ", epochs>=5 mean " << (late_n > 0 ? fmt(late_mean, 3) : std::string("n/a"));
    } else {
        os << "fewer than two epochs recorded";
    }

    const RatioSummary sl = summarize(rlstm);
    const RatioSummary sr = summarize(rnn);
    const auto ml = medians_at(sl, sl.max_epoch());
    const auto mr = medians_at(sr, sr.max_epoch());
    bool deep = false;
    int depth = -1;
    for (const auto& [d, m] : ml) {
        if (mr.contains(d)) {
            depth = std::max(depth, d);
        }
    }
    if (depth >= 0) {
        const double factor = ml.at(depth) / mr.at(depth);
        deep = factor >= 10.0;
        os << "; deepest bin d" << depth << " final-epoch medians rlstm " << fmt(ml.at(depth), 3)
           << " (epoch " << sl.max_epoch() << ") vs rnn " << fmt(mr.at(depth), 3) << " (epoch "
           << sr.max_epoch() << "), factor " << fmt(factor, 3) << " (>= 10)";
    } else {
        os << "; no common depth bin with >= 30 records";
    }
    return {10, peak && deep, "experiment 3 rlstm signature", os.str()};
}

Verdict experiment3_recovery(ExperimentRunner& x) {
    const RatioSummary s = summarize(ratio_records(x, ModelKind::rnn));
    const auto first = medians_at(s, 1);
    const auto last = medians_at(s, s.max_epoch());
    if (!first.contains(10) || !last.contains(10)) {
        return {11, false, "experiment 3 rnn recovery at depth 10", "depth 10 has fewer than 30 records"};
    }
    const bool pass = last.at(10) > first.at(10);
    return {11, pass, "experiment 3 rnn recovery at depth 10",
            "depth-10 median epoch 1 " + fmt(first.at(10), 3) + " -> epoch " +
                std::to_string(s.max_epoch()) + " " + fmt(last.at(10), 3)};
}

std::set<int> parse_selection(const std::string& text) {
    std::set<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto dash = part.find('-');
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = dash == std::string::npos ? lo : std::stoi(part.substr(dash + 1));
        for (int k = lo; k <= hi; ++k) {
            if (k < 1 || k > 11) {
                throw std::invalid_argument("criterion " + std::to_string(k) + " does not exist");
            }
            out.insert(k);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treegrad acceptance suite"};
    std::string criteria = "1-11";
    std::string scale_name = "desk";
    fs::path work = "acceptance_work";
    fs::path cli;
    fs::path report;
    std::size_t threads = 1;
    bool strict = false;
    std::string expect_fail;
    fs::path verdicts;
    app.add_option("--criteria", criteria, "Criteria to run, e.g. 1-5 or 6,9")->capture_default_str();
    app.add_option("--scale", scale_name, "desk (2k/500/500, best of 3) or full (10k/1k/1k, best of 5)")
        ->capture_default_str();
    app.add_option("--work", work, "Scratch directory for datasets and runs")->capture_default_str();
    app.add_option("--cli", cli, "treegrad binary (criterion 3)");
    app.add_option("--report", report, "Also render the report for the experiment runs here");
    app.add_option("--threads", threads, "Threads per mini-batch")->capture_default_str();
    app.add_flag("--strict", strict, "Exit 1 if a criterion fails");
    app.add_option("--expect-fail", expect_fail,
                   "Criteria known to fail at this scale; reported but not counted by --strict");
    app.add_option("--verdicts", verdicts, "Also write the criterion lines to this file");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto selected = parse_selection(criteria);
        const auto expected = expect_fail.empty() ? std::set<int>{} : parse_selection(expect_fail);
        ExperimentRunner runner(scale_named(scale_name), work, threads);
        const std::map<int, std::function<Verdict()>> suite = {
            {1, gradient_oracle},
            {2, generator_invariants},
            {3, [&] { return determinism(cli, work); }},
            {4, [&] { return observer_purity(work); }},
            {5, overfit_sanity},
            {6, [&] { return experiment1_contrast(runner); }},
            {7, [&] { return experiment1_long(runner); }},
            {8, [&] { return experiment2_contrast(runner); }},
            {9, [&] { return experiment3_vanishing(runner); }},
            {10, [&] { return experiment3_rlstm(runner); }},
            {11, [&] { return experiment3_recovery(runner); }},
        };

        std::vector<int> failed;
        std::ostringstream lines;
        auto emit = [&](const std::string& line) {
            std::cout << line << std::endl;
            lines << line << '\n';
        };
        for (int id : selected) {
            const auto t0 = std::chrono::steady_clock::now();
            const Verdict v = suite.at(id)();
            const std::chrono::duration<double> took = std::chrono::steady_clock::now() - t0;
            const bool known = expected.contains(v.id);
            std::ostringstream line;
            line << "criterion " << std::setw(2) << v.id << ": " << (v.pass ? "PASS" : "FAIL")
                 << (known ? (v.pass ? " (XPASS)" : " (expected)") : "") << "  " << v.title << " | "
                 << v.detail << " [" << fmt(took.count(), 3) << " s]";
            emit(line.str());
            if (!v.pass) {
                failed.push_back(v.id);
            }
        }
        if (!report.empty() && fs::exists(runner.root())) {
            const auto files = cmd_report({runner.root()}, report);
            emit("report: " + std::to_string(files.size()) + " files in " + report.string());
        }
        std::string summary = "summary: " + std::to_string(selected.size() - failed.size()) + "/" +
                              std::to_string(selected.size()) + " criteria passed";
        if (!failed.empty()) {
            summary += "; failed:";
            for (int id : failed) {
                summary += " " + std::to_string(id);
            }
        }
        emit(summary);
        if (!verdicts.empty()) {
            std::ofstream(verdicts) << lines.str();
        }
        const bool unexpected = std::any_of(failed.begin(), failed.end(),
                                            [&](int id) { return !expected.contains(id); });
        return strict && unexpected ? 1 : 0;
    } catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << "\n";
        return 2;
    }
}
