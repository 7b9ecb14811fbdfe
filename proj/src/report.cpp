#include "treegrad/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "text_io.hpp"
#include "treegrad/svg.hpp"

namespace treegrad {

namespace {

namespace fs = std::filesystem;

enum class CsvKind { summary, ratios, train_log, other };

CsvKind classify(const std::string& header) {
    if (header == "experiment,index,model,run,seed,best_epoch,epochs,dev_accuracy,test_accuracy") {
        return CsvKind::summary;
    }
    if (header == "epoch,tree_id,keyword_depth,ratio" ||
        header == "epoch,tree_id,keyword_depth,ratio,mem_ratio") {
        return CsvKind::ratios;
    }
    if (header == "epoch,train_loss,dev_accuracy,seconds") {
        return CsvKind::train_log;
    }
    return CsvKind::other;
}

std::string first_line(const std::string& text) {
    auto lines = detail::lines_of(text.substr(0, text.find('\n') + 1));
    return lines.empty() ? std::string() : lines[0];
}

void collect_files(const fs::path& p, std::vector<fs::path>& out) {
    if (fs::is_directory(p)) {
        std::vector<fs::path> found;
        for (const auto& e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file() && e.path().extension() == ".csv") {
                found.push_back(e.path());
            }
        }
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
        out.push_back(p);
    } else {
        throw std::runtime_error("report input not found: " + p.string());
    }
}

template <typename F>
auto with_path(const fs::path& p, F parse) {
    try {
        return parse();
    } catch (const ParseError& e) {
        throw std::runtime_error(p.string() + ": " + e.what());
    }
}

std::string series_label(const fs::path& ratio_file) {
    std::string label;
    const auto parent = ratio_file.parent_path();
    if (!parent.parent_path().filename().empty()) {
        label = parent.parent_path().filename().string() + "/";
    }
    label += parent.filename().string();
    if (ratio_file.stem() != "ratios") {
        label += "/" + ratio_file.stem().string();
    }
    return label.empty() ? ratio_file.stem().string() : label;
}

std::string file_safe(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == '\\' || c == ' ') {
            c = '_';
        }
    }
    return s;
}

void write_accuracy_figure(const std::vector<const TrainSummary*>& group, int experiment,
                           const fs::path& out_dir, std::vector<fs::path>& written) {
    const bool by_length = experiment == 1;
    const std::string stem = by_length ? "accuracy_vs_length" : "accuracy_vs_depth";
    std::string csv = "model,index,runs,best,q1,median,q3\n";
    std::map<ModelKind, std::vector<std::pair<int, AccuracyDistribution>>> per_model;
    for (const TrainSummary* s : group) {
        const auto d = s->test_accuracy();
        per_model[s->model].push_back({s->data.index, d});
    }
    svg::Chart chart;
    chart.title = by_length ? "Test accuracy vs sentence length" : "Test accuracy vs keyword depth";
    chart.x_label = by_length ? "maximum sentence length (dataset i covers 10i-9..10i)"
                              : "keyword depth (dataset i holds depths i and i+1)";
    chart.y_label = "test accuracy";
    chart.y_min = 0.0;
    chart.y_max = 1.0;
    chart.reference_y = 0.1;
    chart.provenance.push_back("Generated by treegrad report from " + std::to_string(group.size()) +
                               " result groups; dotted line is chance (0.1).");
    for (auto& [kind, rows] : per_model) {
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        svg::Series best{std::string(to_string(kind)) + " best", {}, {}, {}, false, false};
        svg::Series median{std::string(to_string(kind)) + " median (IQR)", {}, {}, {}, false, true};
        for (const auto& [index, d] : rows) {
            const double x = by_length ? 10.0 * index : static_cast<double>(index);
            best.points.push_back({x, d.best});
            median.points.push_back({x, d.median});
            median.band_low.push_back(d.q1);
            median.band_high.push_back(d.q3);
            std::size_t runs = 0;
            for (const TrainSummary* s : group) {
                if (s->model == kind && s->data.index == index) {
                    runs += s->runs.size();
                }
            }
            csv += std::string(to_string(kind)) + "," + std::to_string(index) + "," +
                   std::to_string(runs) + "," + format_double(d.best) + "," +
                   format_double(d.q1) + "," + format_double(d.median) + "," +
                   format_double(d.q3) + "\n";
        }
        chart.series.push_back(std::move(best));
        chart.series.push_back(std::move(median));
    }
    detail::write_file(out_dir / (stem + ".csv"), csv);
    detail::write_file(out_dir / (stem + ".svg"), svg::render(chart));
    written.push_back(out_dir / (stem + ".csv"));
    written.push_back(out_dir / (stem + ".svg"));
}

void write_ratio_figures(const RatioSeries& series, const ReportOptions& options,
                         const fs::path& out_dir, std::vector<fs::path>& written) {
    const std::string stem = file_safe(series.label);
    if (series.records.empty()) {
        return;
    }
    const RatioSummary summary = summarize(series.records);
    write_summary_csv(summary, out_dir / (stem + "_ratio_summary.csv"));
    written.push_back(out_dir / (stem + "_ratio_summary.csv"));

    svg::Chart by_depth;
    by_depth.title = "Keyword/root error-norm ratio vs keyword depth: " + series.label;
    by_depth.x_label = "keyword depth";
    by_depth.y_label = "ratio (median, IQR band)";
    by_depth.log_y = true;
    by_depth.reference_y = 1.0;
    by_depth.provenance.push_back("Generated by treegrad report; " +
                                  std::to_string(series.records.size()) + " ratio records, " +
                                  std::to_string(summary.undefined) + " undefined.");
    std::map<std::size_t, svg::Series> per_epoch;
    for (const auto& c : summary.cells) {
        if (c.count < options.min_count) {
            continue;
        }
        auto& s = per_epoch[c.epoch];
        s.label = "epoch " + std::to_string(c.epoch);
        s.points.push_back({static_cast<double>(c.depth), c.median});
        s.band_low.push_back(c.q1);
        s.band_high.push_back(c.q3);
    }
    for (auto& [epoch, s] : per_epoch) {
        by_depth.series.push_back(std::move(s));
    }
    detail::write_file(out_dir / (stem + "_ratio_by_depth.svg"), svg::render(by_depth));
    written.push_back(out_dir / (stem + "_ratio_by_depth.svg"));

    const int depth = options.fixed_depth;
    std::string csv = "epoch,count,q1,median,q3,frac_exploding,frac_vanished,dev_accuracy\n";
    svg::Chart at_depth;
    at_depth.title = "Ratio at depth " + std::to_string(depth) + " per epoch: " + series.label;
    at_depth.x_label = "epoch";
    at_depth.y_label = "ratio (median, IQR band)";
    at_depth.log_y = true;
    at_depth.provenance.push_back("Generated by treegrad report; fixed depth " +
                                  std::to_string(depth) + ".");
    svg::Series med{"median ratio", {}, {}, {}, false, false};
    svg::Series dev{"dev accuracy", {}, {}, {}, true, true};
    std::map<std::size_t, double> dev_by_epoch;
    if (series.log) {
        for (const auto& r : series.log->epochs) {
            dev_by_epoch[r.epoch] = r.dev_accuracy;
        }
        at_depth.secondary_label = "dev accuracy";
    }
    for (std::size_t e = 1; e <= summary.max_epoch(); ++e) {
        const SummaryCell* c = summary.find(e, depth);
        const auto dv = dev_by_epoch.find(e);
        csv += std::to_string(e) + ",";
        if (c != nullptr) {
            csv += std::to_string(c->count) + "," + format_double(c->q1) + "," +
                   format_double(c->median) + "," + format_double(c->q3) + "," +
                   format_double(c->frac_exploding) + "," + format_double(c->frac_vanished);
            if (c->count >= options.min_count) {
                med.points.push_back({static_cast<double>(e), c->median});
                med.band_low.push_back(c->q1);
                med.band_high.push_back(c->q3);
            }
        } else {
            csv += "0,,,,,,";
        }
        csv += "," + (dv != dev_by_epoch.end() ? format_double(dv->second) : std::string()) + "\n";
        if (dv != dev_by_epoch.end()) {
            dev.points.push_back({static_cast<double>(e), dv->second});
        }
    }
    at_depth.series.push_back(std::move(med));
    if (!dev.points.empty()) {
        at_depth.series.push_back(std::move(dev));
    }
    const std::string fixed = stem + "_ratio_depth" + std::to_string(depth);
    detail::write_file(out_dir / (fixed + ".csv"), csv);
    detail::write_file(out_dir / (fixed + ".svg"), svg::render(at_depth));
    written.push_back(out_dir / (fixed + ".csv"));
    written.push_back(out_dir / (fixed + ".svg"));
}

}  // namespace

ReportInputs load_report_inputs(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> files;
    for (const auto& p : inputs) {
        collect_files(p, files);
    }
    ReportInputs out;
    std::map<fs::path, TrainLog> logs;
    std::vector<std::pair<fs::path, std::vector<RatioRecord>>> ratio_files;
    std::set<fs::path> seen;
    for (const auto& f : files) {
        if (!seen.insert(fs::weakly_canonical(f)).second) {
            continue;
        }
        const std::string text = detail::read_file(f);
        switch (classify(first_line(text))) {
            case CsvKind::summary: {
                auto groups = with_path(f, [&] { return parse_results_csv(text); });
                out.summaries.insert(out.summaries.end(), groups.begin(), groups.end());
                break;
            }
            case CsvKind::ratios:
                ratio_files.emplace_back(f, with_path(f, [&] { return parse_records_csv(text); }));
                break;
            case CsvKind::train_log:
                logs[f.parent_path()] = with_path(f, [&] { return TrainLog::parse_csv(text); });
                break;
            case CsvKind::other:
                // Tables written by an earlier report run are skipped when
                // re-reading a directory; loose files must be recognisable.
                if (std::find(inputs.begin(), inputs.end(), f) != inputs.end()) {
                    throw std::runtime_error(f.string() + ": line 1: unrecognised CSV header");
                }
                break;
        }
    }
    for (auto& [path, records] : ratio_files) {
        RatioSeries s;
        s.label = series_label(path);
        s.records = std::move(records);
        if (auto it = logs.find(path.parent_path()); it != logs.end()) {
            s.log = it->second;
        }
        out.ratios.push_back(std::move(s));
    }
    return out;
}

std::vector<fs::path> cmd_report(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                                 const ReportOptions& options) {
    if (inputs.empty()) {
        throw std::invalid_argument("report: no inputs given");
    }
    const ReportInputs in = load_report_inputs(inputs);
    if (in.summaries.empty() && in.ratios.empty()) {
        throw std::invalid_argument("report: inputs contain no result or ratio files");
    }
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (int experiment : {1, 2}) {
        std::vector<const TrainSummary*> group;
        for (const auto& s : in.summaries) {
            if (s.data.experiment == experiment && !s.runs.empty()) {
                group.push_back(&s);
            }
        }
        if (!group.empty()) {
            write_accuracy_figure(group, experiment, out_dir, written);
        }
    }
    for (const auto& series : in.ratios) {
        write_ratio_figures(series, options, out_dir, written);
    }
    return written;
}

}  // namespace treegrad
