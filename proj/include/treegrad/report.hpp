#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treegrad/diagnostics.hpp"
#include "treegrad/experiment.hpp"

namespace treegrad {

struct RatioSeries {
    std::string label;
    std::vector<RatioRecord> records;
    std::optional<TrainLog> log;  // train_log.csv found beside the ratio file
};

struct ReportInputs {
    std::vector<TrainSummary> summaries;
    std::vector<RatioSeries> ratios;
};

/// Files are classified by their CSV header; directories are searched
/// recursively. Unrecognised CSV headers are an error naming the file.
ReportInputs load_report_inputs(const std::vector<std::filesystem::path>& inputs);

struct ReportOptions {
    int fixed_depth = 10;
    /// Summary cells with fewer records are left out of the figures.
    std::size_t min_count = 1;
};

/// Writes accuracy-vs-length (Experiment 1), accuracy-vs-depth (Experiment 2),
/// per-series ratio-vs-depth-per-epoch and ratio-vs-epoch-at-fixed-depth
/// tables (CSV) and figures (SVG). Returns the written paths.
/// Throws std::invalid_argument when `inputs` is empty.
std::vector<std::filesystem::path> cmd_report(const std::vector<std::filesystem::path>& inputs,
                                              const std::filesystem::path& out_dir,
                                              const ReportOptions& options = {});

}  // namespace treegrad
