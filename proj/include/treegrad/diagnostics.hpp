#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treegrad/model.hpp"
#include "treegrad/trainer.hpp"

namespace treegrad {

inline constexpr double kExplodingThreshold = 1.0;
inline constexpr double kVanishedThreshold = 1e-6;

/// One keyword-to-root gradient ratio observed during training.
struct RatioRecord {
    std::size_t epoch = 0;
    std::size_t tree_id = 0;
    int keyword_depth = 0;
    /// ‖∂J/∂rep(keyword)‖ / ‖∂J/∂rep(root)‖; NaN when the root error is zero.
    double ratio = 0.0;
    /// ‖∂J/∂mem(keyword)‖ / ‖∂J/∂rep(root)‖ (always 0 for the RNN); NaN when undefined.
    double mem_ratio = 0.0;

    bool defined() const noexcept { return ratio == ratio; }
    friend bool operator==(const RatioRecord&, const RatioRecord&) = default;
};

/// Keyword-leaf over root rep-error norm. std::nullopt if the root error norm
/// is zero. Throws if backward() has not filled the trace or the tree does not
/// have exactly one keyword.
std::optional<double> gradient_ratio(const ForwardTrace& trace);

/// Builds the record for one traced example (ratio NaN when undefined).
RatioRecord make_ratio_record(std::size_t epoch, std::size_t tree_id, const ForwardTrace& trace);

/// Thread-safe append-only record store.
class RatioSink {
public:
    void append(const RatioRecord& r);
    /// Records sorted by (epoch, depth, tree_id).
    std::vector<RatioRecord> sorted() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<RatioRecord> records_;
};

/// Observer that streams one record per training example into `sink`.
/// Reads the trace only.
ExampleObserver collect_ratios(RatioSink& sink);

struct RatioThresholds {
    double exploding = kExplodingThreshold;
    double vanished = kVanishedThreshold;
};

struct SummaryCell {
    std::size_t epoch = 0;
    int depth = 0;
    std::size_t count = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double frac_exploding = 0.0;
    double frac_vanished = 0.0;
};

struct RatioSummary {
    std::vector<SummaryCell> cells;  // sorted by (epoch, depth)
    std::size_t undefined = 0;       // records excluded for a zero root error

    const SummaryCell* find(std::size_t epoch, int depth) const;
    std::size_t max_epoch() const;
};

/// Linear-interpolation quantile of sorted values, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Groups defined records by (epoch, depth). Throws on an empty record list.
RatioSummary summarize(const std::vector<RatioRecord>& records, RatioThresholds thresholds = {});

// CSV ---------------------------------------------------------------------------
// records: epoch,tree_id,keyword_depth,ratio[,mem_ratio]
// summary: epoch,depth,count,q1,median,q3,frac_exploding,frac_vanished

std::string records_to_csv(std::vector<RatioRecord> records, bool include_mem = false);
void write_records_csv(const std::vector<RatioRecord>& records, const std::filesystem::path& path,
                       bool include_mem = false);
/// Accepts both the 4- and 5-column forms. Throws ParseError with a line number.
std::vector<RatioRecord> parse_records_csv(std::string_view text);
std::vector<RatioRecord> read_records_csv(const std::filesystem::path& path);

std::string summary_to_csv(const RatioSummary& summary);
void write_summary_csv(const RatioSummary& summary, const std::filesystem::path& path);
RatioSummary parse_summary_csv(std::string_view text);

}  // namespace treegrad
