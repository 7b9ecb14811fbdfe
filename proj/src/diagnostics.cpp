#include "treegrad/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "text_io.hpp"

namespace treegrad {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t traced_keyword(const ForwardTrace& t) {
    if (!t.has_errors()) {
        throw std::invalid_argument("gradient_ratio: trace has no error vectors (run backward first)");
    }
    std::size_t found = t.topology.size();
    std::size_t count = 0;
    for (std::size_t i = 0; i < t.topology.size(); ++i) {
        const auto& n = t.topology[i];
        if (n.is_leaf() && is_keyword(n.token)) {
            found = i;
            ++count;
        }
    }
    if (count != 1) {
        throw std::invalid_argument("gradient_ratio: tree has " + std::to_string(count) +
                                    " keyword leaves");
    }
    return found;
}

int node_depth(const ForwardTrace& t, std::size_t target) {
    std::vector<int> depth(t.topology.size(), 0);
    for (std::size_t i = t.topology.size(); i-- > 0;) {
        const auto& n = t.topology[i];
        if (!n.is_leaf()) {
            depth[n.left] = depth[i] + 1;
            depth[n.right] = depth[i] + 1;
        }
    }
    return depth[target];
}

}  // namespace

std::optional<double> gradient_ratio(const ForwardTrace& trace) {
    const std::size_t k = traced_keyword(trace);
    const double root = l2_norm(trace.err_rep[trace.root()]);
    if (root == 0.0) {
        return std::nullopt;
    }
    return l2_norm(trace.err_rep[k]) / root;
}

RatioRecord make_ratio_record(std::size_t epoch, std::size_t tree_id, const ForwardTrace& trace) {
    const std::size_t k = traced_keyword(trace);
    RatioRecord r;
    r.epoch = epoch;
    r.tree_id = tree_id;
    r.keyword_depth = node_depth(trace, k);
    const double root = l2_norm(trace.err_rep[trace.root()]);
    if (root == 0.0) {
        r.ratio = kNaN;
        r.mem_ratio = kNaN;
    } else {
        r.ratio = l2_norm(trace.err_rep[k]) / root;
        r.mem_ratio = l2_norm(trace.err_mem[k]) / root;
    }
    return r;
}

void RatioSink::append(const RatioRecord& r) {
    std::lock_guard lock(mutex_);
    records_.push_back(r);
}

namespace {

bool record_order(const RatioRecord& a, const RatioRecord& b) {
    return std::tie(a.epoch, a.keyword_depth, a.tree_id) <
           std::tie(b.epoch, b.keyword_depth, b.tree_id);
}

}  // namespace

std::vector<RatioRecord> RatioSink::sorted() const {
    std::vector<RatioRecord> out;
    {
        std::lock_guard lock(mutex_);
        out = records_;
    }
    std::stable_sort(out.begin(), out.end(), record_order);
    return out;
}

std::size_t RatioSink::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

ExampleObserver collect_ratios(RatioSink& sink) {
    return [&sink](std::size_t epoch, std::size_t index, const LabeledExample&,
                   const ForwardTrace& trace) { sink.append(make_ratio_record(epoch, index, trace)); };
}

const SummaryCell* RatioSummary::find(std::size_t epoch, int depth) const {
    for (const auto& c : cells) {
        if (c.epoch == epoch && c.depth == depth) {
            return &c;
        }
    }
    return nullptr;
}

std::size_t RatioSummary::max_epoch() const {
    std::size_t m = 0;
    for (const auto& c : cells) {
        m = std::max(m, c.epoch);
    }
    return m;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RatioSummary summarize(const std::vector<RatioRecord>& records, RatioThresholds thresholds) {
    if (records.empty()) {
        throw std::invalid_argument("summarize: no ratio records");
    }
    RatioSummary out;
    std::map<std::pair<std::size_t, int>, std::vector<double>> groups;
    for (const auto& r : records) {
        if (!r.defined()) {
            ++out.undefined;
            continue;
        }
        groups[{r.epoch, r.keyword_depth}].push_back(r.ratio);
    }
    for (auto& [key, values] : groups) {
        std::sort(values.begin(), values.end());
        SummaryCell c;
        c.epoch = key.first;
        c.depth = key.second;
        c.count = values.size();
        c.q1 = quantile_sorted(values, 0.25);
        c.median = quantile_sorted(values, 0.5);
        c.q3 = quantile_sorted(values, 0.75);
        const auto n = static_cast<double>(values.size());
        c.frac_exploding = static_cast<double>(std::count_if(
                               values.begin(), values.end(),
                               [&](double v) { return v > thresholds.exploding; })) /
                           n;
        c.frac_vanished = static_cast<double>(std::count_if(
                              values.begin(), values.end(),
                              [&](double v) { return v < thresholds.vanished; })) /
                          n;
        out.cells.push_back(c);
    }
    return out;
}

// CSV ----------------------------------------------------------------------------

std::string records_to_csv(std::vector<RatioRecord> records, bool include_mem) {
    std::stable_sort(records.begin(), records.end(), record_order);
    std::string out = include_mem ? "epoch,tree_id,keyword_depth,ratio,mem_ratio\n"
                                  : "epoch,tree_id,keyword_depth,ratio\n";
    for (const auto& r : records) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.tree_id) + "," +
               std::to_string(r.keyword_depth) + "," + format_double(r.ratio);
        if (include_mem) {
            out += "," + format_double(r.mem_ratio);
        }
        out += '\n';
    }
    return out;
}

void write_records_csv(const std::vector<RatioRecord>& records, const std::filesystem::path& path,
                       bool include_mem) {
    detail::write_file(path, records_to_csv(records, include_mem));
}

namespace {

template <typename T>
T parse_count(const std::string& cell, std::size_t line_no, std::size_t column) {
    const auto v = parse_double(cell);
    if (!v || *v < 0 || std::floor(*v) != *v) {
        throw ParseError("expected a non-negative integer, got '" + cell + "'", line_no, column);
    }
    return static_cast<T>(*v);
}

double parse_value(const std::string& cell, std::size_t line_no, std::size_t column) {
    const auto v = parse_double(cell);
    if (!v) {
        throw ParseError("expected a number, got '" + cell + "'", line_no, column);
    }
    return *v;
}

}  // namespace

std::vector<RatioRecord> parse_records_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    if (lines.empty()) {
        throw ParseError("empty ratio file", 1, 1);
    }
    bool with_mem = false;
    if (lines[0] == "epoch,tree_id,keyword_depth,ratio,mem_ratio") {
        with_mem = true;
    } else if (lines[0] != "epoch,tree_id,keyword_depth,ratio") {
        throw ParseError("expected header 'epoch,tree_id,keyword_depth,ratio'", 1, 1);
    }
    const std::size_t columns = with_mem ? 5 : 4;
    std::vector<RatioRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        const std::size_t line_no = i + 1;
        const auto cells = detail::split(lines[i], ',');
        if (cells.size() != columns) {
            throw ParseError("expected " + std::to_string(columns) + " columns", line_no, 1);
        }
        RatioRecord r;
        r.epoch = parse_count<std::size_t>(cells[0], line_no, 1);
        r.tree_id = parse_count<std::size_t>(cells[1], line_no, 2);
        r.keyword_depth = parse_count<int>(cells[2], line_no, 3);
        r.ratio = parse_value(cells[3], line_no, 4);
        r.mem_ratio = with_mem ? parse_value(cells[4], line_no, 5) : 0.0;
        out.push_back(r);
    }
    return out;
}

std::vector<RatioRecord> read_records_csv(const std::filesystem::path& path) {
    try {
        return parse_records_csv(detail::read_file(path));
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string summary_to_csv(const RatioSummary& summary) {
    std::string out = "epoch,depth,count,q1,median,q3,frac_exploding,frac_vanished\n";
    for (const auto& c : summary.cells) {
        out += std::to_string(c.epoch) + "," + std::to_string(c.depth) + "," +
               std::to_string(c.count) + "," + format_double(c.q1) + "," +
               format_double(c.median) + "," + format_double(c.q3) + "," +
               format_double(c.frac_exploding) + "," + format_double(c.frac_vanished) + "\n";
    }
    return out;
}

void write_summary_csv(const RatioSummary& summary, const std::filesystem::path& path) {
    detail::write_file(path, summary_to_csv(summary));
}

RatioSummary parse_summary_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    if (lines.empty() || lines[0] != "epoch,depth,count,q1,median,q3,frac_exploding,frac_vanished") {
        throw ParseError("expected ratio summary header", 1, 1);
    }
    RatioSummary out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        const std::size_t line_no = i + 1;
        const auto cells = detail::split(lines[i], ',');
        if (cells.size() != 8) {
            throw ParseError("expected 8 columns", line_no, 1);
        }
        SummaryCell c;
        c.epoch = parse_count<std::size_t>(cells[0], line_no, 1);
        c.depth = parse_count<int>(cells[1], line_no, 2);
        c.count = parse_count<std::size_t>(cells[2], line_no, 3);
        c.q1 = parse_value(cells[3], line_no, 4);
        c.median = parse_value(cells[4], line_no, 5);
        c.q3 = parse_value(cells[5], line_no, 6);
        c.frac_exploding = parse_value(cells[6], line_no, 7);
        c.frac_vanished = parse_value(cells[7], line_no, 8);
        out.cells.push_back(c);
    }
    return out;
}

}  // namespace treegrad
