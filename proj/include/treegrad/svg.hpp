#pragma once

#include <optional>
#include <string>
#include <vector>

namespace treegrad::svg {

struct Point {
    double x;
    double y;
};

struct Series {
    std::string label;
    std::vector<Point> points;
    /// Optional band (same x as points): lower and upper y.
    std::vector<double> band_low;
    std::vector<double> band_high;
    /// Plot against the secondary (right, 0..1) axis.
    bool secondary = false;
    bool dashed = false;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::string secondary_label;  // non-empty enables the right axis
    bool log_y = false;
    std::optional<double> y_min;
    std::optional<double> y_max;
    /// Horizontal reference line in primary-axis units (e.g. chance level).
    std::optional<double> reference_y;
    std::vector<Series> series;
    /// Free-form lines emitted as an XML comment at the top of the file.
    std::vector<std::string> provenance;
};

/// Renders a static line chart. Non-positive values are dropped on a log axis.
std::string render(const Chart& chart);

}  // namespace treegrad::svg
