#include "treegrad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace treegrad::svg {

namespace {

constexpr double kWidth = 900;
constexpr double kHeight = 480;
constexpr double kLeft = 80;
constexpr double kRight = 260;
constexpr double kTop = 50;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string comment_safe(const std::string& s) {
    std::string out = s;
    std::size_t pos = 0;
    while ((pos = out.find("--", pos)) != std::string::npos) {
        out.replace(pos, 2, "- -");
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v, bool log) {
    char buf[32];
    if (log) {
        std::snprintf(buf, sizeof(buf), "1e%d", static_cast<int>(std::lround(std::log10(v))));
    } else {
        std::snprintf(buf, sizeof(buf), "%g", v);
    }
    return buf;
}

struct Axis {
    double lo;
    double hi;
    bool log;

    double map(double v, double pixel_lo, double pixel_hi) const {
        const double a = log ? std::log10(v) : v;
        const double l = log ? std::log10(lo) : lo;
        const double h = log ? std::log10(hi) : hi;
        const double t = h > l ? (a - l) / (h - l) : 0.5;
        return pixel_lo + t * (pixel_hi - pixel_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            const int a = static_cast<int>(std::floor(std::log10(lo)));
            const int b = static_cast<int>(std::ceil(std::log10(hi)));
            const int step = std::max(1, (b - a) / 8);
            for (int e = a; e <= b; e += step) {
                const double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) {
                    out.push_back(v);
                }
            }
            return out;
        }
        const double span = hi - lo;
        const double raw = span / 6;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0}) {
            if (raw <= m * mag) {
                step = m * mag;
                break;
            }
        }
        for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
            out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
        }
        return out;
    }
};

bool usable(double y, bool log) { return std::isfinite(y) && (!log || y > 0); }

}  // namespace

std::string render(const Chart& chart) {
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            x_lo = std::min(x_lo, p.x);
            x_hi = std::max(x_hi, p.x);
            if (s.secondary) {
                continue;
            }
            auto take = [&](double y) {
                if (usable(y, chart.log_y)) {
                    y_lo = std::min(y_lo, y);
                    y_hi = std::max(y_hi, y);
                }
            };
            take(p.y);
            if (i < s.band_low.size()) {
                take(s.band_low[i]);
                take(s.band_high[i]);
            }
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0;
        x_hi = 1;
    }
    if (x_hi == x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (!std::isfinite(y_lo)) {
        y_lo = chart.log_y ? 1e-3 : 0;
        y_hi = 1;
    }
    if (chart.y_min) {
        y_lo = *chart.y_min;
    }
    if (chart.y_max) {
        y_hi = *chart.y_max;
    }
    if (chart.log_y) {
        y_lo = std::pow(10.0, std::floor(std::log10(y_lo)));
        y_hi = std::pow(10.0, std::ceil(std::log10(y_hi)));
        if (y_hi <= y_lo) {
            y_hi = y_lo * 10;
        }
    } else if (y_hi == y_lo) {
        y_hi = y_lo + 1;
    }

    const Axis xa{x_lo, x_hi, false};
    const Axis ya{y_lo, y_hi, chart.log_y};
    const Axis sa{0.0, 1.0, false};
    const double px0 = kLeft;
    const double px1 = kWidth - kRight;
    const double py0 = kHeight - kBottom;
    const double py1 = kTop;

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    if (!chart.provenance.empty()) {
        os << "<!--\n";
        for (const auto& line : chart.provenance) {
            os << "  " << comment_safe(line) << '\n';
        }
        os << "-->\n";
    }
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kWidth / 2 - kRight / 2 + kLeft / 2) << "\" y=\"28\" font-size=\"15\" "
       << "text-anchor=\"middle\">" << escape(chart.title) << "</text>\n";

    // Axes and grid.
    os << "<g stroke=\"#999\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py0
       << "\"/>\n";
    os << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\"" << py1
       << "\"/>\n";
    os << "</g>\n";
    for (double t : xa.ticks()) {
        const double x = xa.map(t, px0, px1);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << py0 << "\" x2=\"" << num(x) << "\" y2=\""
           << py0 + 5 << "\" stroke=\"#999\"/>";
        os << "<text x=\"" << num(x) << "\" y=\"" << py0 + 18 << "\" text-anchor=\"middle\">"
           << tick_label(t, false) << "</text>\n";
    }
    for (double t : ya.ticks()) {
        const double y = ya.map(t, py0, py1);
        os << "<line x1=\"" << px0 << "\" y1=\"" << num(y) << "\" x2=\"" << px1 << "\" y2=\""
           << num(y) << "\" stroke=\"#eee\"/>";
        os << "<text x=\"" << px0 - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
           << tick_label(t, chart.log_y) << "</text>\n";
    }
    if (!chart.secondary_label.empty()) {
        os << "<line x1=\"" << px1 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py1
           << "\" stroke=\"#999\"/>\n";
        for (double t : sa.ticks()) {
            const double y = sa.map(t, py0, py1);
            os << "<text x=\"" << px1 + 6 << "\" y=\"" << num(y + 4) << "\">" << tick_label(t, false)
               << "</text>\n";
        }
        os << "<text transform=\"translate(" << px1 + 45 << ',' << num((py0 + py1) / 2)
           << ") rotate(90)\" text-anchor=\"middle\">" << escape(chart.secondary_label)
           << "</text>\n";
    }
    os << "<text x=\"" << num((px0 + px1) / 2) << "\" y=\"" << kHeight - 18
       << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
    os << "<text transform=\"translate(22," << num((py0 + py1) / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

    if (chart.reference_y && usable(*chart.reference_y, chart.log_y) && *chart.reference_y >= y_lo &&
        *chart.reference_y <= y_hi) {
        const double y = ya.map(*chart.reference_y, py0, py1);
        os << "<line x1=\"" << px0 << "\" y1=\"" << num(y) << "\" x2=\"" << px1 << "\" y2=\""
           << num(y) << "\" stroke=\"#555\" stroke-dasharray=\"2,3\"/>\n";
    }

    const double clip_lo = chart.log_y ? y_lo : -std::numeric_limits<double>::infinity();
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kPalette[si % std::size(kPalette)];
        const Axis& axis = s.secondary ? sa : ya;
        const bool log = s.secondary ? false : chart.log_y;
        auto ymap = [&](double v) {
            return axis.map(std::clamp(v, s.secondary ? 0.0 : std::max(clip_lo, axis.lo), axis.hi),
                            py0, py1);
        };
        if (!s.band_low.empty() && s.band_low.size() == s.points.size()) {
            std::ostringstream upper;
            std::ostringstream lower;
            bool any = false;
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                if (!usable(s.band_low[i], log) || !usable(s.band_high[i], log)) {
                    continue;
                }
                upper << (any ? " " : "") << num(xa.map(s.points[i].x, px0, px1)) << ','
                      << num(ymap(s.band_high[i]));
                any = true;
            }
            for (std::size_t i = s.points.size(); i-- > 0;) {
                if (!usable(s.band_low[i], log) || !usable(s.band_high[i], log)) {
                    continue;
                }
                lower << ' ' << num(xa.map(s.points[i].x, px0, px1)) << ','
                      << num(ymap(s.band_low[i]));
            }
            if (any) {
                os << "<polygon points=\"" << upper.str() << lower.str() << "\" fill=\"" << color
                   << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
            }
        }
        std::ostringstream path;
        bool first = true;
        for (const auto& p : s.points) {
            if (!usable(p.y, log)) {
                continue;
            }
            path << (first ? "" : " ") << num(xa.map(p.x, px0, px1)) << ',' << num(ymap(p.y));
            first = false;
        }
        os << "<polyline points=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        for (const auto& p : s.points) {
            if (usable(p.y, log)) {
                os << "<circle cx=\"" << num(xa.map(p.x, px0, px1)) << "\" cy=\"" << num(ymap(p.y))
                   << "\" r=\"2.5\" fill=\"" << color << "\"/>";
            }
        }
        os << '\n';
        const double ly = kTop + 16.0 * static_cast<double>(si);
        os << "<line x1=\"" << px1 + 70 << "\" y1=\"" << num(ly) << "\" x2=\"" << px1 + 90
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
        os << "<text x=\"" << px1 + 94 << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace treegrad::svg
