#include "nsl/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nsl/errors.hpp"

namespace nsl {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string hex_color(const std::array<std::uint8_t, 3>& low,
                      const std::array<std::uint8_t, 3>& high, double t) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(std::lround(low[0] + t * (high[0] - low[0]))),
                  static_cast<int>(std::lround(low[1] + t * (high[1] - low[1]))),
                  static_cast<int>(std::lround(low[2] + t * (high[2] - low[2]))));
    return buf;
}

}  // namespace

std::string spot_overlay(const std::vector<std::pair<double, double>>& coords,
                         const std::vector<double>& values, const ColorRamp& ramp) {
    if (values.empty()) throw Empty("spot_overlay: no spots");
    if (coords.size() != values.size()) {
        throw LengthMismatch("spot_overlay: " + std::to_string(coords.size()) + " coords vs " +
                             std::to_string(values.size()) + " values");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NonFinite("spot_overlay: non-finite value");
    }

    double min_x = coords[0].first, max_x = coords[0].first;
    double min_y = coords[0].second, max_y = coords[0].second;
    double min_v = values[0], max_v = values[0];
    for (size_t i = 0; i < coords.size(); ++i) {
        min_x = std::min(min_x, coords[i].first);
        max_x = std::max(max_x, coords[i].first);
        min_y = std::min(min_y, coords[i].second);
        max_y = std::max(max_y, coords[i].second);
        min_v = std::min(min_v, values[i]);
        max_v = std::max(max_v, values[i]);
    }

    constexpr double kMargin = 24.0;
    constexpr double kRadius = 6.0;
    constexpr double kLegendHeight = 46.0;
    const double width = (max_x - min_x) + 2 * kMargin;
    const double height = (max_y - min_y) + 2 * kMargin + kLegendHeight;
    const double range = max_v - min_v;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (size_t i = 0; i < coords.size(); ++i) {
        const double t = range > 0 ? (values[i] - min_v) / range : 0.5;
        svg << "  <circle cx=\"" << fmt(coords[i].first - min_x + kMargin) << "\" cy=\""
            << fmt(coords[i].second - min_y + kMargin) << "\" r=\"" << fmt(kRadius)
            << "\" fill=\"" << hex_color(ramp.low, ramp.high, t) << "\"/>\n";
    }

    // Legend: gradient bar with the numeric range.
    const double bar_y = height - kLegendHeight + 12;
    const double bar_w = std::max(120.0, width - 2 * kMargin);
    svg << "  <defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">"
        << "<stop offset=\"0\" stop-color=\"" << hex_color(ramp.low, ramp.high, 0.0) << "\"/>"
        << "<stop offset=\"1\" stop-color=\"" << hex_color(ramp.low, ramp.high, 1.0) << "\"/>"
        << "</linearGradient></defs>\n";
    svg << "  <rect x=\"" << fmt(kMargin) << "\" y=\"" << fmt(bar_y) << "\" width=\""
        << fmt(bar_w) << "\" height=\"10\" fill=\"url(#ramp)\"/>\n";
    svg << "  <text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(bar_y + 24)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_value(min_v) << "</text>\n";
    svg << "  <text x=\"" << fmt(kMargin + bar_w) << "\" y=\"" << fmt(bar_y + 24)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << fmt_value(max_v) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace nsl
