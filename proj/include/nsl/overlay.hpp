#ifndef NSL_OVERLAY_HPP
#define NSL_OVERLAY_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nsl {

struct ColorRamp {
    std::array<std::uint8_t, 3> low{33, 102, 172};    // blue
    std::array<std::uint8_t, 3> high{178, 24, 43};    // red
};

// Renders one filled circle per spot at its (x, y), fill mapped linearly
// from [min, max] of the values onto the ramp, plus a legend with the
// numeric range. A degenerate range (min == max) maps to the ramp midpoint.
// Output is byte-identical for identical inputs.
std::string spot_overlay(const std::vector<std::pair<double, double>>& coords,
                         const std::vector<double>& values, const ColorRamp& ramp = {});

}  // namespace nsl

#endif  // NSL_OVERLAY_HPP
