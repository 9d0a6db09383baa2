#ifndef NSL_IMAGE_PNG_HPP
#define NSL_IMAGE_PNG_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nsl {

// 8-bit RGB raster, row-major.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::array<std::uint8_t, 3>> pixels;

    const std::array<std::uint8_t, 3>& at(int x, int y) const {
        return pixels[static_cast<size_t>(y) * static_cast<size_t>(width) +
                      static_cast<size_t>(x)];
    }
};

RasterImage read_png(const std::string& path);
void write_png(const std::string& path, const RasterImage& image);

}  // namespace nsl

#endif  // NSL_IMAGE_PNG_HPP
