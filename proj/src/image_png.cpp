#include "nsl/image_png.hpp"

#include <png.h>

#include <cstring>

#include "nsl/errors.hpp"

namespace nsl {

RasterImage read_png(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;

    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw DecodeError(path + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;

    RasterImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.pixels.resize(static_cast<size_t>(image.width) * image.height);

    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw DecodeError(path + ": " + image.message);
    }
    return out;
}

void write_png(const std::string& path, const RasterImage& raster) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = PNG_FORMAT_RGB;

    if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), 0, nullptr)) {
        throw DecodeError(path + ": " + image.message);
    }
}

}  // namespace nsl
