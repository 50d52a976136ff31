#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rarity/core.hpp"

namespace rarity::io {

/// 8/16-bit grayscale raster as stored on disk.
struct GrayRaster {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;
};

GrayRaster read_pgm(const std::string& path);
GrayRaster read_png(const std::string& path);

/// PGM (P5) or grayscale PNG, detected by magic bytes, normalized to [0,1]
/// by the maximum code value (PGM maxval, or 2^depth - 1 for PNG). Throws
/// InputError.
Image read_image(const std::string& path);

/// PGM P5; 16-bit samples are written big-endian when maxval > 255.
void write_pgm(const std::string& path, const GrayRaster& raster);
void write_png(const std::string& path, const GrayRaster& raster);

/// Shape mask from an image file: nonzero pixels are support. The mask is
/// cropped to its tight bounding box.
Shape read_mask(const std::string& path);

/// Linear min->0, max->255 rendering; non-finite entries and all-equal
/// maps render as 0.
GrayRaster render_heatmap(std::span<const double> values, int width, int height);

/// Magic for the raw score-map format: 8 bytes magic, uint32 width,
/// uint32 height (little-endian), then width*height float64 little-endian.
inline constexpr char kRawMagic[8] = {'R', 'R', 'T', 'Y', 'M', 'A', 'P', '1'};

void write_raw_map(const std::string& path, std::span<const double> values, int width, int height);

struct RawMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};
RawMap read_raw_map(const std::string& path);

}  // namespace rarity::io
