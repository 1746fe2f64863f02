#pragma once

#include <filesystem>

#include "simip/raster.hpp"

namespace simip {

// Binary masks are written as 8-bit grayscale {0,255}; on read any nonzero
// gray value (or 1-bit PNG bit) becomes 1.
void write_png(const std::filesystem::path& path, const Mask& mask);
void write_png(const std::filesystem::path& path, const Image& image);
Mask read_mask_png(const std::filesystem::path& path);
// Grayscale inputs are replicated to three channels; alpha is dropped.
Image read_image_png(const std::filesystem::path& path);

}  // namespace simip
