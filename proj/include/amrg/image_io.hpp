#pragma once

#include <filesystem>

#include "amrg/image.hpp"

namespace amrg {

/// Reads an 8- or 16-bit PNG/TIFF. Colour inputs are converted to gray.
auto read_image(const std::filesystem::path &path) -> GrayImage;

/// Writes an 8-bit PNG; 16-bit images are quantized first.
void write_png(const std::filesystem::path &path, const GrayImage &img);

} // namespace amrg
