#include "amrg/image.hpp"

#include <algorithm>
#include <string>

namespace amrg {

GrayImage::GrayImage(int width, int height, BitDepth depth, std::uint16_t fill)
    : width_(width), height_(height), depth_(depth) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image dimensions");
  if (depth == BitDepth::Eight && fill > 255) throw std::invalid_argument("fill exceeds 8-bit range");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, BitDepth depth, std::vector<std::uint16_t> data)
    : width_(width), height_(height), depth_(depth), data_(std::move(data)) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("pixel buffer holds " + std::to_string(data_.size()) +
                                " samples, expected " + std::to_string(width * height));
  if (depth == BitDepth::Eight &&
      std::any_of(data_.begin(), data_.end(), [](std::uint16_t v) { return v > 255; }))
    throw std::invalid_argument("sample exceeds 8-bit range");
}

auto to_8bit(const GrayImage &img) -> GrayImage {
  if (img.depth() == BitDepth::Eight) return img;
  std::vector<std::uint16_t> out(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), out.begin(),
                 [](std::uint16_t v) { return static_cast<std::uint16_t>(v >> 8); });
  return GrayImage(img.width(), img.height(), BitDepth::Eight, std::move(out));
}

} // namespace amrg
