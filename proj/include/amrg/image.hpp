#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace amrg {

enum class BitDepth { Eight = 8, Sixteen = 16 };

/// Row-major grayscale raster. Samples are held as uint16 for both depths;
/// an 8-bit image never stores values above 255.
class GrayImage {
public:
  GrayImage() = default;
  GrayImage(int width, int height, BitDepth depth, std::uint16_t fill = 0);
  GrayImage(int width, int height, BitDepth depth, std::vector<std::uint16_t> data);

  auto width() const -> int { return width_; }
  auto height() const -> int { return height_; }
  auto depth() const -> BitDepth { return depth_; }
  auto max_value() const -> std::uint16_t { return depth_ == BitDepth::Eight ? 255 : 65535; }
  auto empty() const -> bool { return data_.empty(); }
  auto size() const -> std::size_t { return data_.size(); }

  auto at(int x, int y) const -> std::uint16_t { return data_[index(x, y)]; }
  auto at(int x, int y) -> std::uint16_t & { return data_[index(x, y)]; }

  auto pixels() const -> std::span<const std::uint16_t> { return data_; }
  auto pixels() -> std::span<std::uint16_t> { return data_; }

  friend auto operator==(const GrayImage &, const GrayImage &) -> bool = default;

private:
  auto index(int x, int y) const -> std::size_t {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  BitDepth depth_ = BitDepth::Eight;
  std::vector<std::uint16_t> data_;
};

/// 256-bin histogram index of a sample (16-bit samples keep their high byte).
inline auto histogram_bin(std::uint16_t value, BitDepth depth) -> int {
  return depth == BitDepth::Eight ? value : value >> 8;
}

/// Quantizes a 16-bit image to 8 bits by histogram bin; 8-bit images are copied.
auto to_8bit(const GrayImage &img) -> GrayImage;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  auto width() const -> int { return x1 - x0; }
  auto height() const -> int { return y1 - y0; }
  auto valid_for(const GrayImage &img) const -> bool {
    return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= img.width() && y1 <= img.height();
  }

  friend auto operator==(const BBox &, const BBox &) -> bool = default;
};

} // namespace amrg
