#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "amrg/image.hpp"
#include "amrg/labels.hpp"

namespace amrg::preproc {

enum class ResizeMode { Direct, Letterbox };

/// Which signal CLAHE equalizes: raw intensity, or the L* channel of the
/// gray image viewed as an sRGB colour image.
enum class ClaheSpace { Intensity, Lab };

struct PreprocConfig {
  int target_size = 512;
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
  ResizeMode resize_mode = ResizeMode::Direct;
  ClaheSpace clahe_space = ClaheSpace::Lab;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

class EmptyForegroundError : public std::runtime_error {
public:
  EmptyForegroundError() : std::runtime_error("empty foreground: no pixel above threshold") {}
};

/// Otsu threshold over the 256-bin histogram. Pixels with bin <= t form the
/// background class. Ties go to the smaller t; a constant image returns its
/// value. For 16-bit images the result is the top sample value of bin t.
auto otsu_threshold(const GrayImage &img) -> int;

/// Between-class variance w0 w1 (mu0 - mu1)^2 for every split of `hist`.
auto between_class_variance(const std::array<long, 256> &hist) -> std::array<double, 256>;

auto histogram256(const GrayImage &img) -> std::array<long, 256>;

/// Tight box around {pixel > threshold}. Throws EmptyForegroundError.
auto foreground_bbox(const GrayImage &img, int threshold) -> BBox;

/// Bilinear crop + resize to target_size x target_size.
auto crop_resize(const GrayImage &img, const BBox &box, const PreprocConfig &cfg) -> GrayImage;

/// Bilinear resize of a whole image (pixel-centre aligned).
auto resize_bilinear(const GrayImage &img, int width, int height) -> GrayImage;

/// Mirrors left-side images so every breast faces right.
auto normalize_laterality(const GrayImage &img, Laterality side) -> GrayImage;

auto flip_horizontal(const GrayImage &img) -> GrayImage;

/// Intermediate state of one CLAHE tile, exposed for inspection.
struct ClaheTile {
  BBox region;
  std::array<double, 256> histogram{};
  std::array<double, 256> clipped{};      ///< after clipping, before redistribution
  std::array<double, 256> redistributed{};
  double ceiling = 0.0;
  std::array<std::uint8_t, 256> mapping{};
};

/// Tile bounds along one axis: tiles + 1 monotone cut positions.
auto tile_cuts(int extent, int tiles) -> std::vector<int>;

/// Per-tile histograms and equalization mappings, row-major over the grid.
auto clahe_tiles(const GrayImage &img, const PreprocConfig &cfg) -> std::vector<ClaheTile>;

/// Contrast-limited adaptive histogram equalization on intensity. Output has
/// the input's dimensions and depth.
auto clahe(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage;

/// gray -> RGB -> CIE LAB, equalize L*, back to RGB -> gray. 8-bit output.
auto clahe_lab(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage;

/// Same result as clahe_lab (within one level) via the closed-form
/// gray <-> L* mapping for neutral colours. 8-bit output.
auto clahe_luminance(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage;

struct PreprocResult {
  GrayImage image;
  int threshold = 0;
  BBox box;
};

/// Otsu -> bbox -> crop_resize -> normalize_laterality -> CLAHE.
auto preprocess_case_traced(const GrayImage &img, Laterality side, const PreprocConfig &cfg)
    -> PreprocResult;

auto preprocess_case(const GrayImage &img, Laterality side, const PreprocConfig &cfg) -> GrayImage;

} // namespace amrg::preproc
