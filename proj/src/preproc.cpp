#include "amrg/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amrg::preproc {

void PreprocConfig::validate() const {
  if (target_size <= 0) throw std::invalid_argument("target_size must be positive");
  if (clahe_tiles < 1) throw std::invalid_argument("clahe_tiles must be >= 1");
  if (!(clahe_clip >= 1.0)) throw std::invalid_argument("clahe_clip must be >= 1.0");
}

auto histogram256(const GrayImage &img) -> std::array<long, 256> {
  std::array<long, 256> hist{};
  for (auto v : img.pixels()) ++hist[histogram_bin(v, img.depth())];
  return hist;
}

auto between_class_variance(const std::array<long, 256> &hist) -> std::array<double, 256> {
  double total = 0.0, total_sum = 0.0;
  for (int b = 0; b < 256; ++b) {
    total += static_cast<double>(hist[b]);
    total_sum += static_cast<double>(b) * static_cast<double>(hist[b]);
  }
  std::array<double, 256> sigma{};
  double n0 = 0.0, s0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    n0 += static_cast<double>(hist[t]);
    s0 += static_cast<double>(t) * static_cast<double>(hist[t]);
    const double n1 = total - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total_sum - s0) / n1;
    const double w0 = n0 / total;
    const double w1 = n1 / total;
    sigma[t] = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
  }
  return sigma;
}

auto otsu_threshold(const GrayImage &img) -> int {
  if (img.empty()) throw std::invalid_argument("otsu_threshold: empty image");
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  if (*lo == *hi) return *lo;

  const auto sigma = between_class_variance(histogram256(img));
  int best = 0;
  for (int t = 1; t < 256; ++t)
    if (sigma[t] > sigma[best]) best = t;
  if (sigma[best] == 0.0) {
    // Every sample falls in one histogram bin (possible for 16-bit data).
    return *lo;
  }
  return img.depth() == BitDepth::Eight ? best : best * 256 + 255;
}

auto foreground_bbox(const GrayImage &img, int threshold) -> BBox {
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(x, y) > threshold) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw EmptyForegroundError();
  return BBox{x0, y0, x1 + 1, y1 + 1};
}

namespace {

auto crop(const GrayImage &img, const BBox &box) -> GrayImage {
  GrayImage out(box.width(), box.height(), img.depth());
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x) out.at(x, y) = img.at(box.x0 + x, box.y0 + y);
  return out;
}

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Source taps for each destination index, pixel-centre aligned and clamped.
auto bilinear_taps(int src, int dst) -> std::vector<Tap> {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    taps[d] = Tap{lo, hi, s - lo};
  }
  return taps;
}

} // namespace

auto resize_bilinear(const GrayImage &img, int width, int height) -> GrayImage {
  if (img.empty() || width <= 0 || height <= 0) throw std::invalid_argument("resize_bilinear: empty size");
  const auto xs = bilinear_taps(img.width(), width);
  const auto ys = bilinear_taps(img.height(), height);
  GrayImage out(width, height, img.depth());
  const double top = img.max_value();
  for (int y = 0; y < height; ++y) {
    const Tap ty = ys[y];
    for (int x = 0; x < width; ++x) {
      const Tap tx = xs[x];
      const double a = img.at(tx.lo, ty.lo), b = img.at(tx.hi, ty.lo);
      const double c = img.at(tx.lo, ty.hi), d = img.at(tx.hi, ty.hi);
      const double upper = a + (b - a) * tx.frac;
      const double lower = c + (d - c) * tx.frac;
      const double v = upper + (lower - upper) * ty.frac;
      out.at(x, y) = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, top));
    }
  }
  return out;
}

auto crop_resize(const GrayImage &img, const BBox &box, const PreprocConfig &cfg) -> GrayImage {
  cfg.validate();
  if (!box.valid_for(img)) throw std::invalid_argument("crop_resize: box outside image");
  const GrayImage roi = crop(img, box);
  const int n = cfg.target_size;
  if (cfg.resize_mode == ResizeMode::Direct) return resize_bilinear(roi, n, n);

  const double scale = static_cast<double>(n) / std::max(roi.width(), roi.height());
  const int w = std::clamp(static_cast<int>(std::lround(roi.width() * scale)), 1, n);
  const int h = std::clamp(static_cast<int>(std::lround(roi.height() * scale)), 1, n);
  const GrayImage content = resize_bilinear(roi, w, h);
  GrayImage out(n, n, img.depth(), 0);
  const int ox = (n - w) / 2, oy = (n - h) / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(ox + x, oy + y) = content.at(x, y);
  return out;
}

auto flip_horizontal(const GrayImage &img) -> GrayImage {
  GrayImage out(img.width(), img.height(), img.depth());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(img.width() - 1 - x, y) = img.at(x, y);
  return out;
}

auto normalize_laterality(const GrayImage &img, Laterality side) -> GrayImage {
  return side == Laterality::Left ? flip_horizontal(img) : img;
}

// ---------------------------------------------------------------------------
// CLAHE

auto tile_cuts(int extent, int tiles) -> std::vector<int> {
  std::vector<int> cuts(static_cast<std::size_t>(tiles) + 1);
  for (int i = 0; i <= tiles; ++i)
    cuts[i] = static_cast<int>(static_cast<long>(i) * extent / tiles);
  return cuts;
}

namespace {

void clip_and_map(ClaheTile &tile, double clip_limit) {
  const double area = static_cast<double>(tile.region.width()) * tile.region.height();
  tile.ceiling = clip_limit * area / 256.0;
  double excess = 0.0;
  for (int b = 0; b < 256; ++b) {
    tile.clipped[b] = std::min(tile.histogram[b], tile.ceiling);
    excess += tile.histogram[b] - tile.clipped[b];
  }
  const double share = excess / 256.0;
  double cdf = 0.0;
  for (int b = 0; b < 256; ++b) {
    tile.redistributed[b] = tile.clipped[b] + share;
    cdf += tile.redistributed[b];
    tile.mapping[b] = static_cast<std::uint8_t>(std::clamp(std::round(255.0 * cdf / area), 0.0, 255.0));
  }
}

// Interpolation cell for coordinate `p` between tile centres: lower tile index
// and weight of the upper one.
struct Cell {
  int lo;
  int hi;
  double w;
};

auto centre_cells(const std::vector<int> &cuts, int extent) -> std::vector<Cell> {
  const int tiles = static_cast<int>(cuts.size()) - 1;
  std::vector<double> centres(static_cast<std::size_t>(tiles));
  for (int i = 0; i < tiles; ++i) centres[i] = 0.5 * (cuts[i] + cuts[i + 1] - 1);
  std::vector<Cell> cells(static_cast<std::size_t>(extent));
  for (int p = 0; p < extent; ++p) {
    if (p <= centres.front()) {
      cells[p] = {0, 0, 0.0};
    } else if (p >= centres.back()) {
      cells[p] = {tiles - 1, tiles - 1, 0.0};
    } else {
      int i = 0;
      while (p >= centres[i + 1]) ++i;
      cells[p] = {i, i + 1, (p - centres[i]) / (centres[i + 1] - centres[i])};
    }
  }
  return cells;
}

auto equalize_bins(const GrayImage &img, const PreprocConfig &cfg) -> std::vector<std::uint8_t> {
  const auto tiles = clahe_tiles(img, cfg);
  const int n = cfg.clahe_tiles;
  const auto xcells = centre_cells(tile_cuts(img.width(), n), img.width());
  const auto ycells = centre_cells(tile_cuts(img.height(), n), img.height());
  auto lut = [&](int tx, int ty) -> const std::array<std::uint8_t, 256> & {
    return tiles[static_cast<std::size_t>(ty) * n + tx].mapping;
  };

  std::vector<std::uint8_t> out(img.size());
  for (int y = 0; y < img.height(); ++y) {
    const Cell cy = ycells[y];
    for (int x = 0; x < img.width(); ++x) {
      const Cell cx = xcells[x];
      const int b = histogram_bin(img.at(x, y), img.depth());
      const double top = (1.0 - cx.w) * lut(cx.lo, cy.lo)[b] + cx.w * lut(cx.hi, cy.lo)[b];
      const double bottom = (1.0 - cx.w) * lut(cx.lo, cy.hi)[b] + cx.w * lut(cx.hi, cy.hi)[b];
      const double v = (1.0 - cy.w) * top + cy.w * bottom;
      out[static_cast<std::size_t>(y) * img.width() + x] =
          static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return out;
}

} // namespace

auto clahe_tiles(const GrayImage &img, const PreprocConfig &cfg) -> std::vector<ClaheTile> {
  cfg.validate();
  const int n = cfg.clahe_tiles;
  if (img.width() < n || img.height() < n)
    throw std::invalid_argument("clahe: image smaller than the tile grid");
  const auto xc = tile_cuts(img.width(), n);
  const auto yc = tile_cuts(img.height(), n);
  std::vector<ClaheTile> tiles(static_cast<std::size_t>(n) * n);
  for (int ty = 0; ty < n; ++ty) {
    for (int tx = 0; tx < n; ++tx) {
      ClaheTile &tile = tiles[static_cast<std::size_t>(ty) * n + tx];
      tile.region = BBox{xc[tx], yc[ty], xc[tx + 1], yc[ty + 1]};
      for (int y = tile.region.y0; y < tile.region.y1; ++y)
        for (int x = tile.region.x0; x < tile.region.x1; ++x)
          tile.histogram[histogram_bin(img.at(x, y), img.depth())] += 1.0;
      clip_and_map(tile, cfg.clahe_clip);
    }
  }
  return tiles;
}

auto clahe(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage {
  const auto eq = equalize_bins(img, cfg);
  const int scale = img.depth() == BitDepth::Eight ? 1 : 257;
  std::vector<std::uint16_t> data(eq.size());
  std::transform(eq.begin(), eq.end(), data.begin(),
                 [scale](std::uint8_t v) { return static_cast<std::uint16_t>(v * scale); });
  return GrayImage(img.width(), img.height(), img.depth(), std::move(data));
}

// ---------------------------------------------------------------------------
// CIE LAB (sRGB primaries, D65 white)

namespace {

constexpr double kXn = 0.950456;
constexpr double kZn = 1.088754;
constexpr double kDelta = 6.0 / 29.0;

auto srgb_to_linear(double c) -> double {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

auto linear_to_srgb(double c) -> double {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

auto lab_f(double t) -> double {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

auto lab_finv(double t) -> double {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

struct Lab8 {
  std::uint8_t l;
  std::uint8_t a;
  std::uint8_t b;
};

auto to_byte(double v) -> std::uint8_t {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

// 8-bit LAB encoding: L scaled to [0,255], a and b offset by 128.
auto rgb_to_lab8(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) -> Lab8 {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);
  const double x = 0.412453 * r + 0.357580 * g + 0.180423 * b;
  const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
  const double z = 0.019334 * r + 0.119193 * g + 0.950227 * b;
  const double fx = lab_f(x / kXn), fy = lab_f(y), fz = lab_f(z / kZn);
  const double l = 116.0 * fy - 16.0;
  return {to_byte(l * 255.0 / 100.0), to_byte(500.0 * (fx - fy) + 128.0), to_byte(200.0 * (fy - fz) + 128.0)};
}

auto lab8_to_rgb(Lab8 lab) -> std::array<std::uint8_t, 3> {
  const double l = lab.l * 100.0 / 255.0;
  const double fy = (l + 16.0) / 116.0;
  const double fx = fy + (lab.a - 128.0) / 500.0;
  const double fz = fy - (lab.b - 128.0) / 200.0;
  const double x = kXn * lab_finv(fx), y = lab_finv(fy), z = kZn * lab_finv(fz);
  const double r = 3.240479 * x - 1.537150 * y - 0.498535 * z;
  const double g = -0.969256 * x + 1.875992 * y + 0.041556 * z;
  const double b = 0.055648 * x - 0.204043 * y + 1.057311 * z;
  return {to_byte(255.0 * linear_to_srgb(r)), to_byte(255.0 * linear_to_srgb(g)),
          to_byte(255.0 * linear_to_srgb(b))};
}

auto gray_to_l8(std::uint8_t gray) -> std::uint8_t {
  const double y = srgb_to_linear(gray / 255.0);
  return to_byte((116.0 * lab_f(y) - 16.0) * 255.0 / 100.0);
}

auto l8_to_gray(std::uint8_t l8) -> std::uint8_t {
  const double l = l8 * 100.0 / 255.0;
  return to_byte(255.0 * linear_to_srgb(lab_finv((l + 16.0) / 116.0)));
}

} // namespace

auto clahe_lab(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage {
  const GrayImage gray = to_8bit(img);
  const std::size_t n = gray.size();
  std::vector<Lab8> lab(n);
  std::vector<std::uint16_t> lchan(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::uint8_t>(gray.pixels()[i]);
    lab[i] = rgb_to_lab8(g, g, g);
    lchan[i] = lab[i].l;
  }
  const GrayImage equalized = clahe(GrayImage(gray.width(), gray.height(), BitDepth::Eight, std::move(lchan)), cfg);
  std::vector<std::uint16_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    lab[i].l = static_cast<std::uint8_t>(equalized.pixels()[i]);
    const auto rgb = lab8_to_rgb(lab[i]);
    out[i] = static_cast<std::uint16_t>(std::lround((rgb[0] + rgb[1] + rgb[2]) / 3.0));
  }
  return GrayImage(gray.width(), gray.height(), BitDepth::Eight, std::move(out));
}

auto clahe_luminance(const GrayImage &img, const PreprocConfig &cfg) -> GrayImage {
  std::array<std::uint8_t, 256> forward{}, inverse{};
  for (int v = 0; v < 256; ++v) {
    forward[v] = gray_to_l8(static_cast<std::uint8_t>(v));
    inverse[v] = l8_to_gray(static_cast<std::uint8_t>(v));
  }
  GrayImage l = to_8bit(img);
  for (auto &v : l.pixels()) v = forward[v];
  GrayImage out = clahe(l, cfg);
  for (auto &v : out.pixels()) v = inverse[v];
  return out;
}

// ---------------------------------------------------------------------------

auto preprocess_case_traced(const GrayImage &img, Laterality side, const PreprocConfig &cfg)
    -> PreprocResult {
  cfg.validate();
  if (img.empty()) throw std::invalid_argument("preprocess_case: empty image");
  PreprocResult result;
  result.threshold = otsu_threshold(img);

  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  if (*lo == *hi && *lo > 0) {
    // A constant non-black frame is all foreground.
    result.box = BBox{0, 0, img.width(), img.height()};
  } else {
    result.box = foreground_bbox(img, result.threshold);
  }

  GrayImage stage = crop_resize(img, result.box, cfg);
  stage = normalize_laterality(stage, side);
  stage = to_8bit(stage);
  result.image = cfg.clahe_space == ClaheSpace::Lab ? clahe_luminance(stage, cfg) : clahe(stage, cfg);
  return result;
}

auto preprocess_case(const GrayImage &img, Laterality side, const PreprocConfig &cfg) -> GrayImage {
  return preprocess_case_traced(img, side, cfg).image;
}

} // namespace amrg::preproc
