#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amrg::lora {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// How the low-rank update is scaled: by alpha (default) or alpha / r.
enum class Scaling { Alpha, AlphaOverRank };

/// Frozen base map W (d x k, acting on k-vectors) plus trainable factors
/// A (d x r) and B (r x k). The adapted map is W + s A B with s = scale().
struct LoraLinear {
  Matrix W;
  Matrix A;
  Matrix B;
  double alpha = 1.0;
  double dropout_p = 0.05;
  Scaling scaling = Scaling::Alpha;

  auto out_dim() const -> Eigen::Index { return W.rows(); }
  auto in_dim() const -> Eigen::Index { return W.cols(); }
  auto rank() const -> Eigen::Index { return A.cols(); }
  auto scale() const -> double {
    return scaling == Scaling::Alpha ? alpha : alpha / static_cast<double>(rank());
  }

  /// Throws std::invalid_argument when the shapes or dropout rate are inconsistent.
  void check() const;
};

/// A ~ N(0, 0.02^2) from `seed`, B = 0, so the adapted map starts equal to W.
auto lora_init(const Matrix &W, int rank, double alpha, std::uint64_t seed, double dropout_p = 0.05,
               Scaling scaling = Scaling::Alpha) -> LoraLinear;

/// Inverted-dropout keep mask (entries 0 or 1/(1-p)) for an n x k input.
auto dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed) -> Matrix;

/// y = W x + s A (B x~). In training mode x~ is x under inverted dropout
/// drawn from `seed`; in evaluation mode x~ = x.
auto lora_forward(const LoraLinear &layer, const Vector &x, bool training, std::uint64_t seed) -> Vector;

/// Row-batched forward: each row of X is one input. `mask`, when given,
/// multiplies the adapter-path input elementwise.
auto lora_forward_rows(const LoraLinear &layer, const Matrix &X, const Matrix *mask = nullptr) -> Matrix;

auto lora_merge(const LoraLinear &layer) -> Matrix;

struct LoraGrads {
  Matrix dA;
  Matrix dB;
};

/// Gradients of <upstream, y> w.r.t. A and B on the evaluation path.
/// W never receives a gradient.
auto lora_grads(const LoraLinear &layer, const Vector &x, const Vector &upstream) -> LoraGrads;

struct RowBackward {
  LoraGrads grads;
  Matrix dX;
};

/// Backward of lora_forward_rows for upstream rows dY.
auto lora_backward_rows(const LoraLinear &layer, const Matrix &X, const Matrix &dY, const Matrix *mask = nullptr)
    -> RowBackward;

struct SweepGrid {
  std::vector<int> ranks{16, 32, 64};
  std::vector<double> alphas{8.0, 16.0};
};

struct SweepConfig {
  int rank;
  double alpha;

  friend auto operator==(const SweepConfig &, const SweepConfig &) -> bool = default;
};

/// Alpha-outer, rank-inner Cartesian product. Throws on an empty list.
auto sweep_plan(const SweepGrid &grid) -> std::vector<SweepConfig>;

/// Named projection sites that receive adapters.
struct PlacementManifest {
  std::vector<std::string> sites;

  auto contains(const std::string &site) const -> bool;

  /// Every projection of the toy decoder: attention q/k/v/o, cross-attention
  /// q/k/v, MLP up/down, and the visual projector.
  static auto all_linear() -> PlacementManifest;
};

// Serialization. The binary form is little-endian:
//   "LORA" | u32 version=1 | u32 d | u32 k | u32 r | f64 alpha | f64 dropout_p
//   | u8 scaling (0 alpha, 1 alpha/r) | f64 W[d*k] | f64 A[d*r] | f64 B[r*k]
// with every matrix row-major.
auto to_json(const LoraLinear &layer) -> std::string;
auto from_json(const std::string &text) -> LoraLinear;
void write_binary(std::ostream &out, const LoraLinear &layer);
auto read_binary(std::istream &in) -> LoraLinear;

} // namespace amrg::lora
