#include "amrg/adapters.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace amrg::lora {

void LoraLinear::check() const {
  if (A.rows() != W.rows() || B.cols() != W.cols() || A.cols() != B.rows())
    throw std::invalid_argument("LoraLinear: factor shapes do not match W");
  if (A.cols() < 1) throw std::invalid_argument("LoraLinear: rank must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("LoraLinear: dropout must be in [0, 1)");
}

auto lora_init(const Matrix &W, int rank, double alpha, std::uint64_t seed, double dropout_p, Scaling scaling)
    -> LoraLinear {
  if (rank < 1) throw std::invalid_argument("lora_init: rank must be >= 1");
  if (rank > std::min(W.rows(), W.cols()))
    throw std::invalid_argument("lora_init: rank " + std::to_string(rank) + " exceeds min(d, k) = " +
                                std::to_string(std::min(W.rows(), W.cols())));
  LoraLinear layer;
  layer.W = W;
  layer.A.resize(W.rows(), rank);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (Eigen::Index i = 0; i < layer.A.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.A.cols(); ++j) layer.A(i, j) = normal(rng);
  layer.B = Matrix::Zero(rank, W.cols());
  layer.alpha = alpha;
  layer.dropout_p = dropout_p;
  layer.scaling = scaling;
  layer.check();
  return layer;
}

auto dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed) -> Matrix {
  Matrix mask(rows, cols);
  std::mt19937_64 rng(seed);
  const double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      mask(i, j) = u < keep ? 1.0 / keep : 0.0;
    }
  }
  return mask;
}

auto lora_forward(const LoraLinear &layer, const Vector &x, bool training, std::uint64_t seed) -> Vector {
  if (x.size() != layer.in_dim())
    throw std::invalid_argument("lora_forward: input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(layer.in_dim()));
  Vector xt = x;
  if (training && layer.dropout_p > 0.0) xt = xt.cwiseProduct(dropout_mask(x.size(), 1, layer.dropout_p, seed).col(0));
  return layer.W * x + layer.scale() * (layer.A * (layer.B * xt));
}

auto lora_forward_rows(const LoraLinear &layer, const Matrix &X, const Matrix *mask) -> Matrix {
  if (X.cols() != layer.in_dim()) throw std::invalid_argument("lora_forward_rows: input width mismatch");
  Matrix Y = X * layer.W.transpose();
  if (mask) {
    Y.noalias() += layer.scale() * (X.cwiseProduct(*mask) * layer.B.transpose()) * layer.A.transpose();
  } else {
    Y.noalias() += layer.scale() * (X * layer.B.transpose()) * layer.A.transpose();
  }
  return Y;
}

auto lora_merge(const LoraLinear &layer) -> Matrix { return layer.W + layer.scale() * layer.A * layer.B; }

auto lora_grads(const LoraLinear &layer, const Vector &x, const Vector &upstream) -> LoraGrads {
  if (x.size() != layer.in_dim() || upstream.size() != layer.out_dim())
    throw std::invalid_argument("lora_grads: dimension mismatch");
  const double s = layer.scale();
  return {s * upstream * (layer.B * x).transpose(), s * (layer.A.transpose() * upstream) * x.transpose()};
}

auto lora_backward_rows(const LoraLinear &layer, const Matrix &X, const Matrix &dY, const Matrix *mask)
    -> RowBackward {
  const double s = layer.scale();
  const Matrix Xt = mask ? Matrix(X.cwiseProduct(*mask)) : X;
  const Matrix dYA = dY * layer.A; // n x r
  RowBackward out;
  out.grads.dA = s * dY.transpose() * (Xt * layer.B.transpose());
  out.grads.dB = s * dYA.transpose() * Xt;
  Matrix dXt = s * dYA * layer.B;
  if (mask) dXt = dXt.cwiseProduct(*mask);
  out.dX = dY * layer.W + dXt;
  return out;
}

auto sweep_plan(const SweepGrid &grid) -> std::vector<SweepConfig> {
  if (grid.ranks.empty() || grid.alphas.empty()) throw std::invalid_argument("sweep_plan: empty grid axis");
  std::vector<SweepConfig> plan;
  for (double alpha : grid.alphas)
    for (int rank : grid.ranks) plan.push_back({rank, alpha});
  return plan;
}

auto PlacementManifest::contains(const std::string &site) const -> bool {
  return std::find(sites.begin(), sites.end(), site) != sites.end();
}

auto PlacementManifest::all_linear() -> PlacementManifest {
  return {{"self_attn.q_proj", "self_attn.k_proj", "self_attn.v_proj", "self_attn.o_proj", "cross_attn.q_proj",
           "cross_attn.k_proj", "cross_attn.v_proj", "mlp.up_proj", "mlp.down_proj", "vision.proj"}};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

auto flatten(const Matrix &m) -> std::vector<double> {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

auto unflatten(const std::vector<double> &v, Eigen::Index rows, Eigen::Index cols, const char *name) -> Matrix {
  if (v.size() != static_cast<std::size_t>(rows * cols))
    throw std::invalid_argument(std::string("serialized ") + name + " has the wrong number of entries");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  return m;
}

template <typename T>
void put_le(std::ostream &out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
auto get_le(std::istream &in) -> T {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T))) throw std::runtime_error("truncated LoRA binary");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr std::uint32_t kBinaryVersion = 1;

} // namespace

auto to_json(const LoraLinear &layer) -> std::string {
  json doc;
  doc["d"] = layer.out_dim();
  doc["k"] = layer.in_dim();
  doc["r"] = layer.rank();
  doc["alpha"] = layer.alpha;
  doc["dropout_p"] = layer.dropout_p;
  doc["scaling"] = layer.scaling == Scaling::Alpha ? "alpha" : "alpha_over_r";
  doc["W"] = flatten(layer.W);
  doc["A"] = flatten(layer.A);
  doc["B"] = flatten(layer.B);
  return doc.dump();
}

auto from_json(const std::string &text) -> LoraLinear {
  const json doc = json::parse(text);
  const auto d = doc.at("d").get<Eigen::Index>();
  const auto k = doc.at("k").get<Eigen::Index>();
  const auto r = doc.at("r").get<Eigen::Index>();
  LoraLinear layer;
  layer.alpha = doc.at("alpha").get<double>();
  layer.dropout_p = doc.value("dropout_p", 0.05);
  layer.scaling = doc.value("scaling", std::string("alpha")) == "alpha_over_r" ? Scaling::AlphaOverRank : Scaling::Alpha;
  layer.W = unflatten(doc.at("W").get<std::vector<double>>(), d, k, "W");
  layer.A = unflatten(doc.at("A").get<std::vector<double>>(), d, r, "A");
  layer.B = unflatten(doc.at("B").get<std::vector<double>>(), r, k, "B");
  layer.check();
  return layer;
}

void write_binary(std::ostream &out, const LoraLinear &layer) {
  out.write("LORA", 4);
  put_le<std::uint32_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.out_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.in_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.rank()));
  put_le<double>(out, layer.alpha);
  put_le<double>(out, layer.dropout_p);
  put_le<std::uint8_t>(out, layer.scaling == Scaling::Alpha ? 0 : 1);
  for (const Matrix *m : {&layer.W, &layer.A, &layer.B})
    for (double v : flatten(*m)) put_le<double>(out, v);
}

auto read_binary(std::istream &in) -> LoraLinear {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LORA", 4) != 0) throw std::runtime_error("not a LoRA binary");
  if (get_le<std::uint32_t>(in) != kBinaryVersion) throw std::runtime_error("unsupported LoRA binary version");
  const auto d = static_cast<Eigen::Index>(get_le<std::uint32_t>(in));
  const auto k = static_cast<Eigen::Index>(get_le<std::uint32_t>(in));
  const auto r = static_cast<Eigen::Index>(get_le<std::uint32_t>(in));
  LoraLinear layer;
  layer.alpha = get_le<double>(in);
  layer.dropout_p = get_le<double>(in);
  layer.scaling = get_le<std::uint8_t>(in) == 0 ? Scaling::Alpha : Scaling::AlphaOverRank;
  auto read_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_le<double>(in);
    return m;
  };
  layer.W = read_matrix(d, k);
  layer.A = read_matrix(d, r);
  layer.B = read_matrix(r, k);
  layer.check();
  return layer;
}

} // namespace amrg::lora
