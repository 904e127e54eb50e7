#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amrg/adapters.hpp"

namespace amrg::decoder {

using lora::Matrix;
using lora::Vector;

/// Whitespace-token vocabulary with four reserved ids.
class TinyVocab {
public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kImage = 3;

  TinyVocab();

  /// Adds every whitespace token of `texts` in first-seen order.
  static auto from_texts(const std::vector<std::string> &texts) -> TinyVocab;

  auto add(const std::string &token) -> int;
  auto id(const std::string &token) const -> int; ///< throws for unknown tokens
  auto token(int id) const -> const std::string &;
  auto size() const -> int { return static_cast<int>(tokens_.size()); }

  auto encode(const std::string &text) const -> std::vector<int>;
  /// Joins non-special tokens with single spaces.
  auto decode(const std::vector<int> &ids) const -> std::string;

private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// L x d_v matrix of visual token embeddings for one image.
struct VisualFeatures {
  Matrix tokens;

  auto length() const -> Eigen::Index { return tokens.rows(); }
  auto dim() const -> Eigen::Index { return tokens.cols(); }
};

enum class Arch { Instruct, CrossAttn };

auto to_string(Arch arch) -> std::string;
auto parse_arch(const std::string &text) -> Arch;

struct DecoderDims {
  int vocab = 11;
  int d_model = 8;
  int d_visual = 8;
  int d_ff = 16;
  int max_len = 32;
  int lora_rank = 2;
  double lora_alpha = 16.0;
  double lora_dropout = 0.05;
  lora::Scaling scaling = lora::Scaling::Alpha;
  bool tie_head = false;
  lora::PlacementManifest placement = lora::PlacementManifest::all_linear();
};

/// One projection site. Sites outside the placement manifest keep their
/// zero-initialised factors and are never updated.
struct Projection {
  lora::LoraLinear layer;
  bool adapted = true;
};

/// Single-block, single-head decoder. Embedding, positions, attention and
/// head weights, plus a LoRA wrapper around every projection.
struct DecoderState {
  DecoderDims dims;
  Matrix tok_emb; ///< |V| x d_model
  Matrix pos_emb; ///< max_len x d_model, frozen
  Projection vis_proj; ///< d_model x d_v, instruct arch
  Projection q, k, v, o; ///< masked self-attention
  Projection cross_q;    ///< W^Q, d_model x d_model
  Projection cross_k;    ///< W^K, d_model x d_v
  Projection cross_v;    ///< W^V, d_model x d_v
  Projection up;         ///< d_ff x d_model
  Projection down;       ///< d_model x d_ff
  Matrix head_W;         ///< W_o stored as |V| x d_model (unused when tied)
  Vector head_b;         ///< b, length |V|

  auto d_k() const -> int { return dims.d_model; }

  /// Named projections in a fixed order.
  auto projections() -> std::vector<std::pair<std::string, Projection *>>;
  auto projections() const -> std::vector<std::pair<std::string, const Projection *>>;
};

auto init_decoder(const DecoderDims &dims, std::uint64_t seed) -> DecoderState;

/// Permission matrix: entry (t, s) is true iff position t may attend to s <= t.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
auto causal_mask(int length) -> Mask;

/// Row-wise softmax(Q K^T / sqrt(d_k)) with d_k = Q.cols(). Masked entries
/// get -inf before the softmax. Throws when a row is fully masked.
auto attention_weights(const Matrix &Q, const Matrix &K, const Mask *mask = nullptr) -> Matrix;
auto attention(const Matrix &Q, const Matrix &K, const Matrix &V, const Mask *mask = nullptr) -> Matrix;

/// softmax((H W^Q^T)(v W^K^T)^T / sqrt(d_k)) (v W^V^T) for hidden rows H.
/// Every visual token is visible to every position.
auto cross_attend(const Matrix &hidden, const VisualFeatures &vis, const DecoderState &state) -> Matrix;

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits),
/// skipping positions whose target is the pad id. Throws when none remain.
auto clm_loss(const Matrix &logits, const std::vector<int> &targets, int pad_id = TinyVocab::kPad) -> double;

/// Teacher-forced logits for each position of `y`: the input is
/// [image tokens carrying vis] ++ inst ++ [bos] ++ y[0..T-1).
auto forward_instruct(const VisualFeatures &vis, const std::vector<int> &inst, const std::vector<int> &y,
                      const DecoderState &state) -> Matrix;

/// Teacher-forced logits for each position of `y` with input [bos] ++ y[0..T-1):
/// masked self-attention, cross-attention over vis, MLP, then W_o h + b.
auto forward_crossattn(const VisualFeatures &vis, const std::vector<int> &y, const DecoderState &state) -> Matrix;

struct Example {
  VisualFeatures vis;
  std::vector<int> inst;
  std::vector<int> y; ///< target report ids, eos-terminated, optionally pad-filled
};

/// Token-averaged NLL over a batch: the sum over sequences and non-pad
/// positions divided by the non-pad count.
auto batch_loss(const std::vector<Example> &batch, const DecoderState &state, Arch arch) -> double;

/// Gradient of batch_loss with respect to each trainable tensor, keyed like
/// trainable_tensors(). Evaluation path (no dropout).
auto batch_gradients(const std::vector<Example> &batch, const DecoderState &state, Arch arch)
    -> std::map<std::string, Matrix>;

/// Views of everything training may update: LoRA factors of adapted sites,
/// the token embedding, and the output head.
struct TensorView {
  std::string name;
  std::span<double> values;
};
auto trainable_tensors(DecoderState &state) -> std::vector<TensorView>;

struct TrainConfig {
  int epochs = 20;
  int batch_size = 4;
  double learning_rate = 1e-4;
  int grad_accum = 8;
  std::uint64_t seed = 42;
  double temperature = 0.1;
  int steps = 0; ///< optimizer steps; 0 derives the count from epochs

  void validate() const;
};

struct LossCurve {
  std::vector<double> step_losses; ///< corpus loss before each optimizer step
  double final_loss = 0.0;         ///< corpus loss after the last step

  auto initial() const -> double { return step_losses.empty() ? final_loss : step_losses.front(); }
};

/// Trains the LoRA factors, token embedding and head with AdamW. Each
/// optimizer step accumulates grad_accum micro-batches of batch_size
/// examples drawn cyclically from the corpus, with adapter dropout on.
auto train_demo(const std::vector<Example> &corpus, DecoderState &state, const TrainConfig &cfg, Arch arch)
    -> LossCurve;

/// Autoregressive sampling from softmax(logits / tau). Stops after eos
/// (not returned) or max_len tokens.
auto generate(const VisualFeatures &vis, const std::vector<int> &inst, const DecoderState &state, Arch arch,
              double tau, int max_len, std::uint64_t seed) -> std::vector<int>;

/// Argmax decoding, the tau -> 0 limit of generate().
auto greedy_decode(const VisualFeatures &vis, const std::vector<int> &inst, const DecoderState &state, Arch arch,
                   int max_len) -> std::vector<int>;

} // namespace amrg::decoder
