#include "amrg/tinydecoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "amrg/optim.hpp"

namespace amrg::decoder {

// ---------------------------------------------------------------------------
// Vocabulary

TinyVocab::TinyVocab() {
  for (const char *special : {"<pad>", "<bos>", "<eos>", "<image>"}) add(special);
}

auto TinyVocab::from_texts(const std::vector<std::string> &texts) -> TinyVocab {
  TinyVocab vocab;
  for (const auto &text : texts) {
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) vocab.add(tok);
  }
  return vocab;
}

auto TinyVocab::add(const std::string &token) -> int {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

auto TinyVocab::id(const std::string &token) const -> int {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw std::out_of_range("token '" + token + "' not in vocabulary");
  return it->second;
}

auto TinyVocab::token(int id) const -> const std::string & { return tokens_.at(static_cast<std::size_t>(id)); }

auto TinyVocab::encode(const std::string &text) const -> std::vector<int> {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) ids.push_back(id(tok));
  return ids;
}

auto TinyVocab::decode(const std::vector<int> &ids) const -> std::string {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos || id == kImage) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

auto to_string(Arch arch) -> std::string { return arch == Arch::Instruct ? "instruct" : "crossattn"; }

auto parse_arch(const std::string &text) -> Arch {
  if (text == "instruct") return Arch::Instruct;
  if (text == "crossattn") return Arch::CrossAttn;
  throw std::invalid_argument("unknown architecture '" + text + "' (expected instruct or crossattn)");
}

// ---------------------------------------------------------------------------
// State

auto DecoderState::projections() -> std::vector<std::pair<std::string, Projection *>> {
  return {{"self_attn.q_proj", &q},       {"self_attn.k_proj", &k},       {"self_attn.v_proj", &v},
          {"self_attn.o_proj", &o},       {"cross_attn.q_proj", &cross_q}, {"cross_attn.k_proj", &cross_k},
          {"cross_attn.v_proj", &cross_v}, {"mlp.up_proj", &up},           {"mlp.down_proj", &down},
          {"vision.proj", &vis_proj}};
}

auto DecoderState::projections() const -> std::vector<std::pair<std::string, const Projection *>> {
  auto named = const_cast<DecoderState *>(this)->projections();
  std::vector<std::pair<std::string, const Projection *>> out;
  for (auto &[name, p] : named) out.emplace_back(name, p);
  return out;
}

auto init_decoder(const DecoderDims &dims, std::uint64_t seed) -> DecoderState {
  if (dims.vocab < 5 || dims.d_model < 1 || dims.d_visual < 1 || dims.d_ff < 1 || dims.max_len < 2)
    throw std::invalid_argument("init_decoder: dimensions too small");
  std::mt19937_64 rng(seed);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double std) {
    std::normal_distribution<double> normal(0.0, std);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
  };

  DecoderState s;
  s.dims = dims;
  s.tok_emb = gaussian(dims.vocab, dims.d_model, 0.5);
  s.pos_emb = gaussian(dims.max_len, dims.d_model, 0.1);

  auto make = [&](const std::string &name, Eigen::Index out, Eigen::Index in) {
    const Matrix W = gaussian(out, in, 1.0 / std::sqrt(static_cast<double>(in)));
    Projection p;
    p.layer = lora::lora_init(W, dims.lora_rank, dims.lora_alpha, rng(), dims.lora_dropout, dims.scaling);
    p.adapted = dims.placement.contains(name);
    return p;
  };
  const int d = dims.d_model, dv = dims.d_visual, ff = dims.d_ff;
  s.vis_proj = make("vision.proj", d, dv);
  s.q = make("self_attn.q_proj", d, d);
  s.k = make("self_attn.k_proj", d, d);
  s.v = make("self_attn.v_proj", d, d);
  s.o = make("self_attn.o_proj", d, d);
  s.cross_q = make("cross_attn.q_proj", d, d);
  s.cross_k = make("cross_attn.k_proj", d, dv);
  s.cross_v = make("cross_attn.v_proj", d, dv);
  s.up = make("mlp.up_proj", ff, d);
  s.down = make("mlp.down_proj", d, ff);
  s.head_W = gaussian(dims.vocab, d, 1.0 / std::sqrt(static_cast<double>(d)));
  s.head_b = Vector::Zero(dims.vocab);
  return s;
}

// ---------------------------------------------------------------------------
// Attention

auto causal_mask(int length) -> Mask {
  if (length < 1) throw std::invalid_argument("causal_mask: length must be >= 1");
  Mask m(length, length);
  for (int t = 0; t < length; ++t)
    for (int s = 0; s < length; ++s) m(t, s) = s <= t;
  return m;
}

auto attention_weights(const Matrix &Q, const Matrix &K, const Mask *mask) -> Matrix {
  if (Q.cols() != K.cols()) throw std::invalid_argument("attention: query/key width mismatch");
  if (mask && (mask->rows() != Q.rows() || mask->cols() != K.rows()))
    throw std::invalid_argument("attention: mask shape mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  Matrix P = (Q * K.transpose()) * scale;
  for (Eigen::Index t = 0; t < P.rows(); ++t) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < P.cols(); ++s)
      if (!mask || (*mask)(t, s)) top = std::max(top, P(t, s));
    if (top == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("attention: row " + std::to_string(t) + " is fully masked");
    double sum = 0.0;
    for (Eigen::Index s = 0; s < P.cols(); ++s) {
      P(t, s) = (!mask || (*mask)(t, s)) ? std::exp(P(t, s) - top) : 0.0;
      sum += P(t, s);
    }
    P.row(t) /= sum;
  }
  return P;
}

auto attention(const Matrix &Q, const Matrix &K, const Matrix &V, const Mask *mask) -> Matrix {
  if (K.rows() != V.rows()) throw std::invalid_argument("attention: key/value count mismatch");
  return attention_weights(Q, K, mask) * V;
}

auto cross_attend(const Matrix &hidden, const VisualFeatures &vis, const DecoderState &state) -> Matrix {
  if (hidden.cols() != state.dims.d_model || vis.dim() != state.dims.d_visual)
    throw std::invalid_argument("cross_attend: dimension mismatch");
  const Matrix Q = lora::lora_forward_rows(state.cross_q.layer, hidden);
  const Matrix K = lora::lora_forward_rows(state.cross_k.layer, vis.tokens);
  const Matrix V = lora::lora_forward_rows(state.cross_v.layer, vis.tokens);
  return attention(Q, K, V);
}

// ---------------------------------------------------------------------------
// Losses

namespace {

auto log_softmax_row(const Matrix &logits, Eigen::Index t) -> Vector {
  const double top = logits.row(t).maxCoeff();
  const double lse = top + std::log((logits.row(t).array() - top).exp().sum());
  return (logits.row(t).array() - lse).matrix().transpose();
}

auto gelu(double x) -> double {
  constexpr double c = 0.7978845608028654; // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

auto gelu_grad(double x) -> double {
  constexpr double c = 0.7978845608028654;
  const double t = std::tanh(c * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

} // namespace

auto clm_loss(const Matrix &logits, const std::vector<int> &targets, int pad_id) -> double {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw std::invalid_argument("clm_loss: target count does not match logits rows");
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const int y = targets[static_cast<std::size_t>(t)];
    if (y == pad_id) continue;
    if (y < 0 || y >= logits.cols()) throw std::out_of_range("clm_loss: target id out of range");
    sum -= log_softmax_row(logits, t)(y);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("clm_loss: no non-pad positions");
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

struct Dropout {
  bool on = false;
  std::uint64_t seed = 0;
};

auto mix(std::uint64_t x) -> std::uint64_t {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Linear {
  Matrix input;
  std::optional<Matrix> mask;
};

auto apply(const Projection &p, const Matrix &X, const Dropout &drop, int site, Linear &cache) -> Matrix {
  cache.input = X;
  cache.mask.reset();
  if (drop.on && p.adapted && p.layer.dropout_p > 0.0)
    cache.mask = lora::dropout_mask(X.rows(), X.cols(), p.layer.dropout_p, mix(drop.seed ^ mix(static_cast<std::uint64_t>(site))));
  return lora::lora_forward_rows(p.layer, X, cache.mask ? &*cache.mask : nullptr);
}

// Forward activations of one sequence.
struct Trace {
  Arch arch = Arch::CrossAttn;
  std::vector<int> input_ids; // token rows after any image rows
  Eigen::Index image_rows = 0;
  Eigen::Index y_rows = 0;

  Matrix x0;
  Linear q_in, k_in, v_in, o_in;
  Matrix Q, K, V, P, attn;
  Matrix h1;
  Linear cq_in, ck_in, cv_in;
  Matrix Qc, Kc, Vc, Pc;
  Matrix h2;
  Linear up_in, down_in, vis_in;
  Matrix U;
  Matrix h3;
  Matrix logits; // y_rows x |V|
};

auto run_forward(const DecoderState &s, Arch arch, const VisualFeatures &vis, const std::vector<int> &inst,
                 const std::vector<int> &y, const Dropout &drop) -> Trace {
  if (y.empty()) throw std::invalid_argument("decoder forward: empty target sequence");
  if (vis.length() < 1 || vis.dim() != s.dims.d_visual)
    throw std::invalid_argument("decoder forward: visual features must be L x " + std::to_string(s.dims.d_visual));
  if (!vis.tokens.allFinite()) throw std::invalid_argument("decoder forward: non-finite visual features");

  Trace tr;
  tr.arch = arch;
  if (arch == Arch::Instruct) {
    tr.image_rows = vis.length();
    tr.input_ids = inst;
  }
  tr.input_ids.push_back(TinyVocab::kBos);
  tr.input_ids.insert(tr.input_ids.end(), y.begin(), y.end() - 1);
  tr.y_rows = static_cast<Eigen::Index>(y.size());

  const Eigen::Index total = tr.image_rows + static_cast<Eigen::Index>(tr.input_ids.size());
  if (total > s.dims.max_len)
    throw std::invalid_argument("decoder forward: sequence of " + std::to_string(total) + " exceeds max_len " +
                                std::to_string(s.dims.max_len));
  const int d = s.dims.d_model;

  tr.x0.resize(total, d);
  if (tr.image_rows > 0) {
    const Matrix projected = apply(s.vis_proj, vis.tokens, drop, 9, tr.vis_in);
    for (Eigen::Index r = 0; r < tr.image_rows; ++r) tr.x0.row(r) = s.tok_emb.row(TinyVocab::kImage) + projected.row(r);
  }
  for (std::size_t i = 0; i < tr.input_ids.size(); ++i) {
    const int id = tr.input_ids[i];
    if (id < 0 || id >= s.dims.vocab) throw std::out_of_range("decoder forward: token id out of range");
    tr.x0.row(tr.image_rows + static_cast<Eigen::Index>(i)) = s.tok_emb.row(id);
  }
  tr.x0 += s.pos_emb.topRows(total);

  const Mask mask = causal_mask(static_cast<int>(total));
  tr.Q = apply(s.q, tr.x0, drop, 0, tr.q_in);
  tr.K = apply(s.k, tr.x0, drop, 1, tr.k_in);
  tr.V = apply(s.v, tr.x0, drop, 2, tr.v_in);
  tr.P = attention_weights(tr.Q, tr.K, &mask);
  tr.attn = tr.P * tr.V;
  tr.h1 = tr.x0 + apply(s.o, tr.attn, drop, 3, tr.o_in);

  if (arch == Arch::CrossAttn) {
    tr.Qc = apply(s.cross_q, tr.h1, drop, 4, tr.cq_in);
    tr.Kc = apply(s.cross_k, vis.tokens, drop, 5, tr.ck_in);
    tr.Vc = apply(s.cross_v, vis.tokens, drop, 6, tr.cv_in);
    tr.Pc = attention_weights(tr.Qc, tr.Kc);
    tr.h2 = tr.h1 + tr.Pc * tr.Vc;
  } else {
    tr.h2 = tr.h1;
  }

  tr.U = apply(s.up, tr.h2, drop, 7, tr.up_in);
  const Matrix G = tr.U.unaryExpr([](double x) { return gelu(x); });
  tr.h3 = tr.h2 + apply(s.down, G, drop, 8, tr.down_in);

  const Matrix &head = s.dims.tie_head ? s.tok_emb : s.head_W;
  tr.logits = tr.h3.bottomRows(tr.y_rows) * head.transpose();
  tr.logits.rowwise() += s.head_b.transpose();
  return tr;
}

using GradMap = std::map<std::string, Matrix>;

void add_grad(GradMap &g, const std::string &name, const Matrix &delta) {
  auto it = g.find(name);
  if (it == g.end()) {
    g.emplace(name, delta);
  } else {
    it->second += delta;
  }
}

auto backprop(const Projection &p, const std::string &name, const Linear &cache, const Matrix &dY, GradMap &g)
    -> Matrix {
  auto back = lora::lora_backward_rows(p.layer, cache.input, dY, cache.mask ? &*cache.mask : nullptr);
  if (p.adapted) {
    add_grad(g, name + ".A", back.grads.dA);
    add_grad(g, name + ".B", back.grads.dB);
  }
  return back.dX;
}

struct AttnGrads {
  Matrix dQ, dK, dV;
};

auto attention_backward(const Matrix &Q, const Matrix &K, const Matrix &V, const Matrix &P, const Matrix &dO)
    -> AttnGrads {
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  AttnGrads g;
  g.dV = P.transpose() * dO;
  const Matrix dP = dO * V.transpose();
  const Vector row_dot = dP.cwiseProduct(P).rowwise().sum();
  Matrix dS = P.cwiseProduct(dP.colwise() - row_dot);
  g.dQ = dS * K * scale;
  g.dK = dS.transpose() * Q * scale;
  return g;
}

void run_backward(const DecoderState &s, const Trace &tr, const Matrix &dlogits, GradMap &g) {
  const Matrix &head = s.dims.tie_head ? s.tok_emb : s.head_W;
  const Matrix ytail = tr.h3.bottomRows(tr.y_rows);
  add_grad(g, s.dims.tie_head ? "tok_emb" : "head_W", dlogits.transpose() * ytail);
  add_grad(g, "head_b", dlogits.colwise().sum().transpose());

  Matrix dh3 = Matrix::Zero(tr.h3.rows(), tr.h3.cols());
  dh3.bottomRows(tr.y_rows) = dlogits * head;

  // MLP
  Matrix dh2 = dh3;
  const Matrix dG = backprop(s.down, "mlp.down_proj", tr.down_in, dh3, g);
  const Matrix dU = dG.cwiseProduct(tr.U.unaryExpr([](double x) { return gelu_grad(x); }));
  dh2 += backprop(s.up, "mlp.up_proj", tr.up_in, dU, g);

  // Cross-attention
  Matrix dh1 = dh2;
  if (tr.arch == Arch::CrossAttn) {
    const auto ag = attention_backward(tr.Qc, tr.Kc, tr.Vc, tr.Pc, dh2);
    dh1 += backprop(s.cross_q, "cross_attn.q_proj", tr.cq_in, ag.dQ, g);
    backprop(s.cross_k, "cross_attn.k_proj", tr.ck_in, ag.dK, g);
    backprop(s.cross_v, "cross_attn.v_proj", tr.cv_in, ag.dV, g);
  }

  // Masked self-attention
  Matrix dx0 = dh1;
  const Matrix dattn = backprop(s.o, "self_attn.o_proj", tr.o_in, dh1, g);
  const auto sg = attention_backward(tr.Q, tr.K, tr.V, tr.P, dattn);
  dx0 += backprop(s.q, "self_attn.q_proj", tr.q_in, sg.dQ, g);
  dx0 += backprop(s.k, "self_attn.k_proj", tr.k_in, sg.dK, g);
  dx0 += backprop(s.v, "self_attn.v_proj", tr.v_in, sg.dV, g);

  // Embeddings
  Matrix demb = Matrix::Zero(s.tok_emb.rows(), s.tok_emb.cols());
  if (tr.image_rows > 0) {
    for (Eigen::Index r = 0; r < tr.image_rows; ++r) demb.row(TinyVocab::kImage) += dx0.row(r);
    backprop(s.vis_proj, "vision.proj", tr.vis_in, dx0.topRows(tr.image_rows), g);
  }
  for (std::size_t i = 0; i < tr.input_ids.size(); ++i)
    demb.row(tr.input_ids[i]) += dx0.row(tr.image_rows + static_cast<Eigen::Index>(i));
  add_grad(g, "tok_emb", demb);
}

auto count_targets(const std::vector<Example> &batch) -> long {
  long n = 0;
  for (const auto &ex : batch)
    n += std::count_if(ex.y.begin(), ex.y.end(), [](int id) { return id != TinyVocab::kPad; });
  return n;
}

// Adds d(batch token-mean NLL)/d(theta) into g and returns the batch loss.
auto accumulate(const std::vector<Example> &batch, const DecoderState &s, Arch arch, const Dropout &drop,
                double weight, GradMap &g) -> double {
  const long count = count_targets(batch);
  if (count == 0) throw std::invalid_argument("batch has no non-pad targets");
  double nll = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto &ex = batch[i];
    Dropout d = drop;
    d.seed = mix(drop.seed + i);
    const Trace tr = run_forward(s, arch, ex.vis, ex.inst, ex.y, d);
    Matrix dlogits = Matrix::Zero(tr.logits.rows(), tr.logits.cols());
    for (Eigen::Index t = 0; t < tr.logits.rows(); ++t) {
      const int y = ex.y[static_cast<std::size_t>(t)];
      if (y == TinyVocab::kPad) continue;
      const Vector logp = log_softmax_row(tr.logits, t);
      nll -= logp(y);
      dlogits.row(t) = logp.array().exp().matrix().transpose();
      dlogits(t, y) -= 1.0;
    }
    dlogits *= weight / static_cast<double>(count);
    run_backward(s, tr, dlogits, g);
  }
  return nll / static_cast<double>(count);
}

} // namespace

auto forward_instruct(const VisualFeatures &vis, const std::vector<int> &inst, const std::vector<int> &y,
                      const DecoderState &state) -> Matrix {
  return run_forward(state, Arch::Instruct, vis, inst, y, Dropout{}).logits;
}

auto forward_crossattn(const VisualFeatures &vis, const std::vector<int> &y, const DecoderState &state) -> Matrix {
  return run_forward(state, Arch::CrossAttn, vis, {}, y, Dropout{}).logits;
}

auto batch_loss(const std::vector<Example> &batch, const DecoderState &state, Arch arch) -> double {
  const long count = count_targets(batch);
  if (count == 0) throw std::invalid_argument("batch_loss: no non-pad targets");
  double nll = 0.0;
  for (const auto &ex : batch) {
    const Trace tr = run_forward(state, arch, ex.vis, ex.inst, ex.y, Dropout{});
    for (Eigen::Index t = 0; t < tr.logits.rows(); ++t) {
      const int y = ex.y[static_cast<std::size_t>(t)];
      if (y != TinyVocab::kPad) nll -= log_softmax_row(tr.logits, t)(y);
    }
  }
  return nll / static_cast<double>(count);
}

auto batch_gradients(const std::vector<Example> &batch, const DecoderState &state, Arch arch)
    -> std::map<std::string, Matrix> {
  GradMap g;
  accumulate(batch, state, arch, Dropout{}, 1.0, g);
  // Tensors the architecture never touches still get an explicit zero.
  for (const auto &[name, p] : state.projections()) {
    if (!p->adapted) continue;
    g.try_emplace(name + ".A", Matrix::Zero(p->layer.A.rows(), p->layer.A.cols()));
    g.try_emplace(name + ".B", Matrix::Zero(p->layer.B.rows(), p->layer.B.cols()));
  }
  return g;
}

namespace {

auto as_span(Matrix &m) -> std::span<double> { return {m.data(), static_cast<std::size_t>(m.size())}; }
auto as_span(Vector &v) -> std::span<double> { return {v.data(), static_cast<std::size_t>(v.size())}; }

} // namespace

auto trainable_tensors(DecoderState &state) -> std::vector<TensorView> {
  std::vector<TensorView> out;
  out.push_back({"tok_emb", as_span(state.tok_emb)});
  if (!state.dims.tie_head) out.push_back({"head_W", as_span(state.head_W)});
  out.push_back({"head_b", as_span(state.head_b)});
  for (auto &[name, p] : state.projections()) {
    if (!p->adapted) continue;
    out.push_back({name + ".A", as_span(p->layer.A)});
    out.push_back({name + ".B", as_span(p->layer.B)});
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || grad_accum < 1 || steps < 0)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("TrainConfig: temperature must be > 0");
}

auto train_demo(const std::vector<Example> &corpus, DecoderState &state, const TrainConfig &cfg, Arch arch)
    -> LossCurve {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("train_demo: empty corpus");

  const long per_step = static_cast<long>(cfg.batch_size) * cfg.grad_accum;
  const long steps = cfg.steps > 0 ? cfg.steps
                                   : std::max<long>(1, cfg.epochs * static_cast<long>((corpus.size() + per_step - 1) / per_step));

  optim::AdamW opt({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.01});
  auto views = trainable_tensors(state);
  std::vector<std::span<double>> params;
  for (auto &v : views) params.push_back(v.values);

  LossCurve curve;
  std::size_t cursor = 0;
  for (long step = 0; step < steps; ++step) {
    curve.step_losses.push_back(batch_loss(corpus, state, arch));

    GradMap g;
    for (int micro = 0; micro < cfg.grad_accum; ++micro) {
      std::vector<Example> batch;
      for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(corpus[cursor++ % corpus.size()]);
      const Dropout drop{true, mix(cfg.seed ^ mix(static_cast<std::uint64_t>(step * cfg.grad_accum + micro)))};
      accumulate(batch, state, arch, drop, 1.0 / cfg.grad_accum, g);
    }

    std::vector<std::span<const double>> grads;
    for (auto &v : views) {
      auto it = g.find(v.name);
      if (it == g.end()) {
        // No path from the loss (e.g. vision.proj under crossattn).
        it = g.emplace(v.name, Matrix::Zero(static_cast<Eigen::Index>(v.values.size()), 1)).first;
      }
      grads.push_back({it->second.data(), static_cast<std::size_t>(it->second.size())});
    }
    opt.step(params, grads);
  }
  curve.final_loss = batch_loss(corpus, state, arch);
  return curve;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

template <typename Pick>
auto decode(const VisualFeatures &vis, const std::vector<int> &inst, const DecoderState &state, Arch arch,
            int max_len, Pick pick) -> std::vector<int> {
  std::vector<int> out;
  const Eigen::Index fixed = arch == Arch::Instruct ? vis.length() + static_cast<Eigen::Index>(inst.size()) : 0;
  while (static_cast<int>(out.size()) < max_len) {
    if (fixed + static_cast<Eigen::Index>(out.size()) + 1 > state.dims.max_len) break;
    std::vector<int> y = out;
    y.push_back(TinyVocab::kPad); // placeholder target for the next position
    const Trace tr = run_forward(state, arch, vis, inst, y, Dropout{});
    const int next = pick(Vector(tr.logits.row(tr.logits.rows() - 1).transpose()));
    if (next == TinyVocab::kEos) break;
    out.push_back(next);
  }
  return out;
}

} // namespace

auto generate(const VisualFeatures &vis, const std::vector<int> &inst, const DecoderState &state, Arch arch,
              double tau, int max_len, std::uint64_t seed) -> std::vector<int> {
  if (!(tau > 0.0)) throw std::invalid_argument("generate: temperature must be > 0");
  std::mt19937_64 rng(seed);
  return decode(vis, inst, state, arch, max_len, [&](const Vector &logits) {
    const Vector z = logits / tau;
    const double top = z.maxCoeff();
    const Vector p = (z.array() - top).exp().matrix();
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * p.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (u < acc) return static_cast<int>(i);
    }
    Eigen::Index best;
    p.maxCoeff(&best);
    return static_cast<int>(best);
  });
}

auto greedy_decode(const VisualFeatures &vis, const std::vector<int> &inst, const DecoderState &state, Arch arch,
                   int max_len) -> std::vector<int> {
  return decode(vis, inst, state, arch, max_len, [](const Vector &logits) {
    Eigen::Index best;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
  });
}

} // namespace amrg::decoder
