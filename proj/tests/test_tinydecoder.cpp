#include <doctest.h>

#include <cmath>
#include <random>

#include "amrg/tinydecoder.hpp"
#include "amrg/toy_corpus.hpp"
#include "oracles.hpp"

using namespace amrg::decoder;
using amrg::lora::Matrix;
using amrg::lora::Vector;

namespace {

auto gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng, double sd = 1.0) -> Matrix {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Decoder with non-zero adapter factors so every LoRA path carries signal.
auto random_state(std::uint64_t seed, DecoderDims dims = {}) -> DecoderState {
  auto s = init_decoder(dims, seed);
  std::mt19937_64 rng(seed + 1000);
  for (auto &[name, p] : s.projections())
    if (p->adapted) p->layer.B = gaussian(p->layer.B.rows(), p->layer.B.cols(), rng, 0.05);
  return s;
}

auto random_vis(std::uint64_t seed, int L = 3, int dv = 8) -> VisualFeatures {
  std::mt19937_64 rng(seed);
  return {gaussian(L, dv, rng)};
}

auto random_ids(std::uint64_t seed, int n, int vocab = 11) -> std::vector<int> {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(4, vocab - 1);
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (auto &id : ids) id = d(rng);
  return ids;
}

auto max_abs(const Matrix &a, const Matrix &b) -> double { return (a - b).cwiseAbs().maxCoeff(); }

auto base_checksum(const DecoderState &s) -> std::vector<Matrix> {
  std::vector<Matrix> out;
  for (const auto &[name, p] : s.projections()) out.push_back(p->layer.W);
  out.push_back(s.pos_emb);
  return out;
}

} // namespace

TEST_SUITE("tinydecoder") {
  TEST_CASE("vocabulary") {
    const auto v = TinyVocab::from_texts({"mass seen", "no mass"});
    CHECK(v.size() == 7);
    CHECK(v.id("mass") == 4);
    CHECK(v.decode(v.encode("no mass seen")) == "no mass seen");
    CHECK(v.decode({TinyVocab::kBos, v.id("no"), TinyVocab::kEos}) == "no");
    CHECK_THROWS(v.id("calcification"));
  }

  TEST_CASE("causal mask") {
    for (int T : {1, 3, 6}) {
      const auto m = causal_mask(T);
      for (int t = 0; t < T; ++t) {
        CHECK(m.row(t).count() == t + 1);
        for (int s = 0; s < T; ++s) CHECK(m(t, s) == (s <= t));
      }
    }
  }

  TEST_CASE("attention special cases") {
    std::mt19937_64 rng(3);
    const Matrix Q = gaussian(4, 5, rng), K1 = gaussian(1, 5, rng), V1 = gaussian(1, 3, rng);
    const Matrix out = attention(Q, K1, V1);
    for (int t = 0; t < 4; ++t) CHECK(max_abs(out.row(t), V1.row(0)) < 1e-15);

    const Matrix V = gaussian(6, 3, rng);
    const Matrix uniform = attention(Matrix::Zero(2, 5), gaussian(6, 5, rng), V);
    const Matrix mean = V.colwise().mean();
    for (int t = 0; t < 2; ++t) CHECK(max_abs(uniform.row(t), mean) < 1e-12);

    Mask none = Mask::Constant(2, 2, false);
    CHECK_THROWS(attention_weights(Matrix::Zero(2, 2), Matrix::Zero(2, 2), &none));
  }

  TEST_CASE("attention matches an elementwise evaluation") {
    std::mt19937_64 rng(5);
    const Matrix Q = gaussian(3, 4, rng), K = gaussian(3, 4, rng), V = gaussian(3, 2, rng);
    const auto mask = causal_mask(3);
    const Matrix got = attention(Q, K, V, &mask);
    for (int t = 0; t < 3; ++t) {
      double z = 0.0;
      std::vector<double> w(3, 0.0);
      for (int s = 0; s <= t; ++s) z += (w[s] = std::exp(Q.row(t).dot(K.row(s)) / 2.0));
      for (int c = 0; c < 2; ++c) {
        double expect = 0.0;
        for (int s = 0; s <= t; ++s) expect += w[s] / z * V(s, c);
        CHECK(std::abs(got(t, c) - expect) < 1e-12);
      }
    }
  }

  TEST_CASE("attention rows are distributions") {
    std::mt19937_64 rng(7);
    for (int T : {1, 4, 9}) {
      const auto mask = causal_mask(T);
      const Matrix P = attention_weights(gaussian(T, 6, rng, 3.0), gaussian(T, 6, rng, 3.0), &mask);
      for (int t = 0; t < T; ++t) CHECK(std::abs(P.row(t).sum() - 1.0) < 1e-9);
    }
  }

  TEST_CASE("cross-attention degenerate cases") {
    auto s = random_state(11);
    std::mt19937_64 rng(1);
    const Matrix h = gaussian(4, 8, rng);
    const auto one = cross_attend(h, random_vis(2, 1), s);
    for (int t = 1; t < 4; ++t) CHECK(max_abs(one.row(t), one.row(0)) < 1e-12);

    s.cross_q.layer.W.setZero();
    s.cross_q.layer.B.setZero();
    const auto vis = random_vis(3, 3);
    const auto flat = cross_attend(h, vis, s);
    const Matrix values = vis.tokens * amrg::lora::lora_merge(s.cross_v.layer).transpose();
    const Matrix mean = values.colwise().mean();
    for (int t = 0; t < 4; ++t) CHECK(max_abs(flat.row(t), mean) < 1e-12);

    CHECK_THROWS(cross_attend(h, random_vis(3, 3, 5), s));
  }

  TEST_CASE("clm loss") {
    const Matrix uniform = Matrix::Zero(4, 7);
    CHECK(std::abs(clm_loss(uniform, {4, 5, 6, 3}) - std::log(7.0)) < 1e-9);

    std::mt19937_64 rng(13);
    const Matrix z = gaussian(1, 9, rng);
    const double lse = std::log(z.array().exp().sum());
    CHECK(std::abs(clm_loss(z, {5}) - (lse - z(0, 5))) < 1e-12);

    double prev = 1e9;
    for (double margin : {5.0, 10.0, 20.0}) {
      Matrix m = Matrix::Zero(1, 5);
      m(0, 3) = margin;
      const double l = clm_loss(m, {3});
      CHECK(l < prev);
      CHECK(l >= 0.0);
      prev = l;
    }

    CHECK(std::abs(clm_loss(uniform, {4, 0, 0, 0}) - std::log(7.0)) < 1e-12);
    CHECK_THROWS(clm_loss(uniform, {0, 0, 0, 0}));
    CHECK(clm_loss(Matrix::Zero(3, 1), {0, 0, 0}, -1) == 0.0);
  }

  TEST_CASE("crossattn forward matches the loop oracle") {
    const auto s = random_state(17);
    const auto vis = random_vis(19);
    const auto y = random_ids(23, 5);
    const Matrix logits = forward_crossattn(vis, y, s);
    const auto expect = oracle::crossattn_logits(vis, y, s);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t)
      for (int w = 0; w < 11; ++w) worst = std::max(worst, std::abs(logits(t, w) - expect[t][w]));
    CHECK(worst < 1e-10);
    CHECK(std::abs(clm_loss(logits, y) - oracle::clm_loss(expect, y, TinyVocab::kPad)) < 1e-10);
  }

  TEST_CASE("batch loss with one sequence is the sequence loss") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = random_state(seed);
      const Example ex{random_vis(seed + 1), random_ids(seed + 2, 2), random_ids(seed + 3, 6)};
      CHECK(std::abs(batch_loss({ex}, s, Arch::CrossAttn) - clm_loss(forward_crossattn(ex.vis, ex.y, s), ex.y)) <
            1e-12);
      CHECK(std::abs(batch_loss({ex}, s, Arch::Instruct) -
                     clm_loss(forward_instruct(ex.vis, ex.inst, ex.y, s), ex.y)) < 1e-12);
    }
  }

  TEST_CASE("causality") {
    const auto s = random_state(29);
    const auto vis = random_vis(31);
    const auto inst = random_ids(37, 2);
    auto y = random_ids(41, 6);
    for (auto arch : {Arch::CrossAttn, Arch::Instruct}) {
      auto run = [&](const std::vector<int> &seq) {
        return arch == Arch::CrossAttn ? forward_crossattn(vis, seq, s) : forward_instruct(vis, inst, seq, s);
      };
      const Matrix before = run(y);
      auto changed = y;
      changed[3] = changed[3] == 4 ? 5 : 4;
      const Matrix after = run(changed);
      CHECK(after.topRows(4) == before.topRows(4));
      CHECK(max_abs(after.bottomRows(2), before.bottomRows(2)) > 0.0);
    }
  }

  TEST_CASE("pad suffix does not touch earlier losses") {
    const auto s = random_state(43);
    const auto vis = random_vis(47);
    std::vector<int> y{5, 6, 7, TinyVocab::kEos, TinyVocab::kPad, TinyVocab::kPad};
    const Matrix a = forward_crossattn(vis, y, s);
    y[5] = 9;
    const Matrix b = forward_crossattn(vis, y, s);
    CHECK(a.topRows(5) == b.topRows(5));
  }

  TEST_CASE("instruct logits depend on the image") {
    const auto s = random_state(53);
    const auto inst = random_ids(59, 3);
    const auto y = random_ids(61, 4);
    const Matrix a = forward_instruct(random_vis(1), inst, y, s);
    const Matrix b = forward_instruct(random_vis(2), inst, y, s);
    CHECK(max_abs(a, b) > 0.0);
    CHECK(forward_instruct(random_vis(1), inst, y, s) == a);
  }

  TEST_CASE("zero visual projections make the model text-only") {
    auto s = random_state(67);
    for (auto *p : {&s.cross_k, &s.cross_v}) {
      p->layer.W.setZero();
      p->layer.B.setZero();
    }
    const auto y = random_ids(71, 5);
    CHECK(max_abs(forward_crossattn(random_vis(1), y, s), forward_crossattn(random_vis(2), y, s)) == 0.0);
  }

  TEST_CASE("overlong input is rejected") {
    DecoderDims dims;
    dims.max_len = 6;
    const auto s = random_state(73, dims);
    CHECK_THROWS(forward_crossattn(random_vis(1), random_ids(2, 7), s));
    CHECK_THROWS(forward_instruct(random_vis(1), random_ids(3, 2), random_ids(2, 2), s));
    CHECK_NOTHROW(forward_crossattn(random_vis(1), random_ids(2, 6), s));
  }

  TEST_CASE("end-to-end gradients match central differences") {
    constexpr double h = 1e-5;
    for (auto arch : {Arch::CrossAttn, Arch::Instruct}) {
      auto s = random_state(79);
      const std::vector<Example> batch{{random_vis(83), random_ids(89, 2), random_ids(97, 5)},
                                       {random_vis(101), random_ids(103, 2), random_ids(107, 4)}};
      const auto grads = batch_gradients(batch, s, arch);
      for (auto &view : trainable_tensors(s)) {
        CAPTURE(view.name);
        REQUIRE(grads.count(view.name) == 1);
        const Matrix &g = grads.at(view.name);
        REQUIRE(static_cast<std::size_t>(g.size()) == view.values.size());
        Matrix fd(g.rows(), g.cols());
        for (std::size_t i = 0; i < view.values.size(); ++i) {
          const double keep = view.values[i];
          view.values[i] = keep + h;
          const double up = batch_loss(batch, s, arch);
          view.values[i] = keep - h;
          const double down = batch_loss(batch, s, arch);
          view.values[i] = keep;
          fd.data()[i] = (up - down) / (2 * h);
        }
        const double scale = std::max({g.norm(), fd.norm(), 1e-12});
        CHECK((g - fd).norm() / scale <= 1e-3);
      }
    }
  }

  TEST_CASE("trainable tensors follow the freeze policy") {
    auto s = random_state(109);
    std::vector<std::string> names;
    for (const auto &v : trainable_tensors(s)) names.push_back(v.name);
    auto has = [&](const std::string &n) { return std::find(names.begin(), names.end(), n) != names.end(); };
    CHECK(has("tok_emb"));
    CHECK(has("head_W"));
    CHECK(has("head_b"));
    CHECK(has("self_attn.q_proj.A"));
    CHECK(has("self_attn.q_proj.B"));
    for (const auto &n : names) CHECK(n.find(".W") == std::string::npos);
    CHECK_FALSE(has("pos_emb"));

    DecoderDims tied;
    tied.tie_head = true;
    auto t = init_decoder(tied, 1);
    for (const auto &v : trainable_tensors(t)) CHECK(v.name != "head_W");
  }

  TEST_CASE("placement limits which sites adapt") {
    DecoderDims dims;
    dims.placement = amrg::lora::PlacementManifest{{"self_attn.q_proj"}};
    auto s = init_decoder(dims, 3);
    int adapted = 0;
    for (const auto &[name, p] : s.projections()) adapted += p->adapted;
    CHECK(adapted == 1);
    for (const auto &v : trainable_tensors(s))
      CHECK((v.name.rfind("self_attn.q_proj", 0) == 0 || v.name.find('.') == std::string::npos));
  }

  TEST_CASE("training with zero learning rate keeps the loss flat") {
    auto s = random_state(113);
    const std::vector<Example> corpus{{random_vis(1), {}, random_ids(2, 4)}, {random_vis(3), {}, random_ids(4, 4)}};
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.steps = 4;
    cfg.batch_size = 2;
    cfg.grad_accum = 1;
    const auto curve = train_demo(corpus, s, cfg, Arch::CrossAttn);
    REQUIRE(curve.step_losses.size() == 4);
    for (double l : curve.step_losses) CHECK(l == curve.step_losses.front());
    CHECK(curve.final_loss == curve.step_losses.front());
  }

  TEST_CASE("training is deterministic and leaves base weights alone") {
    const std::vector<Example> corpus{{random_vis(5), {}, random_ids(6, 5)}, {random_vis(7), {}, random_ids(8, 5)}};
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.steps = 15;
    cfg.batch_size = 2;
    cfg.grad_accum = 2;
    auto a = random_state(127);
    auto b = random_state(127);
    const auto frozen = base_checksum(a);
    const auto ca = train_demo(corpus, a, cfg, Arch::CrossAttn);
    const auto cb = train_demo(corpus, b, cfg, Arch::CrossAttn);
    CHECK(ca.step_losses == cb.step_losses);
    CHECK(ca.final_loss == cb.final_loss);
    CHECK(ca.final_loss < ca.initial());
    CHECK(base_checksum(a) == frozen);
  }

  TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.temperature = 0.0;
    CHECK_THROWS(cfg.validate());
  }

  TEST_CASE("sampling") {
    const auto s = random_state(131);
    const auto vis = random_vis(137);
    for (auto arch : {Arch::CrossAttn, Arch::Instruct}) {
      const auto inst = arch == Arch::Instruct ? random_ids(139, 2) : std::vector<int>{};
      CHECK(generate(vis, inst, s, arch, 1e-6, 8, 1) == greedy_decode(vis, inst, s, arch, 8));
      CHECK(generate(vis, inst, s, arch, 0.7, 8, 5) == generate(vis, inst, s, arch, 0.7, 8, 5));
      CHECK(generate(vis, inst, s, arch, 1.0, 8, 5).size() <= 8);
    }
    CHECK_THROWS(generate(vis, {}, s, Arch::CrossAttn, 0.0, 8, 1));
  }

  TEST_CASE("the toy demo memorizes its reports") {
    DemoOptions opt;
    opt.steps = 60;
    const auto r = run_lora_demo(opt);
    CHECK(r.curve.final_loss <= 0.1 * r.curve.initial());
    CHECK(r.sample == r.target);
    CHECK(r.base_checksums == r.base_checksums_after);
  }
}
