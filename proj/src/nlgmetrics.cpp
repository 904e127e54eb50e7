#include "amrg/nlgmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <array>
#include <string>

#include "amrg/porter_stemmer.hpp"

namespace amrg::nlg {

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

auto ngram_counts(const TokenSeq &seq, int n) -> NgramCounts {
  NgramCounts counts;
  if (n <= 0 || seq.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[std::vector<std::string>(seq.begin() + static_cast<long>(i), seq.begin() + static_cast<long>(i) + n)];
  return counts;
}

auto clipped_overlap(const NgramCounts &cand, const NgramCounts &ref) -> long {
  long overlap = 0;
  for (const auto &[gram, c] : cand)
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(c, it->second);
  return overlap;
}

auto total(const NgramCounts &counts) -> long {
  long sum = 0;
  for (const auto &[gram, c] : counts) sum += c;
  return sum;
}

auto f1(double p, double r) -> double { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

} // namespace

auto MetricBundle::in_range() const -> bool {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (double v : {bleu1, rouge1, rouge2, rougeL, meteor, word_f1})
    if (!unit(v)) return false;
  if (!(cider >= 0.0 && cider <= 10.0)) return false;
  if (density_acc && !unit(*density_acc)) return false;
  if (birads_acc && !unit(*birads_acc)) return false;
  return true;
}

auto bleu1(const TokenSeq &cand, const TokenSeq &ref) -> double {
  if (cand.empty()) return 0.0;
  const double precision =
      static_cast<double>(clipped_overlap(ngram_counts(cand, 1), ngram_counts(ref, 1))) / cand.size();
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) / cand.size()));
  return precision * bp;
}

auto rouge_n(const TokenSeq &cand, const TokenSeq &ref, int n) -> double {
  if (n < 1) throw std::invalid_argument("rouge_n: order must be >= 1");
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  if (c.empty() || r.empty()) return 0.0;
  const double overlap = static_cast<double>(clipped_overlap(c, r));
  return f1(overlap / total(c), overlap / total(r));
}

auto lcs_length(const TokenSeq &a, const TokenSeq &b) -> std::size_t {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

auto rouge_l(const TokenSeq &cand, const TokenSeq &ref) -> double {
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  return f1(lcs / cand.size(), lcs / ref.size());
}

auto MeteorAlignment::chunks() const -> std::size_t {
  std::size_t n = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const bool continues = k > 0 && pairs[k].first == pairs[k - 1].first + 1 &&
                           pairs[k].second == pairs[k - 1].second + 1;
    if (!continues) ++n;
  }
  return n;
}

auto meteor_align(const TokenSeq &cand, const TokenSeq &ref) -> MeteorAlignment {
  std::vector<bool> cand_used(cand.size(), false), ref_used(ref.size(), false);
  MeteorAlignment out;

  // Greedy tiling: repeatedly align the longest block of still-unmatched,
  // equal tokens (earliest candidate position, then earliest reference
  // position, on ties). Keeps the match count maximal and favors few chunks.
  auto stage = [&](const TokenSeq &c, const TokenSeq &r) {
    std::vector<std::size_t> run((c.size() + 1) * (r.size() + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t & { return run[i * (r.size() + 1) + j]; };
    for (;;) {
      std::size_t best = 0, bi = 0, bj = 0;
      for (std::size_t i = c.size(); i-- > 0;) {
        for (std::size_t j = r.size(); j-- > 0;) {
          const bool ok = !cand_used[i] && !ref_used[j] && c[i] == r[j];
          at(i, j) = ok ? at(i + 1, j + 1) + 1 : 0;
          if (at(i, j) > 0 && at(i, j) >= best) {
            best = at(i, j);
            bi = i;
            bj = j;
          }
        }
      }
      if (best == 0) break;
      for (std::size_t k = 0; k < best; ++k) {
        cand_used[bi + k] = ref_used[bj + k] = true;
        out.pairs.emplace_back(bi + k, bj + k);
      }
    }
  };

  stage(cand, ref);
  TokenSeq cand_stems(cand.size()), ref_stems(ref.size());
  std::transform(cand.begin(), cand.end(), cand_stems.begin(), [](const auto &w) { return porter_stem(w); });
  std::transform(ref.begin(), ref.end(), ref_stems.begin(), [](const auto &w) { return porter_stem(w); });
  stage(cand_stems, ref_stems);

  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

auto meteor(const TokenSeq &cand, const TokenSeq &ref, const MeteorParams &params) -> double {
  const auto alignment = meteor_align(cand, ref);
  const auto m = static_cast<double>(alignment.matches());
  if (m == 0.0) return 0.0;
  const double p = m / cand.size();
  const double r = m / ref.size();
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double frag = static_cast<double>(alignment.chunks()) / m;
  const double penalty = params.gamma * std::pow(frag, params.beta);
  return fmean * (1.0 - penalty);
}

namespace {

struct CiderDoc {
  std::array<NgramCounts, 4> counts;
  std::size_t length = 0;
};

auto cider_doc(const TokenSeq &seq) -> CiderDoc {
  CiderDoc doc;
  for (int n = 1; n <= 4; ++n) doc.counts[n - 1] = ngram_counts(seq, n);
  doc.length = seq.size();
  return doc;
}

struct TfIdf {
  std::array<std::map<std::vector<std::string>, double>, 4> weights;
  std::array<double, 4> norm{};
};

} // namespace

auto cider(const std::vector<TokenSeq> &cands, const std::vector<TokenSeq> &refs, double sigma)
    -> CiderScores {
  if (cands.size() != refs.size()) throw std::invalid_argument("cider: candidate/reference count mismatch");
  if (refs.size() < 2) throw CiderError("CIDEr undefined for single-document corpus");

  std::vector<CiderDoc> ref_docs, cand_docs;
  for (const auto &r : refs) ref_docs.push_back(cider_doc(r));
  for (const auto &c : cands) cand_docs.push_back(cider_doc(c));

  std::map<std::vector<std::string>, long> df;
  for (const auto &doc : ref_docs)
    for (const auto &counts : doc.counts)
      for (const auto &[gram, c] : counts) ++df[gram];

  const double log_n = std::log(static_cast<double>(refs.size()));
  auto vectorize = [&](const CiderDoc &doc) {
    TfIdf v;
    for (int n = 0; n < 4; ++n) {
      double sq = 0.0;
      for (const auto &[gram, tf] : doc.counts[n]) {
        auto it = df.find(gram);
        const double d = it == df.end() ? 1.0 : static_cast<double>(std::max(1L, it->second));
        const double w = static_cast<double>(tf) * (log_n - std::log(d));
        v.weights[n][gram] = w;
        sq += w * w;
      }
      v.norm[n] = std::sqrt(sq);
    }
    return v;
  };

  CiderScores out;
  out.per_pair.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const TfIdf hv = vectorize(cand_docs[i]);
    const TfIdf rv = vectorize(ref_docs[i]);
    const double delta = static_cast<double>(cand_docs[i].length) - static_cast<double>(ref_docs[i].length);
    const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
    double sum = 0.0;
    for (int n = 0; n < 4; ++n) {
      double val = 0.0;
      for (const auto &[gram, w] : hv.weights[n]) {
        auto it = rv.weights[n].find(gram);
        if (it != rv.weights[n].end()) val += std::min(w, it->second) * it->second;
      }
      if (hv.norm[n] != 0.0 && rv.norm[n] != 0.0) val /= hv.norm[n] * rv.norm[n];
      sum += val * penalty;
    }
    out.per_pair.push_back(10.0 * sum / 4.0);
  }
  double total_score = 0.0;
  for (double s : out.per_pair) total_score += s;
  out.corpus = total_score / static_cast<double>(out.per_pair.size());
  return out;
}

auto word_f1(const TokenSeq &cand, const TokenSeq &ref) -> double {
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  const double overlap = static_cast<double>(clipped_overlap(ngram_counts(cand, 1), ngram_counts(ref, 1)));
  return f1(overlap / cand.size(), overlap / ref.size());
}

auto score_corpus(const std::vector<TextPair> &pairs) -> MetricBundle {
  if (pairs.empty()) throw std::invalid_argument("score_corpus: no pairs");
  MetricBundle b;
  std::vector<TokenSeq> cands, refs;
  for (const auto &[cand, ref] : pairs) {
    b.bleu1 += bleu1(cand, ref);
    b.rouge1 += rouge_n(cand, ref, 1);
    b.rouge2 += rouge_n(cand, ref, 2);
    b.rougeL += rouge_l(cand, ref);
    b.meteor += meteor(cand, ref);
    b.word_f1 += word_f1(cand, ref);
    cands.push_back(cand);
    refs.push_back(ref);
  }
  const auto n = static_cast<double>(pairs.size());
  for (double *v : {&b.bleu1, &b.rouge1, &b.rouge2, &b.rougeL, &b.meteor, &b.word_f1}) *v /= n;
  b.cider = cider(cands, refs).corpus;
  return b;
}

} // namespace amrg::nlg
