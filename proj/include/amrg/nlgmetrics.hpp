#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "amrg/tokenize.hpp"

namespace amrg::nlg {

/// Scores of one evaluation run, in table row order.
struct MetricBundle {
  double bleu1 = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double meteor = 0.0;
  double cider = 0.0; ///< in [0, 10]
  double word_f1 = 0.0;
  std::optional<double> density_acc;
  std::optional<double> birads_acc;

  /// True when every present score lies in its documented range.
  auto in_range() const -> bool;
};

/// Clipped unigram precision times the brevity penalty.
auto bleu1(const TokenSeq &cand, const TokenSeq &ref) -> double;

/// F1 of clipped n-gram overlap. Zero when either side has no n-grams.
auto rouge_n(const TokenSeq &cand, const TokenSeq &ref, int n) -> double;

auto lcs_length(const TokenSeq &a, const TokenSeq &b) -> std::size_t;

/// Balanced (beta = 1) LCS F-measure.
auto rouge_l(const TokenSeq &cand, const TokenSeq &ref) -> double;

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

/// Candidate/reference index pairs, ordered by candidate position.
struct MeteorAlignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  auto matches() const -> std::size_t { return pairs.size(); }
  auto chunks() const -> std::size_t;
};

/// Two-stage alignment: exact surface matches, then Porter-stem matches among
/// the leftovers. Within a stage each candidate token takes the first unused
/// reference token in left-to-right order.
auto meteor_align(const TokenSeq &cand, const TokenSeq &ref) -> MeteorAlignment;

auto meteor(const TokenSeq &cand, const TokenSeq &ref, const MeteorParams &params = {}) -> double;

class CiderError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct CiderScores {
  std::vector<double> per_pair;
  double corpus = 0.0;
};

/// CIDEr-D over a single-reference corpus: n = 1..4 TF-IDF cosine with
/// candidate clipping and a Gaussian length penalty, scaled by 10. Document
/// frequencies come from the references. Needs at least two documents.
auto cider(const std::vector<TokenSeq> &cands, const std::vector<TokenSeq> &refs, double sigma = 6.0)
    -> CiderScores;

/// Bag-of-words F1. Both empty gives 1, exactly one empty gives 0.
auto word_f1(const TokenSeq &cand, const TokenSeq &ref) -> double;

struct TextPair {
  TokenSeq cand;
  TokenSeq ref;
};

/// Macro average of the per-pair metrics plus corpus CIDEr. Clinical
/// accuracies are left empty.
auto score_corpus(const std::vector<TextPair> &pairs) -> MetricBundle;

} // namespace amrg::nlg
