#include "amrg/toy_corpus.hpp"

#include <random>

namespace amrg::decoder {

namespace {

constexpr int kDemoWidth = 64;
constexpr int kDemoVisualTokens = 4;

} // namespace

auto make_toy_corpus(int d_visual, int visual_tokens, std::uint64_t seed) -> ToyCorpus {
  ToyCorpus corpus;
  corpus.instruction = "describe the findings in this mammogram";
  corpus.reports = {
      "bi rads 1 negative study fatty breast no mass",
      "bi rads 4c spiculated mass in the left breast biopsy advised",
      "bi rads 3 probably benign oval mass with circumscribed margins",
  };
  std::vector<std::string> texts{corpus.instruction};
  texts.insert(texts.end(), corpus.reports.begin(), corpus.reports.end());
  corpus.vocab = TinyVocab::from_texts(texts);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto inst = corpus.vocab.encode(corpus.instruction);
  for (const auto &report : corpus.reports) {
    Example ex;
    ex.vis.tokens.resize(visual_tokens, d_visual);
    for (int i = 0; i < visual_tokens; ++i)
      for (int j = 0; j < d_visual; ++j) ex.vis.tokens(i, j) = normal(rng);
    ex.inst = inst;
    ex.y = corpus.vocab.encode(report);
    ex.y.push_back(TinyVocab::kEos);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

auto demo_dims(const TinyVocab &vocab, int rank, double alpha) -> DecoderDims {
  DecoderDims dims;
  dims.vocab = vocab.size();
  dims.d_model = kDemoWidth;
  dims.d_visual = kDemoWidth;
  dims.d_ff = 2 * kDemoWidth;
  dims.max_len = 32;
  dims.lora_rank = rank;
  dims.lora_alpha = alpha;
  return dims;
}

namespace {

auto base_checksums(const DecoderState &state) -> std::vector<double> {
  std::vector<double> sums;
  for (const auto &[name, p] : state.projections()) sums.push_back(p->layer.W.sum());
  return sums;
}

} // namespace

auto run_lora_demo(const DemoOptions &options) -> DemoResult {
  const ToyCorpus corpus = make_toy_corpus(kDemoWidth, kDemoVisualTokens, options.seed);
  DecoderState state = init_decoder(demo_dims(corpus.vocab, options.rank, options.alpha), options.seed);

  TrainConfig cfg;
  cfg.steps = options.steps;
  cfg.seed = options.seed;
  cfg.learning_rate = options.learning_rate;
  cfg.temperature = options.tau;

  DemoResult result;
  result.options = options;
  result.base_checksums = base_checksums(state);
  result.curve = train_demo(corpus.examples, state, cfg, options.arch);
  result.base_checksums_after = base_checksums(state);

  const Example &first = corpus.examples.front();
  const auto ids = generate(first.vis, first.inst, state, options.arch, options.tau,
                            static_cast<int>(first.y.size()) + 4, options.seed);
  result.sample = corpus.vocab.decode(ids);
  result.target = corpus.reports.front();
  return result;
}

} // namespace amrg::decoder
