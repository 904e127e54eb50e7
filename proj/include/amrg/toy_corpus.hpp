#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amrg/tinydecoder.hpp"

namespace amrg::decoder {

/// Three synthetic image/report pairs with seeded random visual features.
struct ToyCorpus {
  TinyVocab vocab;
  std::string instruction;
  std::vector<std::string> reports;
  std::vector<Example> examples;
};

auto make_toy_corpus(int d_visual, int visual_tokens, std::uint64_t seed) -> ToyCorpus;

/// Settings shared by the demo commands.
struct DemoOptions {
  Arch arch = Arch::CrossAttn;
  int steps = 200;
  std::uint64_t seed = 42;
  int rank = 32;
  double alpha = 16.0;
  double tau = 0.1;
  double learning_rate = 3e-3;
};

struct DemoResult {
  DemoOptions options;
  LossCurve curve;
  std::string sample;      ///< generated text for the first toy image
  std::string target;      ///< its reference report
  std::vector<double> base_checksums; ///< sum of every frozen W before training
  std::vector<double> base_checksums_after;
};

/// Decoder sized for the rank sweep: d_model = d_v = 64 so ranks up to 64 fit.
auto demo_dims(const TinyVocab &vocab, int rank, double alpha) -> DecoderDims;

auto run_lora_demo(const DemoOptions &options) -> DemoResult;

} // namespace amrg::decoder
