#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amrg/image.hpp"
#include "amrg/ingest.hpp"

namespace fixtures {

struct TextPair {
  std::string cand;
  std::string ref;
};

/// Hand-built candidate/reference pairs: exact copies, reorderings,
/// stem-only matches, repeated tokens, and both empty sides.
auto metric_pairs() -> const std::vector<TextPair> &;

/// Five-document corpus for the CIDEr-D oracle.
auto cider_corpus() -> const std::vector<TextPair> &;

struct LabeledReport {
  std::string text;
  std::string birads;
  std::string density;
};

/// Thirty synthetic reports covering every split-table BI-RADS value and
/// all four density categories, in varied phrasing.
auto clinical_corpus() -> const std::vector<LabeledReport> &;

/// Two-level image (dark background, bright disc) plus Gaussian noise.
auto bimodal_image(std::uint64_t seed, int size = 96) -> amrg::GrayImage;

/// Uniform random 8-bit image.
auto random_image(std::uint64_t seed, int width, int height) -> amrg::GrayImage;

/// Left-breast phantom: bright half-ellipse against the left edge, a small
/// dense blob inside it, and dark padding elsewhere.
auto left_breast_phantom(int width = 300, int height = 400) -> amrg::GrayImage;

/// Per-split label counts of the published dataset table.
auto dataset_counts() -> std::vector<std::tuple<amrg::ingest::Split, std::string, long>>;

/// A manifest with exactly those counts.
auto dataset_manifest() -> std::vector<amrg::ingest::ReportRecord>;

} // namespace fixtures
