#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amrg/labels.hpp"
#include "amrg/preproc.hpp"
#include "amrg/report.hpp"
#include "amrg/toy_corpus.hpp"

namespace amrg::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kValidationFailure = 2;

namespace fs = std::filesystem;

/// Standard streams of one invocation. Tests substitute string streams.
struct Console {
  std::ostream &out;
  std::ostream &err;
};

/// One line of a pairs file. Gold labels come from the optional
/// `birads_gold` / `density_gold` fields, or are read off the reference.
struct ScoredPair {
  std::string case_id;
  std::string generated;
  std::string reference;
  std::optional<BiradsLabel> birads_gold;
  std::optional<DensityLabel> density_gold;
};

/// Throws std::runtime_error naming the line on schema problems.
auto read_pairs(const fs::path &path) -> std::vector<ScoredPair>;

struct ValidateOptions {
  fs::path manifest;
  std::optional<fs::path> expected_stats;
  std::optional<fs::path> out;
};
auto cmd_validate_manifest(const ValidateOptions &opt, Console io) -> int;

struct PreprocessOptions {
  fs::path manifest;
  fs::path out_dir;
  preproc::PreprocConfig config;
};
auto cmd_preprocess(const PreprocessOptions &opt, Console io) -> int;

struct ScoreOptions {
  fs::path pairs;
  std::optional<fs::path> out;
  report::Format format = report::Format::Json;
  std::optional<fs::path> density_table;
};
auto cmd_score(const ScoreOptions &opt, Console io) -> int;

struct ExtractLabelsOptions {
  fs::path pairs;
  std::optional<fs::path> out;
  std::optional<fs::path> density_table;
};
auto cmd_extract_labels(const ExtractLabelsOptions &opt, Console io) -> int;

struct TermDiffOptions {
  fs::path pairs;
  std::optional<fs::path> vocab;
  std::optional<fs::path> out;
  std::optional<fs::path> density_table;
};
auto cmd_term_diff(const TermDiffOptions &opt, Console io) -> int;

struct LoraDemoOptions {
  decoder::DemoOptions demo;
  std::optional<fs::path> out;
};
auto cmd_lora_demo(const LoraDemoOptions &opt, Console io) -> int;

struct SweepDemoOptions {
  decoder::DemoOptions demo; ///< rank and alpha are overridden per config
  report::Format format = report::Format::Markdown;
  std::optional<fs::path> out;
};
auto cmd_sweep_demo(const SweepDemoOptions &opt, Console io) -> int;

struct ReportOptions {
  std::vector<fs::path> inputs;
  report::Format format = report::Format::Markdown;
  bool highlight_best = true;
  std::optional<fs::path> out;
};
auto cmd_report(const ReportOptions &opt, Console io) -> int;

struct PipelineOptions {
  fs::path manifest;
  fs::path generated;
  fs::path out_dir;
  std::optional<fs::path> vocab;
  std::optional<fs::path> density_table;
};
auto cmd_pipeline(const PipelineOptions &opt, Console io) -> int;

} // namespace amrg::cli
