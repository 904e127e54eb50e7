#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amrg/nlgmetrics.hpp"

namespace amrg::report {

enum class Format { Markdown, Json, Csv };

auto parse_format(std::string_view text) -> Format;

struct MetricRow {
  std::string_view key;   ///< JSON key
  std::string_view label; ///< table row label
};

/// The nine metrics in table order, BLEU-1 first, BI-RADS accuracy last.
auto metric_rows() -> const std::array<MetricRow, 9> &;

/// All nine keys; absent clinical accuracies are written as null.
auto bundle_to_json(const nlg::MetricBundle &bundle) -> nlohmann::ordered_json;

struct NamedBundle {
  std::string name;
  nlg::MetricBundle bundle;
  std::vector<std::string> keys; ///< metric keys present in the source JSON
};

/// Accepts either [{"name": ..., "metrics": {...}}, ...] or an object mapping
/// run names to metric objects (insertion order kept). Throws when the runs
/// do not share one key set or a key is unknown.
auto parse_bundles(const std::string &text) -> std::vector<NamedBundle>;

/// Like parse_bundles, but a bare metric object (the output of `amrg score`)
/// is read as one run called `name`.
auto parse_runs(const std::string &text, const std::string &name) -> std::vector<NamedBundle>;

/// Throws std::invalid_argument unless every run has the same key set.
void check_key_sets(const std::vector<NamedBundle> &runs);

struct RunReport {
  std::vector<NamedBundle> runs;
  Format format = Format::Markdown;
  bool highlight_best = true;
};

/// Rows in table order (metrics missing from the shared key set are skipped),
/// one column per run, four decimals, per-row maxima bolded.
auto render(const RunReport &report) -> std::string;

auto render_markdown(const std::vector<NamedBundle> &runs, bool highlight_best = true) -> std::string;

/// Column indices holding the row maximum at display precision.
auto best_columns(const std::vector<NamedBundle> &runs, std::string_view key) -> std::vector<std::size_t>;

auto format4(double value) -> std::string;

} // namespace amrg::report
