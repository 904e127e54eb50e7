#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrg/labels.hpp"

namespace amrg::ingest {

enum class Split { Train, Val, Test };

auto to_string(Split split) -> std::string_view;
auto parse_split(std::string_view text) -> std::optional<Split>;

struct ReportRecord {
  std::string case_id;
  std::vector<std::filesystem::path> image_paths;
  Laterality laterality = Laterality::Unknown;
  std::string report_text;
  std::optional<BiradsLabel> birads_gold;
  std::optional<DensityLabel> density_gold;
  Split split = Split::Train;

  friend auto operator==(const ReportRecord &, const ReportRecord &) -> bool = default;
};

/// Raised for malformed manifests. `line()` is 1-based, or 0 when the
/// problem is not tied to a single line.
class ManifestError : public std::runtime_error {
public:
  ManifestError(const std::string &what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  auto line() const -> std::size_t { return line_; }

private:
  std::size_t line_;
};

auto parse_manifest(std::istream &in) -> std::vector<ReportRecord>;
auto load_manifest(const std::filesystem::path &path) -> std::vector<ReportRecord>;
void write_manifest(std::ostream &out, const std::vector<ReportRecord> &records);

/// Key used for records whose gold BI-RADS code is absent.
inline constexpr std::string_view kUnlabeledKey = "unlabeled";

struct SplitStats {
  std::map<Split, std::map<std::string, long>> counts;

  auto count(Split split, const std::string &label) const -> long;
  auto total(Split split) const -> long;

  friend auto operator==(const SplitStats &, const SplitStats &) -> bool = default;
};

auto split_stats(const std::vector<ReportRecord> &records) -> SplitStats;

struct Discrepancy {
  Split split;
  std::string label;
  long expected;
  long actual;

  auto describe() const -> std::string;
};

/// Every (split, label) pair present in either side is compared; a label
/// missing on one side counts as zero there.
auto validate_against(const SplitStats &stats, const SplitStats &expected)
    -> std::vector<Discrepancy>;

/// JSON form: {"train": {"1": 157, ...}, "val": {...}, "test": {...}}.
auto stats_from_json(const std::string &text) -> SplitStats;
auto stats_to_json(const SplitStats &stats) -> std::string;

} // namespace amrg::ingest
