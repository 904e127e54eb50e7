#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "amrg/labels.hpp"

namespace amrg::clinical {

/// Finds "BI-RADS" / "BIRADS" / "ACR BI-RADS" mentions followed by optional
/// filler ("category", "code", "assessment", ":") and a code token. The last
/// mention wins; no mention yields "unlabeled".
auto extract_birads(std::string_view report) -> BiradsLabel;

/// One descriptor phrase and the ACR category it stands for.
struct DensityRule {
  std::string phrase;
  DensityLabel code;
};

/// Descriptor-phrase table. Longer phrases take precedence where matches overlap.
class DensityTable {
public:
  DensityTable() = default;
  explicit DensityTable(std::vector<DensityRule> rules);

  /// Built-in table: fatty / fibro-fatty -> a, scattered fibroglandular -> b,
  /// heterogeneously dense -> c, extremely dense -> d.
  static auto defaults() -> const DensityTable &;

  /// Lines of `phrase<TAB>code`; blank lines and '#' comments are skipped.
  static auto parse(std::string_view text) -> DensityTable;
  static auto load(const std::filesystem::path &path) -> DensityTable;

  auto rules() const -> const std::vector<DensityRule> & { return rules_; }

private:
  std::vector<DensityRule> rules_;
};

/// Explicit ACR codes ("ACR density b", "density category c") take priority;
/// otherwise descriptor phrases are mapped through the table. Last mention
/// wins within each stage.
auto extract_density(std::string_view report, const DensityTable &table = DensityTable::defaults())
    -> DensityLabel;

/// Exact-match accuracy over pairs whose gold label is present. Returns
/// nullopt when no gold label is present. Throws on length mismatch.
auto label_accuracy(const std::vector<std::string> &pred, const std::vector<std::string> &gold)
    -> std::optional<double>;
auto label_accuracy(const std::vector<BiradsLabel> &pred, const std::vector<BiradsLabel> &gold)
    -> std::optional<double>;
auto label_accuracy(const std::vector<DensityLabel> &pred, const std::vector<DensityLabel> &gold)
    -> std::optional<double>;

/// Clinical phrase list used for term matching; one term per line.
class TermVocabulary {
public:
  TermVocabulary() = default;
  explicit TermVocabulary(std::vector<std::string> terms);

  /// Curated mammography lexicon shipped with the library.
  static auto defaults() -> const TermVocabulary &;
  static auto parse(std::string_view text) -> TermVocabulary;
  static auto load(const std::filesystem::path &path) -> TermVocabulary;

  auto terms() const -> const std::vector<std::string> & { return terms_; }
  auto empty() const -> bool { return terms_.empty(); }

  /// Vocabulary terms found in `text`, scanning tokens left to right and
  /// taking the longest matching phrase at each position.
  auto find_terms(std::string_view text) const -> std::set<std::string>;

private:
  std::vector<std::string> terms_;
  std::vector<std::vector<std::string>> tokenized_; // longest first
  std::vector<std::size_t> order_;
};

struct SlotConflict {
  std::string slot; ///< "birads", "density" or "laterality"
  std::string generated;
  std::string reference;

  friend auto operator==(const SlotConflict &, const SlotConflict &) -> bool = default;
};

struct TermDiff {
  std::set<std::string> matched;
  std::set<std::string> hallucinated;
  std::set<std::string> missed;
  std::vector<SlotConflict> conflicting;
};

/// Which side(s) a report talks about: "left", "right", "bilateral" or empty.
auto mentioned_laterality(std::string_view report) -> std::string;

/// Term-level comparison of a generated report against its reference.
/// Slot conflicts are reported only when both sides carry a value.
auto term_diff(std::string_view generated, std::string_view reference, const TermVocabulary &vocab,
               const DensityTable &table = DensityTable::defaults()) -> TermDiff;

} // namespace amrg::clinical
