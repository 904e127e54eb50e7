#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace amrg {

/// BI-RADS assessment code drawn from a closed vocabulary. "3 and 5" is a
/// single compound token; "unlabeled" marks a missing or unparseable code.
class BiradsLabel {
public:
  static constexpr std::array<std::string_view, 11> kVocabulary = {
      "0", "1", "2", "3", "3 and 5", "4", "4a", "4b", "4c", "5", "6"};
  static constexpr std::string_view kUnlabeled = "unlabeled";

  BiradsLabel() : value_(kUnlabeled) {}

  /// Throws std::invalid_argument for values outside the vocabulary.
  static auto parse(std::string_view text) -> BiradsLabel;
  static auto try_parse(std::string_view text) -> std::optional<BiradsLabel>;
  static auto unlabeled() -> BiradsLabel { return {}; }

  auto value() const -> const std::string & { return value_; }
  auto is_labeled() const -> bool { return value_ != kUnlabeled; }

  friend auto operator<=>(const BiradsLabel &, const BiradsLabel &) = default;

private:
  explicit BiradsLabel(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

/// ACR breast-density category a-d.
class DensityLabel {
public:
  static constexpr std::array<std::string_view, 4> kVocabulary = {"a", "b", "c", "d"};
  static constexpr std::string_view kUnlabeled = "unlabeled";

  DensityLabel() : value_(kUnlabeled) {}

  static auto parse(std::string_view text) -> DensityLabel;
  static auto try_parse(std::string_view text) -> std::optional<DensityLabel>;
  static auto unlabeled() -> DensityLabel { return {}; }

  auto value() const -> const std::string & { return value_; }
  auto is_labeled() const -> bool { return value_ != kUnlabeled; }

  friend auto operator<=>(const DensityLabel &, const DensityLabel &) = default;

private:
  explicit DensityLabel(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

enum class Laterality { Left, Right, Unknown };

auto to_string(Laterality side) -> std::string_view;
auto parse_laterality(std::string_view text) -> Laterality;

} // namespace amrg
