#include "amrg/labels.hpp"

#include <algorithm>
#include <stdexcept>

namespace amrg {

namespace {

template <std::size_t N>
auto in_vocabulary(const std::array<std::string_view, N> &vocab, std::string_view text) -> bool {
  return std::find(vocab.begin(), vocab.end(), text) != vocab.end();
}

} // namespace

auto BiradsLabel::try_parse(std::string_view text) -> std::optional<BiradsLabel> {
  if (text == kUnlabeled) return BiradsLabel{};
  if (!in_vocabulary(kVocabulary, text)) return std::nullopt;
  return BiradsLabel{std::string(text)};
}

auto BiradsLabel::parse(std::string_view text) -> BiradsLabel {
  auto label = try_parse(text);
  if (!label) throw std::invalid_argument("unknown BI-RADS code '" + std::string(text) + "'");
  return *label;
}

auto DensityLabel::try_parse(std::string_view text) -> std::optional<DensityLabel> {
  if (text == kUnlabeled) return DensityLabel{};
  if (!in_vocabulary(kVocabulary, text)) return std::nullopt;
  return DensityLabel{std::string(text)};
}

auto DensityLabel::parse(std::string_view text) -> DensityLabel {
  auto label = try_parse(text);
  if (!label) throw std::invalid_argument("unknown density category '" + std::string(text) + "'");
  return *label;
}

auto to_string(Laterality side) -> std::string_view {
  switch (side) {
  case Laterality::Left: return "left";
  case Laterality::Right: return "right";
  case Laterality::Unknown: break;
  }
  return "unknown";
}

auto parse_laterality(std::string_view text) -> Laterality {
  if (text == "left" || text == "L" || text == "l") return Laterality::Left;
  if (text == "right" || text == "R" || text == "r") return Laterality::Right;
  return Laterality::Unknown;
}

} // namespace amrg
