#include "amrg/clinical.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "amrg/tokenize.hpp"

namespace amrg::clinical {

namespace {

auto collapse_spaces(const std::string &s) -> std::string {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

auto read_file(const std::filesystem::path &path) -> std::string {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

auto trim(std::string_view s) -> std::string_view {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

auto starts_at(const TokenSeq &tokens, std::size_t pos, const TokenSeq &phrase) -> bool {
  if (phrase.empty() || pos + phrase.size() > tokens.size()) return false;
  return std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<long>(pos));
}

} // namespace

// ---------------------------------------------------------------------------
// BI-RADS

auto extract_birads(std::string_view report) -> BiradsLabel {
  static const std::regex mention(
      R"((?:acr\s*)?\bbi\s*-?\s*rads\b[\s:\-]*(?:(?:category|cat|code|assessment|score)\b\.?[\s:\-]*)*\(?(\d[abc]?(?:\s+and\s+\d[abc]?)?)(?![a-z0-9]))");
  const std::string text = to_lower(report);
  BiradsLabel last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), mention); it != std::sregex_iterator(); ++it) {
    const std::string code = collapse_spaces((*it)[1].str());
    if (auto label = BiradsLabel::try_parse(code)) {
      last = *label;
    } else if (auto first = BiradsLabel::try_parse(code.substr(0, code.find(' ')))) {
      last = *first;
    }
  }
  return last;
}

// ---------------------------------------------------------------------------
// Density

DensityTable::DensityTable(std::vector<DensityRule> rules) : rules_(std::move(rules)) {
  std::stable_sort(rules_.begin(), rules_.end(), [](const DensityRule &a, const DensityRule &b) {
    return tokenize(a.phrase).size() > tokenize(b.phrase).size();
  });
}

auto DensityTable::defaults() -> const DensityTable & {
  static const DensityTable table({
      {"almost entirely fatty", DensityLabel::parse("a")},
      {"predominantly fatty", DensityLabel::parse("a")},
      {"fibro-fatty", DensityLabel::parse("a")},
      {"fibrofatty", DensityLabel::parse("a")},
      {"fatty", DensityLabel::parse("a")},
      {"scattered areas of fibroglandular density", DensityLabel::parse("b")},
      {"scattered fibroglandular", DensityLabel::parse("b")},
      {"heterogeneously dense", DensityLabel::parse("c")},
      {"extremely dense", DensityLabel::parse("d")},
  });
  return table;
}

auto DensityTable::parse(std::string_view text) -> DensityTable {
  std::vector<DensityRule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::invalid_argument("density table line " + std::to_string(lineno) + ": expected phrase<TAB>code");
    const auto phrase = trim(std::string_view(line).substr(0, tab));
    const auto code = trim(std::string_view(line).substr(tab + 1));
    auto label = DensityLabel::try_parse(code);
    if (!label || !label->is_labeled() || phrase.empty())
      throw std::invalid_argument("density table line " + std::to_string(lineno) + ": bad entry");
    rules.push_back({to_lower(phrase), *label});
  }
  return DensityTable(std::move(rules));
}

auto DensityTable::load(const std::filesystem::path &path) -> DensityTable { return parse(read_file(path)); }

auto extract_density(std::string_view report, const DensityTable &table) -> DensityLabel {
  static const std::regex explicit_code(
      R"(\bacr\s+(?:breast\s+)?(?:(?:density|composition)\s*)?(?:(?:category|cat|type|grade)\s*)?[:\-]?\s*\(?([abcd])\)?(?![a-z0-9]))"
      R"(|\b(?:density|composition)\s*(?:category|cat|type|grade)\s*[:\-]?\s*\(?([abcd])\)?(?![a-z0-9]))"
      R"(|\b(?:density|composition)\s*[:\-]\s*\(?([abcd])\)?(?![a-z0-9]))");
  const std::string text = to_lower(report);

  std::optional<DensityLabel> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), explicit_code); it != std::sregex_iterator(); ++it) {
    for (int g = 1; g <= 3; ++g)
      if ((*it)[g].matched) found = DensityLabel::parse((*it)[g].str());
  }
  if (found) return *found;

  const TokenSeq tokens = tokenize(text);
  std::vector<TokenSeq> phrases;
  for (const auto &rule : table.rules()) phrases.push_back(tokenize(rule.phrase));
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    std::size_t advance = 1;
    for (std::size_t r = 0; r < phrases.size(); ++r) {
      if (starts_at(tokens, pos, phrases[r])) {
        found = table.rules()[r].code;
        advance = phrases[r].size();
        break;
      }
    }
    pos += advance;
  }
  return found.value_or(DensityLabel::unlabeled());
}

// ---------------------------------------------------------------------------
// Accuracy

auto label_accuracy(const std::vector<std::string> &pred, const std::vector<std::string> &gold)
    -> std::optional<double> {
  if (pred.size() != gold.size())
    throw std::invalid_argument("label_accuracy: " + std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(gold.size()) + " gold labels");
  std::size_t included = 0, hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == "unlabeled") continue;
    ++included;
    if (pred[i] == gold[i]) ++hits;
  }
  if (included == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(included);
}

namespace {

template <typename Label>
auto values(const std::vector<Label> &labels) -> std::vector<std::string> {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto &l : labels) out.push_back(l.value());
  return out;
}

} // namespace

auto label_accuracy(const std::vector<BiradsLabel> &pred, const std::vector<BiradsLabel> &gold)
    -> std::optional<double> {
  return label_accuracy(values(pred), values(gold));
}

auto label_accuracy(const std::vector<DensityLabel> &pred, const std::vector<DensityLabel> &gold)
    -> std::optional<double> {
  return label_accuracy(values(pred), values(gold));
}

// ---------------------------------------------------------------------------
// Terms

TermVocabulary::TermVocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  for (const auto &t : terms_) tokenized_.push_back(tokenize(t));
  order_.resize(terms_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return tokenized_[a].size() > tokenized_[b].size(); });
}

auto TermVocabulary::defaults() -> const TermVocabulary & {
  static const TermVocabulary vocab({
      "spiculated mass",        "architectural distortion", "microcalcifications",
      "calcifications",         "fibro-fatty parenchyma",   "calcified lymph node",
      "lymph node",             "intramammary lymph node",  "mass",
      "asymmetry",              "focal asymmetry",          "global asymmetry",
      "developing asymmetry",   "irregular mass",           "oval mass",
      "round mass",             "circumscribed margins",    "obscured margins",
      "microlobulated margins", "indistinct margins",       "spiculated margins",
      "skin thickening",        "nipple retraction",        "skin retraction",
      "trabecular thickening",  "axillary adenopathy",      "pleomorphic calcifications",
      "amorphous calcifications", "coarse heterogeneous calcifications",
      "fine linear calcifications", "segmental distribution", "clustered calcifications",
      "benign calcifications",  "vascular calcifications",  "dystrophic calcifications",
      "cyst",                   "fibroadenoma",             "dense breast tissue",
      "heterogeneously dense",  "extremely dense",          "scattered fibroglandular",
      "fatty breast",           "malignancy",               "carcinoma",
      "biopsy",                 "no suspicious findings",   "large irregular soft opacity",
  });
  return vocab;
}

auto TermVocabulary::parse(std::string_view text) -> TermVocabulary {
  std::vector<std::string> terms;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    terms.emplace_back(to_lower(body));
  }
  return TermVocabulary(std::move(terms));
}

auto TermVocabulary::load(const std::filesystem::path &path) -> TermVocabulary { return parse(read_file(path)); }

auto TermVocabulary::find_terms(std::string_view text) const -> std::set<std::string> {
  const TokenSeq tokens = tokenize(text);
  std::set<std::string> found;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    std::size_t advance = 1;
    for (std::size_t idx : order_) {
      if (starts_at(tokens, pos, tokenized_[idx])) {
        found.insert(terms_[idx]);
        advance = tokenized_[idx].size();
        break;
      }
    }
    pos += advance;
  }
  return found;
}

auto mentioned_laterality(std::string_view report) -> std::string {
  bool left = false, right = false;
  for (const auto &tok : tokenize(report)) {
    if (tok == "left") left = true;
    if (tok == "right") right = true;
    if (tok == "bilateral" || tok == "bilaterally") left = right = true;
  }
  if (left && right) return "bilateral";
  if (left) return "left";
  if (right) return "right";
  return {};
}

auto term_diff(std::string_view generated, std::string_view reference, const TermVocabulary &vocab,
               const DensityTable &table) -> TermDiff {
  if (vocab.empty()) throw std::invalid_argument("term_diff: empty vocabulary");
  const auto gen_terms = vocab.find_terms(generated);
  const auto ref_terms = vocab.find_terms(reference);

  TermDiff diff;
  std::set_intersection(gen_terms.begin(), gen_terms.end(), ref_terms.begin(), ref_terms.end(),
                        std::inserter(diff.matched, diff.matched.end()));
  std::set_difference(gen_terms.begin(), gen_terms.end(), ref_terms.begin(), ref_terms.end(),
                      std::inserter(diff.hallucinated, diff.hallucinated.end()));
  std::set_difference(ref_terms.begin(), ref_terms.end(), gen_terms.begin(), gen_terms.end(),
                      std::inserter(diff.missed, diff.missed.end()));

  const auto gb = extract_birads(generated), rb = extract_birads(reference);
  if (gb.is_labeled() && rb.is_labeled() && gb != rb) diff.conflicting.push_back({"birads", gb.value(), rb.value()});
  const auto gd = extract_density(generated, table), rd = extract_density(reference, table);
  if (gd.is_labeled() && rd.is_labeled() && gd != rd) diff.conflicting.push_back({"density", gd.value(), rd.value()});
  const auto gl = mentioned_laterality(generated), rl = mentioned_laterality(reference);
  if (!gl.empty() && !rl.empty() && gl != rl) diff.conflicting.push_back({"laterality", gl, rl});
  return diff;
}

} // namespace amrg::clinical
