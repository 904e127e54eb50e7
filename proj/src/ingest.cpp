#include "amrg/ingest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace amrg::ingest {

using nlohmann::json;

auto to_string(Split split) -> std::string_view {
  switch (split) {
  case Split::Train: return "train";
  case Split::Val: return "val";
  case Split::Test: return "test";
  }
  return "train";
}

auto parse_split(std::string_view text) -> std::optional<Split> {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  return std::nullopt;
}

namespace {

auto fail(std::size_t line, const std::string &msg) -> ManifestError {
  return ManifestError("manifest line " + std::to_string(line) + ": " + msg, line);
}

auto required_string(const json &obj, const char *key, std::size_t line) -> std::string {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw fail(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

auto optional_string(const json &obj, const char *key, std::size_t line)
    -> std::optional<std::string> {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw fail(line, std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

auto record_from_json(const json &obj, std::size_t line) -> ReportRecord {
  if (!obj.is_object()) throw fail(line, "expected a JSON object");
  ReportRecord rec;
  rec.case_id = required_string(obj, "case_id", line);
  if (rec.case_id.empty()) throw fail(line, "case_id is empty");

  auto paths = obj.find("image_paths");
  if (paths == obj.end() || !paths->is_array() || paths->empty())
    throw fail(line, "image_paths must be a non-empty array");
  for (const auto &p : *paths) {
    if (!p.is_string()) throw fail(line, "image_paths entries must be strings");
    rec.image_paths.emplace_back(p.get<std::string>());
  }

  if (auto side = optional_string(obj, "laterality", line)) {
    if (*side != "left" && *side != "right" && *side != "unknown")
      throw fail(line, "laterality must be \"left\", \"right\" or null");
    rec.laterality = parse_laterality(*side);
  }
  rec.report_text = required_string(obj, "report_text", line);

  if (auto code = optional_string(obj, "birads", line)) {
    auto label = BiradsLabel::try_parse(*code);
    if (!label) throw fail(line, "unknown BI-RADS code '" + *code + "'");
    if (label->is_labeled()) rec.birads_gold = *label;
  }
  if (auto code = optional_string(obj, "density", line)) {
    auto label = DensityLabel::try_parse(*code);
    if (!label) throw fail(line, "unknown density category '" + *code + "'");
    if (label->is_labeled()) rec.density_gold = *label;
  }

  auto split = parse_split(required_string(obj, "split", line));
  if (!split) throw fail(line, "split must be one of train, val, test");
  rec.split = *split;
  return rec;
}

auto record_to_json(const ReportRecord &rec) -> json {
  json paths = json::array();
  for (const auto &p : rec.image_paths) paths.push_back(p.string());
  json obj;
  obj["case_id"] = rec.case_id;
  obj["image_paths"] = std::move(paths);
  obj["laterality"] = rec.laterality == Laterality::Unknown ? json(nullptr)
                                                             : json(std::string(to_string(rec.laterality)));
  obj["report_text"] = rec.report_text;
  obj["birads"] = rec.birads_gold ? json(rec.birads_gold->value()) : json(nullptr);
  obj["density"] = rec.density_gold ? json(rec.density_gold->value()) : json(nullptr);
  obj["split"] = std::string(to_string(rec.split));
  return obj;
}

} // namespace

auto parse_manifest(std::istream &in) -> std::vector<ReportRecord> {
  std::vector<ReportRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error &e) {
      throw fail(lineno, std::string("malformed JSON: ") + e.what());
    }
    auto rec = record_from_json(obj, lineno);
    if (!seen.insert(rec.case_id).second)
      throw fail(lineno, "duplicate case_id '" + rec.case_id + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

auto load_manifest(const std::filesystem::path &path) -> std::vector<ReportRecord> {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string(), 0);
  return parse_manifest(in);
}

void write_manifest(std::ostream &out, const std::vector<ReportRecord> &records) {
  for (const auto &rec : records) out << record_to_json(rec).dump() << '\n';
}

auto SplitStats::count(Split split, const std::string &label) const -> long {
  auto s = counts.find(split);
  if (s == counts.end()) return 0;
  auto c = s->second.find(label);
  return c == s->second.end() ? 0 : c->second;
}

auto SplitStats::total(Split split) const -> long {
  long sum = 0;
  if (auto s = counts.find(split); s != counts.end())
    for (const auto &[label, n] : s->second) sum += n;
  return sum;
}

auto split_stats(const std::vector<ReportRecord> &records) -> SplitStats {
  SplitStats stats;
  for (auto split : {Split::Train, Split::Val, Split::Test}) stats.counts[split];
  for (const auto &rec : records) {
    const std::string key = rec.birads_gold ? rec.birads_gold->value() : std::string(kUnlabeledKey);
    ++stats.counts[rec.split][key];
  }
  return stats;
}

auto Discrepancy::describe() const -> std::string {
  std::ostringstream os;
  os << to_string(split) << " BI-RADS '" << label << "': expected " << expected << ", actual "
     << actual;
  return os.str();
}

auto validate_against(const SplitStats &stats, const SplitStats &expected)
    -> std::vector<Discrepancy> {
  std::vector<Discrepancy> out;
  for (auto split : {Split::Train, Split::Val, Split::Test}) {
    std::set<std::string> labels;
    for (const auto *side : {&stats, &expected})
      if (auto it = side->counts.find(split); it != side->counts.end())
        for (const auto &[label, n] : it->second) labels.insert(label);
    for (const auto &label : labels) {
      const long want = expected.count(split, label);
      const long got = stats.count(split, label);
      if (want != got) out.push_back({split, label, want, got});
    }
  }
  return out;
}

auto stats_from_json(const std::string &text) -> SplitStats {
  const json doc = json::parse(text);
  if (!doc.is_object()) throw std::invalid_argument("expected stats must be a JSON object");
  SplitStats stats;
  for (const auto &[key, labels] : doc.items()) {
    auto split = parse_split(key);
    if (!split) throw std::invalid_argument("unknown split '" + key + "' in expected stats");
    if (!labels.is_object()) throw std::invalid_argument("split '" + key + "' must map labels to counts");
    auto &row = stats.counts[*split];
    for (const auto &[label, n] : labels.items()) {
      if (!n.is_number_integer() || n.get<long>() < 0)
        throw std::invalid_argument("count for '" + label + "' must be a non-negative integer");
      row[label] = n.get<long>();
    }
  }
  return stats;
}

auto stats_to_json(const SplitStats &stats) -> std::string {
  json doc = json::object();
  for (const auto &[split, labels] : stats.counts) {
    json row = json::object();
    for (const auto &[label, n] : labels) row[label] = n;
    doc[std::string(to_string(split))] = std::move(row);
  }
  return doc.dump(2);
}

} // namespace amrg::ingest
