#include "amrg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace amrg::report {

using nlohmann::ordered_json;

auto parse_format(std::string_view text) -> Format {
  if (text == "markdown" || text == "md") return Format::Markdown;
  if (text == "json") return Format::Json;
  if (text == "csv") return Format::Csv;
  throw std::invalid_argument("unknown format '" + std::string(text) + "'");
}

auto metric_rows() -> const std::array<MetricRow, 9> & {
  static constexpr std::array<MetricRow, 9> rows{{
      {"bleu1", "BLEU-1"},
      {"rouge1", "ROUGE-1"},
      {"rouge2", "ROUGE-2"},
      {"rougeL", "ROUGE-L"},
      {"meteor", "METEOR"},
      {"cider", "CIDEr"},
      {"word_f1", "F1 (word-level)"},
      {"density_acc", "Density Accuracy"},
      {"birads_acc", "BI-RADS Accuracy"},
  }};
  return rows;
}

namespace {

auto field(const nlg::MetricBundle &b, std::string_view key) -> std::optional<double> {
  if (key == "bleu1") return b.bleu1;
  if (key == "rouge1") return b.rouge1;
  if (key == "rouge2") return b.rouge2;
  if (key == "rougeL") return b.rougeL;
  if (key == "meteor") return b.meteor;
  if (key == "cider") return b.cider;
  if (key == "word_f1") return b.word_f1;
  if (key == "density_acc") return b.density_acc;
  if (key == "birads_acc") return b.birads_acc;
  throw std::invalid_argument("unknown metric key '" + std::string(key) + "'");
}

void set_field(nlg::MetricBundle &b, std::string_view key, std::optional<double> v) {
  auto required = [&]() {
    if (!v) throw std::invalid_argument("metric '" + std::string(key) + "' must be a number");
    return *v;
  };
  if (key == "bleu1") b.bleu1 = required();
  else if (key == "rouge1") b.rouge1 = required();
  else if (key == "rouge2") b.rouge2 = required();
  else if (key == "rougeL") b.rougeL = required();
  else if (key == "meteor") b.meteor = required();
  else if (key == "cider") b.cider = required();
  else if (key == "word_f1") b.word_f1 = required();
  else if (key == "density_acc") b.density_acc = v;
  else if (key == "birads_acc") b.birads_acc = v;
  else throw std::invalid_argument("unknown metric key '" + std::string(key) + "'");
}

auto bundle_from_json(const std::string &name, const ordered_json &obj) -> NamedBundle {
  if (!obj.is_object()) throw std::invalid_argument("run '" + name + "' must map metric keys to values");
  NamedBundle nb;
  nb.name = name;
  for (const auto &[key, value] : obj.items()) {
    std::optional<double> v;
    if (value.is_number()) {
      v = value.get<double>();
    } else if (!value.is_null()) {
      throw std::invalid_argument("run '" + name + "': metric '" + key + "' must be a number or null");
    }
    set_field(nb.bundle, key, v);
    nb.keys.push_back(key);
  }
  return nb;
}

auto display_value(const nlg::MetricBundle &b, std::string_view key) -> std::optional<double> {
  auto v = field(b, key);
  if (!v) return std::nullopt;
  return std::round(*v * 1e4) / 1e4;
}

auto shared_keys(const std::vector<NamedBundle> &runs) -> std::set<std::string> {
  if (runs.empty()) return {};
  return {runs.front().keys.begin(), runs.front().keys.end()};
}

} // namespace

auto bundle_to_json(const nlg::MetricBundle &bundle) -> ordered_json {
  ordered_json obj = ordered_json::object();
  for (const auto &row : metric_rows()) {
    const auto v = field(bundle, row.key);
    obj[std::string(row.key)] = v ? ordered_json(*v) : ordered_json(nullptr);
  }
  return obj;
}

auto parse_bundles(const std::string &text) -> std::vector<NamedBundle> {
  const ordered_json doc = ordered_json::parse(text);
  std::vector<NamedBundle> runs;
  if (doc.is_array()) {
    for (const auto &entry : doc) {
      if (!entry.is_object() || !entry.contains("name") || !entry.contains("metrics"))
        throw std::invalid_argument("each run needs \"name\" and \"metrics\"");
      runs.push_back(bundle_from_json(entry.at("name").get<std::string>(), entry.at("metrics")));
    }
  } else if (doc.is_object()) {
    for (const auto &[name, metrics] : doc.items()) runs.push_back(bundle_from_json(name, metrics));
  } else {
    throw std::invalid_argument("expected a JSON array or object of runs");
  }
  if (runs.empty()) throw std::invalid_argument("no runs to report");
  check_key_sets(runs);
  return runs;
}

auto parse_runs(const std::string &text, const std::string &name) -> std::vector<NamedBundle> {
  const ordered_json doc = ordered_json::parse(text);
  if (doc.is_object() && !doc.empty()) {
    bool bare = true;
    for (const auto &[key, value] : doc.items()) {
      const bool known = std::any_of(metric_rows().begin(), metric_rows().end(),
                                     [&](const MetricRow &r) { return r.key == key; });
      bare = bare && known && (value.is_number() || value.is_null());
    }
    if (bare) return {bundle_from_json(name, doc)};
  }
  return parse_bundles(text);
}

void check_key_sets(const std::vector<NamedBundle> &runs) {
  if (runs.empty()) return;
  const std::set<std::string> reference(runs.front().keys.begin(), runs.front().keys.end());
  for (const auto &run : runs) {
    const std::set<std::string> keys(run.keys.begin(), run.keys.end());
    if (keys != reference)
      throw std::invalid_argument("run '" + run.name + "' has a different metric key set from '" +
                                  runs.front().name + "'");
  }
}

auto format4(double value) -> std::string {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

auto best_columns(const std::vector<NamedBundle> &runs, std::string_view key) -> std::vector<std::size_t> {
  std::optional<double> top;
  for (const auto &run : runs)
    if (auto v = display_value(run.bundle, key)) top = top ? std::max(*top, *v) : *v;
  std::vector<std::size_t> cols;
  if (!top) return cols;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (auto v = display_value(runs[i].bundle, key); v && *v == *top) cols.push_back(i);
  return cols;
}

auto render_markdown(const std::vector<NamedBundle> &runs, bool highlight_best) -> std::string {
  return render(RunReport{runs, Format::Markdown, highlight_best});
}

auto render(const RunReport &report) -> std::string {
  const auto &runs = report.runs;
  if (runs.empty()) throw std::invalid_argument("render: no runs");
  check_key_sets(runs);
  const auto keys = shared_keys(runs);
  std::ostringstream os;

  if (report.format == Format::Json) {
    ordered_json doc;
    doc["columns"] = ordered_json::array();
    for (const auto &run : runs) doc["columns"].push_back(run.name);
    doc["rows"] = ordered_json::array();
    for (const auto &row : metric_rows()) {
      if (!keys.count(std::string(row.key))) continue;
      ordered_json r;
      r["metric"] = row.label;
      r["values"] = ordered_json::array();
      for (const auto &run : runs) {
        auto v = field(run.bundle, row.key);
        r["values"].push_back(v ? ordered_json(*v) : ordered_json(nullptr));
      }
      r["best"] = best_columns(runs, row.key);
      doc["rows"].push_back(std::move(r));
    }
    os << doc.dump(2) << '\n';
    return os.str();
  }

  if (report.format == Format::Csv) {
    os << "Metric";
    for (const auto &run : runs) os << ",\"" << run.name << '"';
    os << '\n';
    for (const auto &row : metric_rows()) {
      if (!keys.count(std::string(row.key))) continue;
      os << '"' << row.label << '"';
      for (const auto &run : runs) {
        auto v = field(run.bundle, row.key);
        os << ',' << (v ? format4(*v) : "");
      }
      os << '\n';
    }
    return os.str();
  }

  os << "| Metric |";
  for (const auto &run : runs) os << ' ' << run.name << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < runs.size(); ++i) os << "---|";
  os << '\n';
  for (const auto &row : metric_rows()) {
    if (!keys.count(std::string(row.key))) continue;
    const auto best = report.highlight_best ? best_columns(runs, row.key) : std::vector<std::size_t>{};
    os << "| " << row.label << " |";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto v = field(runs[i].bundle, row.key);
      if (!v) {
        os << " n/a |";
      } else if (std::find(best.begin(), best.end(), i) != best.end()) {
        os << " **" << format4(*v) << "** |";
      } else {
        os << ' ' << format4(*v) << " |";
      }
    }
    os << '\n';
  }
  return os.str();
}

} // namespace amrg::report
