#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "amrg/adapters.hpp"
#include "amrg/clinical.hpp"
#include "amrg/image_io.hpp"
#include "amrg/ingest.hpp"
#include "amrg/nlgmetrics.hpp"
#include "amrg/tokenize.hpp"

namespace amrg::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

auto read_text(const fs::path &path) -> std::string {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void emit(const std::string &text, const std::optional<fs::path> &out, Console io) {
  if (out) {
    write_text(*out, text);
  } else {
    io.out << text;
  }
}

auto label_json(const std::optional<BiradsLabel> &label) -> json {
  return label && label->is_labeled() ? json(label->value()) : json(nullptr);
}

auto label_json(const std::optional<DensityLabel> &label) -> json {
  return label && label->is_labeled() ? json(label->value()) : json(nullptr);
}

auto optional_number(const std::optional<double> &v) -> json { return v ? json(*v) : json(nullptr); }

auto density_table(const std::optional<fs::path> &path) -> clinical::DensityTable {
  return path ? clinical::DensityTable::load(*path) : clinical::DensityTable::defaults();
}

auto vocabulary(const std::optional<fs::path> &path) -> clinical::TermVocabulary {
  return path ? clinical::TermVocabulary::load(*path) : clinical::TermVocabulary::defaults();
}

/// Predictions and gold labels for one pair.
struct LabelRow {
  BiradsLabel birads_pred;
  BiradsLabel birads_gold;
  DensityLabel density_pred;
  DensityLabel density_gold;
};

auto label_row(const ScoredPair &p, const clinical::DensityTable &table) -> LabelRow {
  LabelRow row;
  row.birads_pred = clinical::extract_birads(p.generated);
  row.density_pred = clinical::extract_density(p.generated, table);
  row.birads_gold = p.birads_gold ? *p.birads_gold : clinical::extract_birads(p.reference);
  row.density_gold = p.density_gold ? *p.density_gold : clinical::extract_density(p.reference, table);
  return row;
}

struct Accuracies {
  std::optional<double> birads;
  std::optional<double> density;
};

auto accuracies(const std::vector<LabelRow> &rows) -> Accuracies {
  std::vector<BiradsLabel> bp, bg;
  std::vector<DensityLabel> dp, dg;
  for (const auto &r : rows) {
    bp.push_back(r.birads_pred);
    bg.push_back(r.birads_gold);
    dp.push_back(r.density_pred);
    dg.push_back(r.density_gold);
  }
  return {clinical::label_accuracy(bp, bg), clinical::label_accuracy(dp, dg)};
}

auto score_pairs(const std::vector<ScoredPair> &pairs, const clinical::DensityTable &table)
    -> nlg::MetricBundle {
  std::vector<nlg::TextPair> tokens;
  std::vector<LabelRow> rows;
  for (const auto &p : pairs) {
    tokens.push_back({tokenize(p.generated), tokenize(p.reference)});
    rows.push_back(label_row(p, table));
  }
  auto bundle = nlg::score_corpus(tokens);
  const auto acc = accuracies(rows);
  bundle.birads_acc = acc.birads;
  bundle.density_acc = acc.density;
  return bundle;
}

auto diff_json(const std::string &case_id, const clinical::TermDiff &d) -> ordered_json {
  ordered_json obj;
  obj["case_id"] = case_id;
  obj["matched"] = d.matched;
  obj["hallucinated"] = d.hallucinated;
  obj["missed"] = d.missed;
  obj["conflicting"] = ordered_json::array();
  for (const auto &c : d.conflicting)
    obj["conflicting"].push_back({{"slot", c.slot}, {"generated", c.generated}, {"reference", c.reference}});
  obj["counts"] = {{"matched", d.matched.size()},
                   {"hallucinated", d.hallucinated.size()},
                   {"missed", d.missed.size()},
                   {"conflicting", d.conflicting.size()}};
  return obj;
}

auto stem_name(const fs::path &p) -> std::string {
  auto s = p.stem().string();
  return s.empty() ? std::string("run") : s;
}

} // namespace

auto read_pairs(const fs::path &path) -> std::vector<ScoredPair> {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ScoredPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string &msg) {
    return std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error &e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw fail("expected a JSON object");
    ScoredPair p;
    for (const char *key : {"case_id", "generated", "reference"}) {
      if (!obj.contains(key) || !obj[key].is_string()) throw fail(std::string("missing string field '") + key + "'");
    }
    p.case_id = obj["case_id"].get<std::string>();
    p.generated = obj["generated"].get<std::string>();
    p.reference = obj["reference"].get<std::string>();
    if (obj.contains("birads_gold")) {
      const auto &v = obj["birads_gold"];
      if (v.is_null()) {
        p.birads_gold = BiradsLabel::unlabeled();
      } else if (auto label = v.is_string() ? BiradsLabel::try_parse(v.get<std::string>()) : std::nullopt) {
        p.birads_gold = *label;
      } else {
        throw fail("invalid birads_gold");
      }
    }
    if (obj.contains("density_gold")) {
      const auto &v = obj["density_gold"];
      if (v.is_null()) {
        p.density_gold = DensityLabel::unlabeled();
      } else if (auto label = v.is_string() ? DensityLabel::try_parse(v.get<std::string>()) : std::nullopt) {
        p.density_gold = *label;
      } else {
        throw fail("invalid density_gold");
      }
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

auto cmd_validate_manifest(const ValidateOptions &opt, Console io) -> int {
  if (!std::ifstream(opt.manifest)) {
    io.err << "cannot open manifest " << opt.manifest.string() << '\n';
    return kUsageError;
  }
  std::vector<ingest::ReportRecord> records;
  try {
    records = ingest::load_manifest(opt.manifest);
  } catch (const ingest::ManifestError &e) {
    io.err << "invalid manifest: " << e.what() << '\n';
    return kValidationFailure;
  }
  const auto stats = ingest::split_stats(records);
  ordered_json doc;
  doc["records"] = records.size();
  doc["totals"] = {{"train", stats.total(ingest::Split::Train)},
                   {"val", stats.total(ingest::Split::Val)},
                   {"test", stats.total(ingest::Split::Test)}};
  doc["stats"] = ordered_json::parse(ingest::stats_to_json(stats));
  int code = kOk;
  if (opt.expected_stats) {
    const auto expected = ingest::stats_from_json(read_text(*opt.expected_stats));
    const auto issues = ingest::validate_against(stats, expected);
    doc["discrepancies"] = ordered_json::array();
    for (const auto &d : issues) {
      doc["discrepancies"].push_back({{"split", ingest::to_string(d.split)},
                                      {"label", d.label},
                                      {"expected", d.expected},
                                      {"actual", d.actual}});
      io.err << d.describe() << '\n';
    }
    if (!issues.empty()) code = kValidationFailure;
  }
  emit(doc.dump(2) + "\n", opt.out, io);
  return code;
}

auto cmd_preprocess(const PreprocessOptions &opt, Console io) -> int {
  opt.config.validate();
  const auto records = ingest::load_manifest(opt.manifest);
  const auto base = opt.manifest.parent_path();
  fs::create_directories(opt.out_dir);
  std::ofstream log(opt.out_dir / "preprocess_log.jsonl");
  if (!log) throw std::runtime_error("cannot write log in " + opt.out_dir.string());

  std::size_t written = 0, failed = 0;
  for (const auto &rec : records) {
    for (std::size_t i = 0; i < rec.image_paths.size(); ++i) {
      const auto src = rec.image_paths[i].is_absolute() ? rec.image_paths[i] : base / rec.image_paths[i];
      const auto dst = opt.out_dir / (rec.case_id + "_" + std::to_string(i) + ".png");
      ordered_json entry;
      entry["case_id"] = rec.case_id;
      entry["image"] = src.string();
      try {
        const auto result = preproc::preprocess_case_traced(read_image(src), rec.laterality, opt.config);
        write_png(dst, result.image);
        entry["output"] = dst.string();
        entry["threshold"] = result.threshold;
        entry["bbox"] = {result.box.x0, result.box.y0, result.box.x1, result.box.y1};
        ++written;
      } catch (const preproc::EmptyForegroundError &e) {
        entry["error"] = e.what();
        io.err << rec.case_id << ": " << e.what() << '\n';
        ++failed;
      }
      log << entry.dump() << '\n';
    }
  }
  ordered_json summary{{"images_written", written}, {"images_failed", failed},
                       {"log", (opt.out_dir / "preprocess_log.jsonl").string()}};
  io.out << summary.dump(2) << '\n';
  return failed == 0 ? kOk : kValidationFailure;
}

auto cmd_score(const ScoreOptions &opt, Console io) -> int {
  const auto pairs = read_pairs(opt.pairs);
  const auto bundle = score_pairs(pairs, density_table(opt.density_table));
  std::string text;
  if (opt.format == report::Format::Json) {
    text = report::bundle_to_json(bundle).dump(2) + "\n";
  } else {
    const auto runs = report::parse_runs(report::bundle_to_json(bundle).dump(), stem_name(opt.pairs));
    text = report::render({runs, opt.format, true});
  }
  emit(text, opt.out, io);
  return kOk;
}

auto cmd_extract_labels(const ExtractLabelsOptions &opt, Console io) -> int {
  const auto pairs = read_pairs(opt.pairs);
  const auto table = density_table(opt.density_table);
  std::ostringstream os;
  std::vector<LabelRow> rows;
  for (const auto &p : pairs) {
    const auto row = label_row(p, table);
    rows.push_back(row);
    ordered_json line;
    line["case_id"] = p.case_id;
    line["birads_pred"] = label_json(row.birads_pred);
    line["birads_gold"] = label_json(row.birads_gold);
    line["density_pred"] = label_json(row.density_pred);
    line["density_gold"] = label_json(row.density_gold);
    os << line.dump() << '\n';
  }
  const auto acc = accuracies(rows);
  ordered_json summary;
  summary["summary"] = {{"pairs", pairs.size()},
                        {"birads_acc", optional_number(acc.birads)},
                        {"density_acc", optional_number(acc.density)}};
  os << summary.dump() << '\n';
  emit(os.str(), opt.out, io);
  return kOk;
}

auto cmd_term_diff(const TermDiffOptions &opt, Console io) -> int {
  const auto pairs = read_pairs(opt.pairs);
  const auto vocab = vocabulary(opt.vocab);
  const auto table = density_table(opt.density_table);
  std::ostringstream os;
  for (const auto &p : pairs)
    os << diff_json(p.case_id, clinical::term_diff(p.generated, p.reference, vocab, table)).dump() << '\n';
  emit(os.str(), opt.out, io);
  return kOk;
}

auto cmd_lora_demo(const LoraDemoOptions &opt, Console io) -> int {
  const auto result = decoder::run_lora_demo(opt.demo);
  ordered_json doc;
  doc["arch"] = decoder::to_string(opt.demo.arch);
  doc["steps"] = opt.demo.steps;
  doc["seed"] = opt.demo.seed;
  doc["rank"] = opt.demo.rank;
  doc["alpha"] = opt.demo.alpha;
  doc["tau"] = opt.demo.tau;
  doc["learning_rate"] = opt.demo.learning_rate;
  doc["initial_loss"] = result.curve.initial();
  doc["final_loss"] = result.curve.final_loss;
  doc["loss_ratio"] = result.curve.final_loss / result.curve.initial();
  doc["loss_curve"] = result.curve.step_losses;
  doc["base_weights_unchanged"] = result.base_checksums == result.base_checksums_after;
  doc["sample"] = result.sample;
  doc["target"] = result.target;
  emit(doc.dump(2) + "\n", opt.out, io);
  return kOk;
}

auto cmd_sweep_demo(const SweepDemoOptions &opt, Console io) -> int {
  struct Cell {
    lora::SweepConfig config;
    double initial;
    double final_loss;
  };
  std::vector<Cell> cells;
  for (const auto &cfg : lora::sweep_plan(lora::SweepGrid{})) {
    auto demo = opt.demo;
    demo.rank = cfg.rank;
    demo.alpha = cfg.alpha;
    const auto result = decoder::run_lora_demo(demo);
    cells.push_back({cfg, result.curve.initial(), result.curve.final_loss});
  }
  auto column = [](const lora::SweepConfig &c) {
    return "r=" + std::to_string(c.rank) + ", α=" + std::to_string(static_cast<int>(c.alpha));
  };
  const bool converged = std::all_of(cells.begin(), cells.end(),
                                     [](const Cell &c) { return c.final_loss <= 0.5 * c.initial; });

  std::ostringstream os;
  if (opt.format == report::Format::Json) {
    ordered_json doc = ordered_json::array();
    for (const auto &c : cells)
      doc.push_back({{"name", column(c.config)},
                     {"rank", c.config.rank},
                     {"alpha", c.config.alpha},
                     {"initial_loss", c.initial},
                     {"final_loss", c.final_loss},
                     {"ratio", c.final_loss / c.initial}});
    os << doc.dump(2) << '\n';
  } else if (opt.format == report::Format::Csv) {
    os << "Metric";
    for (const auto &c : cells) os << ",\"" << column(c.config) << '"';
    os << "\nInitial loss";
    for (const auto &c : cells) os << ',' << report::format4(c.initial);
    os << "\nFinal loss";
    for (const auto &c : cells) os << ',' << report::format4(c.final_loss);
    os << "\nFinal / initial";
    for (const auto &c : cells) os << ',' << report::format4(c.final_loss / c.initial);
    os << '\n';
  } else {
    os << "| Metric |";
    for (const auto &c : cells) os << ' ' << column(c.config) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < cells.size(); ++i) os << "---|";
    os << "\n| Initial loss |";
    for (const auto &c : cells) os << ' ' << report::format4(c.initial) << " |";
    os << "\n| Final loss |";
    for (const auto &c : cells) os << ' ' << report::format4(c.final_loss) << " |";
    os << "\n| Final / initial |";
    for (const auto &c : cells) os << ' ' << report::format4(c.final_loss / c.initial) << " |";
    os << '\n';
  }
  emit(os.str(), opt.out, io);
  if (!converged) {
    io.err << "at least one configuration did not halve its loss\n";
    return kValidationFailure;
  }
  return kOk;
}

auto cmd_report(const ReportOptions &opt, Console io) -> int {
  if (opt.inputs.empty()) {
    io.err << "report: no input files\n";
    return kUsageError;
  }
  std::vector<report::NamedBundle> runs;
  for (const auto &path : opt.inputs) {
    auto part = report::parse_runs(read_text(path), stem_name(path));
    runs.insert(runs.end(), part.begin(), part.end());
  }
  try {
    report::check_key_sets(runs);
  } catch (const std::invalid_argument &e) {
    io.err << "report: " << e.what() << '\n';
    return kValidationFailure;
  }
  emit(report::render({runs, opt.format, opt.highlight_best}), opt.out, io);
  return kOk;
}

auto cmd_pipeline(const PipelineOptions &opt, Console io) -> int {
  const auto records = ingest::load_manifest(opt.manifest);

  std::map<std::string, std::string> generated;
  {
    std::ifstream in(opt.generated);
    if (!in) throw std::runtime_error("cannot open " + opt.generated.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto obj = json::parse(line);
      if (!obj.contains("case_id") || !obj["case_id"].is_string() || !obj.contains("generated") ||
          !obj["generated"].is_string())
        throw std::runtime_error(opt.generated.string() + ":" + std::to_string(lineno) +
                                 ": expected {\"case_id\": str, \"generated\": str}");
      generated[obj["case_id"].get<std::string>()] = obj["generated"].get<std::string>();
    }
  }
  if (generated.empty()) {
    io.err << "pipeline: no generated reports in " << opt.generated.string() << '\n';
    return kValidationFailure;
  }

  std::vector<ScoredPair> pairs;
  std::vector<std::string> missing;
  for (const auto &rec : records) {
    if (rec.split != ingest::Split::Test) continue;
    auto it = generated.find(rec.case_id);
    if (it == generated.end()) {
      missing.push_back(rec.case_id);
      continue;
    }
    pairs.push_back({rec.case_id, it->second, rec.report_text,
                     rec.birads_gold.value_or(BiradsLabel::unlabeled()),
                     rec.density_gold.value_or(DensityLabel::unlabeled())});
  }
  if (!missing.empty()) {
    io.err << "pipeline: no generated report for test case(s):";
    for (const auto &id : missing) io.err << ' ' << id;
    io.err << '\n';
    return kValidationFailure;
  }
  if (pairs.empty()) {
    io.err << "pipeline: manifest has no test-split records\n";
    return kValidationFailure;
  }

  const auto table = density_table(opt.density_table);
  const auto vocab = vocabulary(opt.vocab);
  nlg::MetricBundle bundle;
  try {
    bundle = score_pairs(pairs, table);
  } catch (const nlg::CiderError &e) {
    io.err << "pipeline: " << e.what() << '\n';
    return kValidationFailure;
  }

  fs::create_directories(opt.out_dir);
  const auto metrics = report::bundle_to_json(bundle);
  write_text(opt.out_dir / "metrics.json", metrics.dump(2) + "\n");

  std::ostringstream cases, diffs;
  std::size_t matched = 0, hallucinated = 0, missed = 0, conflicting = 0;
  for (const auto &p : pairs) {
    const auto row = label_row(p, table);
    const auto cand = tokenize(p.generated);
    const auto ref = tokenize(p.reference);
    ordered_json line;
    line["case_id"] = p.case_id;
    line["birads_pred"] = label_json(row.birads_pred);
    line["birads_gold"] = label_json(row.birads_gold);
    line["density_pred"] = label_json(row.density_pred);
    line["density_gold"] = label_json(row.density_gold);
    line["bleu1"] = nlg::bleu1(cand, ref);
    line["rougeL"] = nlg::rouge_l(cand, ref);
    line["meteor"] = nlg::meteor(cand, ref);
    line["word_f1"] = nlg::word_f1(cand, ref);
    cases << line.dump() << '\n';

    const auto d = clinical::term_diff(p.generated, p.reference, vocab, table);
    matched += d.matched.size();
    hallucinated += d.hallucinated.size();
    missed += d.missed.size();
    conflicting += d.conflicting.size();
    diffs << diff_json(p.case_id, d).dump() << '\n';
  }
  write_text(opt.out_dir / "cases.jsonl", cases.str());
  write_text(opt.out_dir / "term_diff.jsonl", diffs.str());

  const auto runs = report::parse_runs(metrics.dump(), stem_name(opt.generated));
  write_text(opt.out_dir / "report.md", report::render({runs, report::Format::Markdown, true}));

  ordered_json summary;
  summary["cases"] = pairs.size();
  summary["metrics"] = metrics;
  summary["term_diff"] = {{"matched", matched},
                          {"hallucinated", hallucinated},
                          {"missed", missed},
                          {"conflicting", conflicting}};
  summary["out_dir"] = opt.out_dir.string();
  io.out << summary.dump(2) << '\n';
  return kOk;
}

} // namespace amrg::cli
