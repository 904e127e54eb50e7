#include <doctest.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "amrg/ingest.hpp"
#include "amrg/report.hpp"
#include "commands.hpp"

using namespace amrg;
namespace fs = std::filesystem;

namespace {

auto slurp(const fs::path &p) -> std::string {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

auto data(const std::string &name) -> std::string { return slurp(fs::path(AMRG_TEST_DATA_DIR) / name); }

// Scratch directory removed when the test case ends.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("amrg_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  auto operator/(const std::string &name) const -> fs::path { return path / name; }
};

void write(const fs::path &p, const std::string &text) {
  std::ofstream out(p);
  out << text;
}

auto row_of(const std::string &table, const std::string &label) -> std::string {
  std::istringstream in(table);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("| " + label + " |", 0) == 0) return line;
  return {};
}

auto cells(const std::string &row) -> std::vector<std::string> {
  std::vector<std::string> out;
  std::istringstream in(row);
  std::string cell;
  std::getline(in, cell, '|');
  while (std::getline(in, cell, '|')) {
    const auto a = cell.find_first_not_of(' ');
    if (a == std::string::npos) continue;
    out.push_back(cell.substr(a, cell.find_last_not_of(' ') - a + 1));
  }
  return out;
}

auto pair_line(const std::string &id, const std::string &gen, const std::string &ref) -> std::string {
  return nlohmann::json{{"case_id", id}, {"generated", gen}, {"reference", ref}}.dump() + "\n";
}

auto test_manifest(const TempDir &dir) -> fs::path {
  std::vector<ingest::ReportRecord> recs;
  const std::vector<std::array<std::string, 4>> rows{
      {"t1", "Spiculated mass in the left breast. Heterogeneously dense. BI-RADS 4c.", "4c", "c"},
      {"t2", "No suspicious findings. Scattered fibroglandular densities. BI-RADS 1.", "1", "b"},
      {"t3", "Benign calcifications. Extremely dense. BI-RADS 2.", "2", "d"}};
  for (const auto &[id, text, birads, density] : rows) {
    ingest::ReportRecord r;
    r.case_id = id;
    r.image_paths = {id + ".png"};
    r.report_text = text;
    r.birads_gold = BiradsLabel::parse(birads);
    r.density_gold = DensityLabel::parse(density);
    r.split = ingest::Split::Test;
    recs.push_back(r);
  }
  ingest::ReportRecord train;
  train.case_id = "tr1";
  train.image_paths = {"tr1.png"};
  train.report_text = "Fatty breast. BI-RADS 1.";
  recs.push_back(train);
  std::ostringstream os;
  ingest::write_manifest(os, recs);
  write(dir / "manifest.jsonl", os.str());
  return dir / "manifest.jsonl";
}

} // namespace

TEST_SUITE("report") {
  TEST_CASE("rank sweep table bolds the r=32, alpha=16 column on ROUGE-L and METEOR") {
    const auto runs = report::parse_bundles(data("lora_sweep_published.json"));
    REQUIRE(runs.size() == 7);
    const auto table = report::render_markdown(runs);
    const auto header = cells(table.substr(0, table.find('\n')));
    const auto col = std::find(header.begin(), header.end(), "r=32, α=16") - header.begin();
    REQUIRE(col < static_cast<long>(header.size()));
    CHECK(cells(row_of(table, "ROUGE-L"))[col] == "**0.5691**");
    CHECK(cells(row_of(table, "METEOR"))[col] == "**0.6152**");
  }

  TEST_CASE("backbone table bolds MedGemma on six of nine rows") {
    const auto runs = report::parse_bundles(data("backbone_comparison_published.json"));
    REQUIRE(runs.front().name == "MedGemma-4B");
    int wins = 0;
    for (const auto &row : report::metric_rows()) {
      const auto best = report::best_columns(runs, row.key);
      wins += std::find(best.begin(), best.end(), 0u) != best.end();
    }
    CHECK(wins == 6);
  }

  TEST_CASE("a single run is its own best everywhere") {
    auto runs = report::parse_bundles(data("backbone_comparison_published.json"));
    runs.resize(1);
    const auto table = report::render_markdown(runs);
    for (const auto &row : report::metric_rows()) CHECK(cells(row_of(table, std::string(row.label)))[1].rfind("**", 0) == 0);
  }

  TEST_CASE("highlighting can be switched off") {
    const auto runs = report::parse_bundles(data("lora_sweep_published.json"));
    CHECK(report::render_markdown(runs, false).find("**") == std::string::npos);
  }

  TEST_CASE("rendering is deterministic") {
    const auto text = data("lora_sweep_published.json");
    for (auto f : {report::Format::Markdown, report::Format::Json, report::Format::Csv})
      CHECK(report::render({report::parse_bundles(text), f, true}) ==
            report::render({report::parse_bundles(text), f, true}));
  }

  TEST_CASE("four decimal formatting") {
    CHECK(report::format4(0.5) == "0.5000");
    CHECK(report::format4(0.123456) == "0.1235");
    CHECK(report::format4(1.0) == "1.0000");
  }

  TEST_CASE("ties at display precision are all bolded") {
    const auto runs = report::parse_bundles(R"({"a": {"bleu1": 0.50001}, "b": {"bleu1": 0.49999}})");
    CHECK(report::best_columns(runs, "bleu1").size() == 2);
  }

  TEST_CASE("mismatched key sets are rejected") {
    CHECK_THROWS_AS(report::parse_bundles(R"({"a": {"bleu1": 0.1}, "b": {"rouge1": 0.2}})"), std::invalid_argument);
    CHECK_THROWS(report::parse_bundles(R"({"a": {"bleu": 0.1}})"));
  }

  TEST_CASE("absent clinical accuracy shows as n/a") {
    const auto runs = report::parse_bundles(
        R"({"a": {"bleu1": 0.1, "birads_acc": null}, "b": {"bleu1": 0.2, "birads_acc": 0.3}})");
    const auto row = cells(row_of(report::render_markdown(runs), "BI-RADS Accuracy"));
    CHECK(row[1] == "n/a");
    CHECK(row[2] == "**0.3000**");
  }

  TEST_CASE("json and csv layouts") {
    const auto runs = report::parse_bundles(data("backbone_comparison_published.json"));
    const auto j = nlohmann::json::parse(report::render({runs, report::Format::Json, true}));
    CHECK(j["columns"].size() == 5);
    CHECK(j["rows"].size() == 9);
    CHECK(j["rows"][0]["metric"] == "BLEU-1");
    const auto csv = report::render({runs, report::Format::Csv, true});
    CHECK(csv.rfind("Metric,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
    CHECK_THROWS(report::parse_format("yaml"));
  }
}

TEST_SUITE("cli") {
  TEST_CASE("score writes every metric key") {
    TempDir dir;
    write(dir / "pairs.jsonl", pair_line("a", "Mass seen. BI-RADS 4a.", "Mass seen. BI-RADS 4a.") +
                                   pair_line("b", "Fatty breast. BI-RADS 1.", "Fatty breast. BI-RADS 1."));
    std::ostringstream out, err;
    REQUIRE(cli::cmd_score({dir / "pairs.jsonl", {}, report::Format::Json, {}}, {out, err}) == cli::kOk);
    const auto j = nlohmann::json::parse(out.str());
    CHECK(j.size() == 9);
    CHECK(j["bleu1"] == 1.0);
    CHECK(j["birads_acc"] == 1.0);

    const auto runs = report::parse_runs(out.str(), "pairs");
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].bundle.bleu1 == 1.0);
    CHECK(report::render_markdown(runs).find("**1.0000**") != std::string::npos);
  }

  TEST_CASE("score rejects a missing file and malformed lines") {
    TempDir dir;
    std::ostringstream out, err;
    CHECK_THROWS(cli::cmd_score({dir / "nope.jsonl", {}, report::Format::Json, {}}, {out, err}));
    write(dir / "bad.jsonl", "{\"case_id\": \"a\"}\n");
    CHECK_THROWS_WITH(cli::read_pairs(dir / "bad.jsonl"), doctest::Contains(":1:"));
  }

  TEST_CASE("report command merges score outputs") {
    TempDir dir;
    write(dir / "pairs.jsonl", pair_line("a", "mass", "mass seen") + pair_line("b", "calcification", "calcification"));
    std::ostringstream s1, err;
    REQUIRE(cli::cmd_score({dir / "pairs.jsonl", dir / "runA.json", report::Format::Json, {}}, {s1, err}) == 0);
    fs::copy_file(dir / "runA.json", dir / "runB.json");
    std::ostringstream out;
    CHECK(cli::cmd_report({{dir / "runA.json", dir / "runB.json"}, report::Format::Markdown, true, {}}, {out, err}) ==
          cli::kOk);
    CHECK(out.str().rfind("| Metric | runA | runB |", 0) == 0);

    write(dir / "other.json", R"({"bleu1": 0.5})");
    std::ostringstream out2;
    CHECK(cli::cmd_report({{dir / "runA.json", dir / "other.json"}, report::Format::Markdown, true, {}},
                          {out2, err}) == cli::kValidationFailure);
    CHECK(cli::cmd_report({{}, report::Format::Markdown, true, {}}, {out2, err}) == cli::kUsageError);
  }

  TEST_CASE("extract-labels ends with a summary") {
    TempDir dir;
    write(dir / "pairs.jsonl", pair_line("a", "BI-RADS 2. Fatty.", "BI-RADS 2. Fatty.") +
                                   pair_line("b", "BI-RADS 3.", "BI-RADS 4b."));
    std::ostringstream out, err;
    REQUIRE(cli::cmd_extract_labels({dir / "pairs.jsonl", {}, {}}, {out, err}) == cli::kOk);
    std::istringstream lines(out.str());
    std::string line, last;
    int n = 0;
    while (std::getline(lines, line)) {
      last = line;
      ++n;
    }
    CHECK(n == 3);
    const auto summary = nlohmann::json::parse(last)["summary"];
    CHECK(summary["pairs"] == 2);
    CHECK(summary["birads_acc"] == 0.5);
  }

  TEST_CASE("pipeline joins generated reports with the test split") {
    TempDir dir;
    const auto manifest = test_manifest(dir);
    write(dir / "gen.jsonl", R"({"case_id": "t1", "generated": "Spiculated mass. BI-RADS 4c."})"
                             "\n"
                             R"({"case_id": "t2", "generated": "No findings. BI-RADS 1."})"
                             "\n"
                             R"({"case_id": "t3", "generated": "Calcified lymph node. BI-RADS 2."})"
                             "\n");
    std::ostringstream out, err;
    REQUIRE(cli::cmd_pipeline({manifest, dir / "gen.jsonl", dir / "out", {}, {}}, {out, err}) == cli::kOk);
    for (const char *f : {"metrics.json", "cases.jsonl", "term_diff.jsonl", "report.md"})
      CHECK(fs::exists(dir / "out" / f));
    const auto metrics = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
    CHECK(metrics["birads_acc"] == 1.0);
    CHECK(slurp(dir / "out" / "term_diff.jsonl").find("calcified lymph node") != std::string::npos);
  }

  TEST_CASE("pipeline reports missing and empty generations") {
    TempDir dir;
    const auto manifest = test_manifest(dir);
    write(dir / "partial.jsonl", R"({"case_id": "t1", "generated": "BI-RADS 4c."})"
                                 "\n");
    std::ostringstream out, err;
    CHECK(cli::cmd_pipeline({manifest, dir / "partial.jsonl", dir / "o1", {}, {}}, {out, err}) ==
          cli::kValidationFailure);
    CHECK(err.str().find("t2") != std::string::npos);
    CHECK(err.str().find("t3") != std::string::npos);

    write(dir / "empty.jsonl", "");
    std::ostringstream err2;
    CHECK(cli::cmd_pipeline({manifest, dir / "empty.jsonl", dir / "o2", {}, {}}, {out, err2}) ==
          cli::kValidationFailure);
  }

  TEST_CASE("validate-manifest flags count mismatches") {
    TempDir dir;
    const auto manifest = test_manifest(dir);
    write(dir / "stats.json", R"({"train": {"unlabeled": 1}, "test": {"1": 1, "2": 1, "4c": 1}})");
    write(dir / "wrong.json", R"({"train": {"unlabeled": 1}, "test": {"1": 2, "2": 1, "4c": 1}})");
    std::ostringstream out, err;
    CHECK(cli::cmd_validate_manifest({manifest, dir / "stats.json", {}}, {out, err}) == cli::kOk);
    CHECK(cli::cmd_validate_manifest({manifest, dir / "wrong.json", {}}, {out, err}) == cli::kValidationFailure);
  }
}
