// amrg: mammography report-generation toolkit.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace amrg;
using namespace amrg::cli;

auto add_format(CLI::App *cmd, report::Format &format) {
  return cmd->add_option_function<std::string>(
                "--format", [&format](const std::string &v) { format = report::parse_format(v); },
                "Output format")
      ->check(CLI::IsMember({"json", "markdown", "csv"}));
}

auto add_out(CLI::App *cmd, std::optional<fs::path> &out) {
  return cmd->add_option("-o,--out", out, "Write output here instead of stdout");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mammography report generation: preprocessing, metrics, clinical labels, LoRA demos"};
  app.require_subcommand(1);
  Console io{std::cout, std::cerr};
  std::function<int()> run;

  ValidateOptions validate;
  auto *v = app.add_subcommand("validate-manifest", "Check a JSONL manifest and its split statistics");
  v->add_option("manifest", validate.manifest, "Manifest path")->required();
  v->add_option("--expected-stats", validate.expected_stats, "Expected per-split label counts (JSON)");
  add_out(v, validate.out);
  v->callback([&] { run = [&] { return cmd_validate_manifest(validate, io); }; });

  PreprocessOptions prep;
  std::string resize = "direct", space = "lab";
  auto *p = app.add_subcommand("preprocess", "Crop, resize, orient and equalize every manifest image");
  p->add_option("--manifest", prep.manifest)->required();
  p->add_option("--out-dir", prep.out_dir)->required();
  p->add_option("--target", prep.config.target_size, "Output side length")->capture_default_str();
  p->add_option("--tiles", prep.config.clahe_tiles, "CLAHE grid dimension")->capture_default_str();
  p->add_option("--clip", prep.config.clahe_clip, "CLAHE clip limit")->capture_default_str();
  p->add_option("--resize", resize, "direct | letterbox")
      ->check(CLI::IsMember({"direct", "letterbox"}))
      ->capture_default_str();
  p->add_option("--clahe-space", space, "lab | intensity")
      ->check(CLI::IsMember({"lab", "intensity"}))
      ->capture_default_str();
  p->callback([&] {
    prep.config.resize_mode = resize == "letterbox" ? preproc::ResizeMode::Letterbox : preproc::ResizeMode::Direct;
    prep.config.clahe_space = space == "intensity" ? preproc::ClaheSpace::Intensity : preproc::ClaheSpace::Lab;
    run = [&] { return cmd_preprocess(prep, io); };
  });

  ScoreOptions score;
  auto *s = app.add_subcommand("score", "NLG metrics and clinical accuracies for generated/reference pairs");
  s->add_option("--pairs", score.pairs, "JSONL of {case_id, generated, reference}")->required();
  add_format(s, score.format);
  s->add_option("--density-table", score.density_table, "phrase<TAB>code file");
  add_out(s, score.out);
  s->callback([&] { run = [&] { return cmd_score(score, io); }; });

  ExtractLabelsOptions labels;
  auto *l = app.add_subcommand("extract-labels", "BI-RADS and density labels for each pair");
  l->add_option("--pairs", labels.pairs)->required();
  l->add_option("--density-table", labels.density_table);
  add_out(l, labels.out);
  l->callback([&] { run = [&] { return cmd_extract_labels(labels, io); }; });

  TermDiffOptions diff;
  auto *t = app.add_subcommand("term-diff", "Matched, hallucinated, missed and conflicting clinical terms");
  t->add_option("--pairs", diff.pairs)->required();
  t->add_option("--vocab", diff.vocab, "One clinical term per line");
  t->add_option("--density-table", diff.density_table);
  add_out(t, diff.out);
  t->callback([&] { run = [&] { return cmd_term_diff(diff, io); }; });

  LoraDemoOptions demo;
  std::string arch = "crossattn";
  auto *d = app.add_subcommand("lora-demo", "Train LoRA adapters of the toy decoder on three reports");
  d->add_option("--arch", arch, "instruct | crossattn")
      ->check(CLI::IsMember({"instruct", "crossattn"}))
      ->capture_default_str();
  d->add_option("--steps", demo.demo.steps)->capture_default_str()->check(CLI::PositiveNumber);
  d->add_option("--seed", demo.demo.seed)->capture_default_str();
  d->add_option("--rank", demo.demo.rank)->capture_default_str()->check(CLI::PositiveNumber);
  d->add_option("--alpha", demo.demo.alpha)->capture_default_str();
  d->add_option("--tau", demo.demo.tau, "Sampling temperature")->capture_default_str();
  d->add_option("--lr", demo.demo.learning_rate)->capture_default_str();
  add_out(d, demo.out);
  d->callback([&] {
    demo.demo.arch = decoder::parse_arch(arch);
    run = [&] { return cmd_lora_demo(demo, io); };
  });

  SweepDemoOptions sweep;
  std::string sweep_arch = "crossattn";
  auto *w = app.add_subcommand("sweep-demo", "Run the six (rank, alpha) configurations on the toy corpus");
  w->add_option("--arch", sweep_arch)->check(CLI::IsMember({"instruct", "crossattn"}))->capture_default_str();
  w->add_option("--steps", sweep.demo.steps)->capture_default_str()->check(CLI::PositiveNumber);
  w->add_option("--seed", sweep.demo.seed)->capture_default_str();
  w->add_option("--lr", sweep.demo.learning_rate)->capture_default_str();
  add_format(w, sweep.format);
  add_out(w, sweep.out);
  w->callback([&] {
    sweep.demo.arch = decoder::parse_arch(sweep_arch);
    run = [&] { return cmd_sweep_demo(sweep, io); };
  });

  ReportOptions rep;
  bool plain = false;
  auto *r = app.add_subcommand("report", "Render metric bundles as a comparison table");
  r->add_option("inputs", rep.inputs, "Score outputs or run collections (JSON)")->required();
  add_format(r, rep.format);
  r->add_flag("--no-highlight", plain, "Do not bold row maxima");
  add_out(r, rep.out);
  r->callback([&] {
    rep.highlight_best = !plain;
    run = [&] { return cmd_report(rep, io); };
  });

  PipelineOptions pipe;
  auto *q = app.add_subcommand("pipeline", "Score generated reports for every test-split case");
  q->add_option("--manifest", pipe.manifest)->required();
  q->add_option("--generated", pipe.generated, "JSONL of {case_id, generated}")->required();
  q->add_option("--out-dir", pipe.out_dir)->required();
  q->add_option("--vocab", pipe.vocab);
  q->add_option("--density-table", pipe.density_table);
  q->callback([&] { run = [&] { return cmd_pipeline(pipe, io); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    return run();
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
}
