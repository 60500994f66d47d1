#include "evmarl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "evmarl/pipeline.hpp"

namespace evmarl {

namespace {

RunConfig config_or_default(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

void print_eval(const EvalOutput& out) {
  const auto& s = out.summary;
  for (const auto& a : s.agents)
    std::printf("%-7s acc50 %6.2f  acc70 %6.2f  random acc50 %6.2f  pearson(U,tIoU) %.3f\n",
                std::string(to_string(a.kind)).c_str(), a.acc50, a.acc70, a.random_acc50, a.pearson_u);
  std::printf("marlcc  acc50 %6.2f  acc70 %6.2f  (oracle %6.2f / %6.2f)\n", s.marlcc_acc50, s.marlcc_acc70,
              s.oracle_acc50, s.oracle_acc70);
  std::printf("eta     matched %.4f  oos %.4f  h %.4f%s\n", s.mean_eta_matched, s.mean_eta_oos, out.calibration.h,
              out.calibration.degenerate ? " (degenerate)" : "");
  std::printf("oos     accuracy %6.2f  f1 %6.2f\n", out.oos.accuracy, out.oos.f1);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Evidential multi-agent moment localization"};
  app.require_subcommand(1);

  std::string config, out, data, ckpt, log, report, metrics, traces, val, objective, queries, candidates, episode;
  std::optional<double> h;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train all agents and the fusion network");
  tr->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", ckpt, "Checkpoint path")->required();
  tr->add_option("--log", log, "Training log CSV");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory or episode file")->required()->check(CLI::ExistingPath);
  ev->add_option("--report", report, "OOS report CSV")->required();
  ev->add_option("--metrics", metrics, "Metrics CSV");
  ev->add_option("--traces", traces, "Trace JSON-lines output");
  ev->add_option("--threshold", h, "OOS threshold (calibrated on the val split when omitted)");

  auto* cal = app.add_subcommand("oos-calibrate", "Calibrate the OOS threshold on validation data");
  cal->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  cal->add_option("--val", val, "Validation file or dataset directory")->required()->check(CLI::ExistingPath);
  cal->add_option("--objective", objective, "f1 or accuracy")->required()->check(CLI::IsMember({"f1", "accuracy"}));
  cal->add_option("--out", out, "Threshold output file")->required();

  auto* ret = app.add_subcommand("retrieve", "Rank candidate videos for each query by conflict");
  ret->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ret->add_option("--queries", queries, "Query JSON-lines file")->required()->check(CLI::ExistingFile);
  ret->add_option("--candidates", candidates, "Dataset directory or episode file")->required()->check(CLI::ExistingPath);
  ret->add_option("--report", report, "Retrieval report CSV")->required();

  auto* plot = app.add_subcommand("plot-2dstb", "Render one episode's traces as a 2DSTB map");
  plot->add_option("--traces", traces, "Trace JSON-lines file")->required()->check(CLI::ExistingFile);
  plot->add_option("--episode", episode, "Episode id")->required();
  plot->add_option("--out", out, "SVG output path")->required();
  plot->add_option("--data", data, "Dataset directory, for the ground-truth marker")->check(CLI::ExistingDirectory);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const RunConfig cfg = config_or_default(config);
      cmd_gen_data(cfg, out);
      std::printf("wrote %d/%d/%d episodes to %s\n", cfg.data.n_train, cfg.data.n_val, cfg.data.n_test, out.c_str());
    } else if (*tr) {
      const RunConfig cfg = config_or_default(config);
      cmd_train(cfg, data, ckpt, log);
      std::printf("wrote %s\n", ckpt.c_str());
    } else if (*ev) {
      print_eval(cmd_eval(ckpt, data, report, metrics, traces, h));
    } else if (*cal) {
      const Calibration c = cmd_calibrate(ckpt, val, oos_objective_from_string(objective), out);
      std::printf("h %.6f  %s %.2f%s\n", c.h, objective.c_str(), c.score, c.degenerate ? " (degenerate)" : "");
    } else if (*ret) {
      const auto results = cmd_retrieve(ckpt, queries, candidates, report);
      const int ks[] = {1, 10, 100};
      for (const auto& [k, r] : retrieval_recall(results, ks)) std::printf("R@%d %.2f\n", k, r);
    } else if (*plot) {
      cmd_plot(traces, episode, out, data);
    }
  } catch (const std::exception& e) {
    std::cerr << "evmarl: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace evmarl
