#pragma once

// End-to-end operations shared by the command-line tool, the acceptance
// harness and the python bindings.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evmarl/config.hpp"
#include "evmarl/io.hpp"
#include "evmarl/marlcc.hpp"
#include "evmarl/metrics.hpp"
#include "evmarl/training.hpp"

namespace evmarl {

struct EpisodeResult {
  std::string id;
  bool oos = false;
  std::optional<Interval> gt;
  SystemResult system;
  std::vector<double> tiou;  // per agent, matched episodes only
};

struct AgentSummary {
  AgentKind kind = AgentKind::Esrl;
  double acc50 = 0.0, acc70 = 0.0;
  double random_acc50 = 0.0, random_acc70 = 0.0;
  double pearson_u = 0.0;  // U against true final tIoU
  double mean_u = 0.0;
};

struct EvalSummary {
  std::vector<EpisodeResult> episodes;
  std::vector<AgentSummary> agents;
  double marlcc_acc50 = 0.0, marlcc_acc70 = 0.0;
  double oracle_acc50 = 0.0, oracle_acc70 = 0.0;
  double mean_eta_matched = 0.0, mean_eta_oos = 0.0;
  int n_matched = 0, n_oos = 0;
};

/// Greedy rollouts of every agent on every episode.
std::vector<EpisodeResult> run_split(const Model& model, std::span<const Episode> episodes);

/// Accuracy of each agent, MARLCC and the oracle on matched episodes, the
/// uniform-random baseline per agent (rolled out with `seed`), and eta means.
EvalSummary summarize(const Model& model, std::span<const Episode> episodes, std::vector<EpisodeResult> results,
                      std::uint64_t seed);

EvalSummary evaluate(const Model& model, std::span<const Episode> episodes, std::uint64_t seed);

/// Threshold calibration from the etas of a labelled split.
Calibration calibrate(std::span<const EpisodeResult> results, OosObjective objective);

struct OosRow {
  std::string episode_id;
  double eta = 0.0;
  double h = 0.0;
  bool predicted_oos = false;
  bool label_oos = false;
};

std::vector<OosRow> oos_rows(std::span<const EpisodeResult> results, double h);
OosScores oos_scores(std::span<const OosRow> rows);

std::string oos_report_csv(std::span<const OosRow> rows);
/// name,value rows: per-agent and system accuracies, eta means, OOS scores.
std::string metrics_csv(const EvalSummary& s, const Calibration& cal, const OosScores& oos);
std::string traces_jsonl(std::span<const EpisodeResult> results);

// --- retrieval --------------------------------------------------------------

struct RetrievalResult {
  std::string query_id;
  std::string true_video;
  std::vector<RankedVideo> ranking;
};

/// For each query, a pool of the true video plus pool_size-1 others drawn
/// from `candidates` (seeded by the query id), ranked by ascending eta.
std::vector<RetrievalResult> retrieve(const Model& model, std::span<const RetrievalQuery> queries,
                                      std::span<const Episode> candidates, int pool_size, std::uint64_t seed);

std::string retrieval_report_csv(std::span<const RetrievalResult> results);
std::map<int, double> retrieval_recall(std::span<const RetrievalResult> results, std::span<const int> ks);

// --- commands ---------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir);

struct TrainOutput {
  Model model;
  TrainLog log;
};

TrainOutput train_from_data(const RunConfig& cfg, const std::string& data_dir);
void cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt_path,
               const std::string& log_path);

struct EvalOutput {
  EvalSummary summary;
  Calibration calibration;
  OosScores oos;
  std::vector<OosRow> rows;
};

/// Evaluates on DIR/test.jsonl. h comes from `h` when given, otherwise it is
/// calibrated on DIR/val.jsonl with the checkpoint's objective. Reports are
/// only written after every computation has succeeded.
EvalOutput cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& report_path,
                    const std::string& metrics_path = "", const std::string& traces_path = "",
                    std::optional<double> h = std::nullopt);

Calibration cmd_calibrate(const std::string& ckpt_path, const std::string& val_path, OosObjective objective,
                          const std::string& out_path);

std::vector<RetrievalResult> cmd_retrieve(const std::string& ckpt_path, const std::string& queries_path,
                                          const std::string& candidates_dir, const std::string& report_path);

void cmd_plot(const std::string& traces_path, const std::string& episode_id, const std::string& out_path,
              const std::string& data_dir = "");

/// Reads the dataset directory argument as a directory or a single file.
std::vector<Episode> read_split_or_file(const std::string& path, const std::string& split);

}  // namespace evmarl
