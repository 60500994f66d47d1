#pragma once

// File formats: JSON-lines datasets and traces, CSV reports, checkpoints.
// Every writer goes through write_file_atomic (temp file + rename).

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evmarl/agents.hpp"
#include "evmarl/config.hpp"
#include "evmarl/synthenv.hpp"
#include "evmarl/training.hpp"

namespace evmarl {

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& contents);

// --- datasets ---------------------------------------------------------------

nlohmann::json episode_to_json(const Episode& ep);
/// Throws std::invalid_argument on any schema violation.
Episode episode_from_json(const nlohmann::json& j);

std::string episodes_to_jsonl(const std::vector<Episode>& eps);
std::vector<Episode> episodes_from_jsonl(const std::string& text, const std::string& source = "<memory>");

void write_episodes(const std::string& path, const std::vector<Episode>& eps);
std::vector<Episode> read_episodes(const std::string& path);

/// Writes train/val/test .jsonl, dataset.json and queries.jsonl into dir.
void write_dataset(const std::string& dir, const Dataset& ds, const RunConfig& cfg);

/// Reads one split file (train/val/test) from a dataset directory.
std::vector<Episode> read_split(const std::string& dir, const std::string& split);

struct RetrievalQuery {
  std::string query_id;
  std::vector<double> query;
  std::string video_id;  // the video holding the true moment
};

std::string queries_to_jsonl(const std::vector<RetrievalQuery>& qs);
std::vector<RetrievalQuery> read_queries(const std::string& path);

/// One retrieval query per matched episode, up to `limit`.
std::vector<RetrievalQuery> make_queries(const std::vector<Episode>& eps, int limit);

// --- traces -----------------------------------------------------------------

nlohmann::json trace_to_json(const std::string& episode_id, const AgentTrace& trace);

struct TraceRecord {
  std::string episode_id;
  AgentKind agent = AgentKind::Esrl;
  std::vector<std::pair<int, std::pair<Interval, Interval>>> steps;  // t, (region, output)
  std::vector<double> u;
  std::vector<double> p_iou;
  Interval final;
};

TraceRecord trace_from_json(const nlohmann::json& j);
std::vector<TraceRecord> read_traces(const std::string& path);

// --- checkpoints ------------------------------------------------------------

void save_model(const std::string& path, const Model& model, const RunConfig& cfg);

struct LoadedModel {
  RunConfig cfg;
  Model model;
};

/// Rebuilds the model from the embedded config and copies every parameter.
/// Throws std::runtime_error on any corruption or mismatch.
LoadedModel load_model(const std::string& path);
LoadedModel model_from_bytes(const std::string& bytes);

// --- CSV --------------------------------------------------------------------

std::string format_number(double x);
std::string training_log_csv(const TrainLog& log);

}  // namespace evmarl
