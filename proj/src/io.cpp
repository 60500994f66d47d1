#include "evmarl/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace evmarl {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw std::runtime_error("write failed for " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move " + tmp + " to " + path + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

json interval_json(const Interval& iv) { return json::array({iv.start, iv.end}); }

Interval interval_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw std::invalid_argument(what + " must be [start, end]");
  return {j[0].get<double>(), j[1].get<double>()};
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
  return *it;
}

std::vector<double> numbers(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw std::invalid_argument(what + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<json> parse_lines(const std::string& text, const std::string& source) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

json episode_to_json(const Episode& ep) {
  json frames = json::array();
  for (int i = 0; i < ep.n_frames(); ++i) {
    auto f = ep.frame(i);
    frames.push_back(std::vector<double>(f.begin(), f.end()));
  }
  json j;
  j["id"] = ep.id;
  j["oos"] = ep.oos;
  j["gt"] = ep.gt ? interval_json(*ep.gt) : json(nullptr);
  j["query"] = ep.query;
  j["frames"] = std::move(frames);
  return j;
}

Episode episode_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("episode must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "id" && k != "oos" && k != "gt" && k != "query" && k != "frames")
      throw std::invalid_argument("unexpected episode field '" + k + "'");
  }
  Episode ep;
  const json& id = field(j, "id");
  if (!id.is_string()) throw std::invalid_argument("id must be a string");
  ep.id = id.get<std::string>();
  const json& oos = field(j, "oos");
  if (!oos.is_boolean()) throw std::invalid_argument("oos must be a boolean");
  ep.oos = oos.get<bool>();
  const json& gt = field(j, "gt");
  if (!gt.is_null()) ep.gt = interval_from(gt, "gt");
  if (ep.oos == ep.gt.has_value()) throw std::invalid_argument("episode " + ep.id + ": oos must be true iff gt is null");
  ep.query = numbers(field(j, "query"), "query");
  const json& frames = field(j, "frames");
  if (!frames.is_array() || frames.empty()) throw std::invalid_argument("frames must be a non-empty array");
  const std::size_t n = frames.size();
  std::vector<double> flat;
  std::size_t d = 0;
  for (const auto& row : frames) {
    auto r = numbers(row, "frame");
    if (d == 0) d = r.size();
    if (r.size() != d || d == 0) throw std::invalid_argument("episode " + ep.id + ": ragged frame matrix");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  ep.frames = Tensor({n, d}, std::move(flat));
  return ep;
}

std::string episodes_to_jsonl(const std::vector<Episode>& eps) {
  std::string out;
  for (const auto& ep : eps) {
    out += episode_to_json(ep).dump();
    out += '\n';
  }
  return out;
}

std::vector<Episode> episodes_from_jsonl(const std::string& text, const std::string& source) {
  std::vector<Episode> out;
  int line = 0;
  for (const auto& j : parse_lines(text, source)) {
    ++line;
    try {
      out.push_back(episode_from_json(j));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_episodes(const std::string& path, const std::vector<Episode>& eps) {
  write_file_atomic(path, episodes_to_jsonl(eps));
}

std::vector<Episode> read_episodes(const std::string& path) { return episodes_from_jsonl(read_file(path), path); }

void write_dataset(const std::string& dir, const Dataset& ds, const RunConfig& cfg) {
  fs::create_directories(dir);
  write_episodes((fs::path(dir) / "train.jsonl").string(), ds.train);
  write_episodes((fs::path(dir) / "val.jsonl").string(), ds.val);
  write_episodes((fs::path(dir) / "test.jsonl").string(), ds.test);
  write_file_atomic((fs::path(dir) / "dataset.json").string(), config_to_json(cfg)["data"].dump(2) + "\n");
  write_file_atomic((fs::path(dir) / "queries.jsonl").string(),
                    queries_to_jsonl(make_queries(ds.test, cfg.retrieval.num_queries)));
}

std::vector<Episode> read_split(const std::string& dir, const std::string& split) {
  const fs::path p = fs::path(dir) / (split + ".jsonl");
  if (!fs::exists(p)) throw std::runtime_error("missing dataset file " + p.string());
  return read_episodes(p.string());
}

std::string queries_to_jsonl(const std::vector<RetrievalQuery>& qs) {
  std::string out;
  for (const auto& q : qs) {
    out += json{{"query_id", q.query_id}, {"query", q.query}, {"video_id", q.video_id}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<RetrievalQuery> read_queries(const std::string& path) {
  std::vector<RetrievalQuery> out;
  for (const auto& j : parse_lines(read_file(path), path)) {
    RetrievalQuery q;
    if (!j.is_object()) throw std::invalid_argument(path + ": query must be an object");
    const json& id = field(j, "query_id");
    const json& vid = field(j, "video_id");
    if (!id.is_string() || !vid.is_string()) throw std::invalid_argument(path + ": ids must be strings");
    q.query_id = id.get<std::string>();
    q.video_id = vid.get<std::string>();
    q.query = numbers(field(j, "query"), "query");
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<RetrievalQuery> make_queries(const std::vector<Episode>& eps, int limit) {
  std::vector<RetrievalQuery> out;
  for (const auto& ep : eps) {
    if (static_cast<int>(out.size()) >= limit) break;
    if (ep.oos) continue;
    out.push_back({ep.id, ep.query, ep.id});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traces

json trace_to_json(const std::string& episode_id, const AgentTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"t", s.t},
                     {"region", interval_json(s.region)},
                     {"output", interval_json(s.output)},
                     {"u", s.evidence.uncertainty},
                     {"p_iou", s.p_iou}});
  }
  return json{{"episode_id", episode_id},
              {"agent", std::string(to_string(trace.kind))},
              {"steps", std::move(steps)},
              {"final", interval_json(trace.final)}};
}

TraceRecord trace_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("trace must be an object");
  TraceRecord r;
  const json& id = field(j, "episode_id");
  if (!id.is_string()) throw std::invalid_argument("episode_id must be a string");
  r.episode_id = id.get<std::string>();
  const json& agent = field(j, "agent");
  if (!agent.is_string()) throw std::invalid_argument("agent must be a string");
  r.agent = agent_kind_from_string(agent.get<std::string>());
  const json& steps = field(j, "steps");
  if (!steps.is_array()) throw std::invalid_argument("steps must be an array");
  for (const auto& s : steps) {
    const json& t = field(s, "t");
    if (!t.is_number_integer()) throw std::invalid_argument("t must be an integer");
    r.steps.push_back({t.get<int>(), {interval_from(field(s, "region"), "region"), interval_from(field(s, "output"), "output")}});
    const json& u = field(s, "u");
    const json& p = field(s, "p_iou");
    if (!u.is_number() || !p.is_number()) throw std::invalid_argument("u and p_iou must be numbers");
    r.u.push_back(u.get<double>());
    r.p_iou.push_back(p.get<double>());
  }
  r.final = interval_from(field(j, "final"), "final");
  return r;
}

std::vector<TraceRecord> read_traces(const std::string& path) {
  std::vector<TraceRecord> out;
  int n = 0;
  for (const auto& j : parse_lines(read_file(path), path)) {
    ++n;
    try {
      out.push_back(trace_from_json(j));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ": record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const std::string& path, const Model& model, const RunConfig& cfg) {
  write_file_atomic(path, serialize_checkpoint(model.store, config_to_json(cfg).dump()));
}

LoadedModel model_from_bytes(const std::string& bytes) {
  Checkpoint ck = deserialize_checkpoint(bytes);
  RunConfig cfg;
  try {
    cfg = config_from_json(json::parse(ck.metadata));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint config is invalid: ") + e.what());
  }
  Model model = build_model(cfg);
  if (ck.store.size() != model.store.size())
    throw std::runtime_error("checkpoint parameter count does not match its config");
  for (auto& p : model.store.params()) {
    if (!ck.store.contains(p.name)) throw std::runtime_error("checkpoint lacks parameter " + p.name);
    const Parameter& src = ck.store.get(p.name);
    if (src.value.shape != p.value.shape) throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    p.value.values = src.value.values;
    p.m = src.m;
    p.v = src.v;
  }
  model.store.step_count = ck.store.step_count;
  if (!model.store.all_finite()) throw std::runtime_error("checkpoint contains non-finite values");
  return {cfg, std::move(model)};
}

LoadedModel load_model(const std::string& path) { return model_from_bytes(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

std::string training_log_csv(const TrainLog& log) {
  std::string out =
      "epoch,split,loss_total,loss_evi,loss_iou,loss_dist,loss_loc,loss_policy,loss_value,loss_trust,acc50,acc70\n";
  for (const auto& r : log.rows) {
    out += std::to_string(r.epoch) + "," + r.split;
    for (double x : {r.total, r.loss.evi, r.loss.iou, r.loss.dist, r.loss.loc, r.loss.policy, r.loss.value,
                     r.trust, r.acc50, r.acc70})
      out += "," + format_number(x);
    out += "\n";
  }
  return out;
}

}  // namespace evmarl
