#include "evmarl/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evmarl/plot.hpp"

namespace evmarl {

namespace fs = std::filesystem;

namespace {

Rng seeded(std::uint64_t seed, std::uint32_t salt, const std::string& key = "") {
  std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                      salt};
  for (unsigned char ch : key) words.push_back(ch);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

const char* verdict_name(bool oos) { return oos ? "oos" : "match"; }

void check_dims(const Model& model, std::span<const Episode> eps) {
  for (const auto& ep : eps) {
    if (ep.d_v() != model.d_v || static_cast<int>(ep.query.size()) != model.d_q)
      throw std::invalid_argument("episode " + ep.id + " does not match the model dimensions (d_v=" +
                                  std::to_string(model.d_v) + ", d_q=" + std::to_string(model.d_q) + ")");
  }
}

}  // namespace

std::vector<EpisodeResult> run_split(const Model& model, std::span<const Episode> episodes) {
  check_dims(model, episodes);
  Rng unused(0);
  std::vector<EpisodeResult> out;
  out.reserve(episodes.size());
  for (const auto& ep : episodes) {
    EpisodeResult r;
    r.id = ep.id;
    r.oos = ep.oos;
    r.gt = ep.gt;
    r.system = run_system(model, ep, ActionMode::Greedy, unused);
    if (ep.gt)
      for (const auto& tr : r.system.traces) r.tiou.push_back(tiou(tr.final, *ep.gt));
    out.push_back(std::move(r));
  }
  return out;
}

EvalSummary summarize(const Model& model, std::span<const Episode> episodes, std::vector<EpisodeResult> results,
                      std::uint64_t seed) {
  if (results.size() != episodes.size()) throw std::invalid_argument("results do not match episodes");
  EvalSummary s;
  const std::size_t n_agents = model.agents.size();
  std::vector<std::vector<double>> agent_tiou(n_agents), agent_u(n_agents), random_tiou(n_agents);
  std::vector<double> winner_tiou, oracle_tiou, eta_m, eta_o;

  Rng rng = seeded(seed, 0x7a4d);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.oos || !r.gt) {
      eta_o.push_back(r.system.eta);
      continue;
    }
    eta_m.push_back(r.system.eta);
    for (std::size_t a = 0; a < n_agents; ++a) {
      agent_tiou[a].push_back(r.tiou[a]);
      agent_u[a].push_back(r.system.u[a]);
      AgentTrace rt = run_episode(model.agents[a], model.agent_cfg, episodes[i], model.store, ActionMode::Uniform, rng);
      random_tiou[a].push_back(tiou(rt.final, *r.gt));
    }
    winner_tiou.push_back(r.tiou[r.system.winner]);
    oracle_tiou.push_back(*std::max_element(r.tiou.begin(), r.tiou.end()));
  }
  s.n_matched = static_cast<int>(eta_m.size());
  s.n_oos = static_cast<int>(eta_o.size());
  s.mean_eta_matched = mean(eta_m);
  s.mean_eta_oos = mean(eta_o);
  if (!winner_tiou.empty()) {
    s.marlcc_acc50 = acc_at_tious(winner_tiou, 0.5);
    s.marlcc_acc70 = acc_at_tious(winner_tiou, 0.7);
    s.oracle_acc50 = acc_at_tious(oracle_tiou, 0.5);
    s.oracle_acc70 = acc_at_tious(oracle_tiou, 0.7);
  }
  for (std::size_t a = 0; a < n_agents; ++a) {
    AgentSummary as;
    as.kind = model.agents[a].kind;
    if (!agent_tiou[a].empty()) {
      as.acc50 = acc_at_tious(agent_tiou[a], 0.5);
      as.acc70 = acc_at_tious(agent_tiou[a], 0.7);
      as.random_acc50 = acc_at_tious(random_tiou[a], 0.5);
      as.random_acc70 = acc_at_tious(random_tiou[a], 0.7);
      as.pearson_u = pearson(agent_u[a], agent_tiou[a]);
      as.mean_u = mean(agent_u[a]);
    }
    s.agents.push_back(as);
  }
  s.episodes = std::move(results);
  return s;
}

EvalSummary evaluate(const Model& model, std::span<const Episode> episodes, std::uint64_t seed) {
  return summarize(model, episodes, run_split(model, episodes), seed);
}

Calibration calibrate(std::span<const EpisodeResult> results, OosObjective objective) {
  std::vector<double> etas;
  // std::vector<bool> has no contiguous storage to view as a span.
  auto labels = std::make_unique<bool[]>(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    etas.push_back(results[i].system.eta);
    labels[i] = results[i].oos;
  }
  return calibrate_threshold(etas, std::span<const bool>(labels.get(), results.size()), objective);
}

std::vector<OosRow> oos_rows(std::span<const EpisodeResult> results, double h) {
  std::vector<OosRow> rows;
  rows.reserve(results.size());
  for (const auto& r : results) {
    const OosDecision d = detect_oos(r.system.finals(), h);
    rows.push_back({r.id, d.eta, h, d.verdict == Verdict::Oos, r.oos});
  }
  return rows;
}

OosScores oos_scores(std::span<const OosRow> rows) {
  std::vector<std::pair<bool, bool>> pairs;
  for (const auto& r : rows) pairs.emplace_back(r.predicted_oos, r.label_oos);
  return oos_metrics(pairs);
}

std::string oos_report_csv(std::span<const OosRow> rows) {
  std::string out = "episode_id,eta,h,verdict,label,correct\n";
  for (const auto& r : rows) {
    out += r.episode_id + "," + format_number(r.eta) + "," + format_number(r.h) + "," + verdict_name(r.predicted_oos) +
           "," + verdict_name(r.label_oos) + "," + (r.predicted_oos == r.label_oos ? "1" : "0") + "\n";
  }
  return out;
}

std::string metrics_csv(const EvalSummary& s, const Calibration& cal, const OosScores& oos) {
  std::string out = "name,value\n";
  auto row = [&](const std::string& name, double v) { out += name + "," + format_number(v) + "\n"; };
  for (const auto& a : s.agents) {
    const std::string k(to_string(a.kind));
    row(k + "_acc50", a.acc50);
    row(k + "_acc70", a.acc70);
    row(k + "_random_acc50", a.random_acc50);
    row(k + "_random_acc70", a.random_acc70);
    row(k + "_pearson_u_tiou", a.pearson_u);
    row(k + "_mean_u", a.mean_u);
  }
  row("marlcc_acc50", s.marlcc_acc50);
  row("marlcc_acc70", s.marlcc_acc70);
  row("oracle_acc50", s.oracle_acc50);
  row("oracle_acc70", s.oracle_acc70);
  row("n_matched", s.n_matched);
  row("n_oos", s.n_oos);
  row("mean_eta_matched", s.mean_eta_matched);
  row("mean_eta_oos", s.mean_eta_oos);
  row("h", cal.h);
  row("h_degenerate", cal.degenerate ? 1.0 : 0.0);
  row("oos_accuracy", oos.accuracy);
  row("oos_f1", oos.f1);
  return out;
}

std::string traces_jsonl(std::span<const EpisodeResult> results) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& tr : r.system.traces) {
      out += trace_to_json(r.id, tr).dump();
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval

std::vector<RetrievalResult> retrieve(const Model& model, std::span<const RetrievalQuery> queries,
                                      std::span<const Episode> candidates, int pool_size, std::uint64_t seed) {
  if (pool_size < 1) throw std::invalid_argument("pool_size must be >= 1");
  check_dims(model, candidates);
  std::vector<RetrievalResult> out;
  Rng unused(0);
  for (const auto& q : queries) {
    if (static_cast<int>(q.query.size()) != model.d_q)
      throw std::invalid_argument("query " + q.query_id + " does not match the model's d_q");
    std::size_t truth = candidates.size();
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].id == q.video_id)
        truth = i;
      else
        others.push_back(i);
    }
    if (truth == candidates.size())
      throw std::invalid_argument("query " + q.query_id + ": video " + q.video_id + " is not among the candidates");
    Rng rng = seeded(seed, 0x3e71, q.query_id);
    std::shuffle(others.begin(), others.end(), rng);
    others.resize(std::min<std::size_t>(others.size(), static_cast<std::size_t>(pool_size - 1)));
    std::vector<std::size_t> pool = others;
    pool.push_back(truth);
    std::shuffle(pool.begin(), pool.end(), rng);

    RetrievalResult res{q.query_id, q.video_id, {}};
    for (std::size_t idx : pool) {
      Episode ep = candidates[idx];
      ep.query = q.query;
      res.ranking.push_back({ep.id, run_system(model, ep, ActionMode::Greedy, unused).eta});
    }
    res.ranking = rank_by_eta(std::move(res.ranking));
    out.push_back(std::move(res));
  }
  return out;
}

std::string retrieval_report_csv(std::span<const RetrievalResult> results) {
  std::string out = "query_id,rank,video_id,eta\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.ranking.size(); ++i)
      out += r.query_id + "," + std::to_string(i + 1) + "," + r.ranking[i].video_id + "," +
             format_number(r.ranking[i].eta) + "\n";
  }
  return out;
}

std::map<int, double> retrieval_recall(std::span<const RetrievalResult> results, std::span<const int> ks) {
  std::vector<std::vector<std::string>> rankings;
  std::vector<std::string> truth;
  for (const auto& r : results) {
    std::vector<std::string> ids;
    for (const auto& v : r.ranking) ids.push_back(v.video_id);
    rankings.push_back(std::move(ids));
    truth.push_back(r.true_video);
  }
  std::map<int, double> out;
  for (int k : ks) out[k] = rankings.empty() ? 0.0 : recall_at_k(rankings, truth, k);
  return out;
}

// ---------------------------------------------------------------------------
// Commands

std::vector<Episode> read_split_or_file(const std::string& path, const std::string& split) {
  if (fs::is_directory(path)) return read_split(path, split);
  if (!fs::exists(path)) throw std::runtime_error("no such file or directory: " + path);
  return read_episodes(path);
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  write_dataset(out_dir, generate_dataset(cfg.data), cfg);
}

TrainOutput train_from_data(const RunConfig& cfg, const std::string& data_dir) {
  const auto train_set = read_split(data_dir, "train");
  const auto val_path = fs::path(data_dir) / "val.jsonl";
  const auto val_set = fs::exists(val_path) ? read_episodes(val_path.string()) : std::vector<Episode>{};
  if (train_set.empty()) throw std::invalid_argument("training split is empty");

  RunConfig run = cfg;
  run.data.d_v = train_set.front().d_v();
  run.data.d_q = static_cast<int>(train_set.front().query.size());
  run.data.n_frames = train_set.front().n_frames();
  TrainOutput out{build_model(run), {}};
  check_dims(out.model, train_set);
  check_dims(out.model, val_set);
  Rng init = init_rng(run.seed);
  init_model(out.model, init);
  Rng rng = train_rng(run.seed);
  out.log = train(run, train_set, val_set, out.model, rng);
  return out;
}

void cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt_path,
               const std::string& log_path) {
  TrainOutput out = train_from_data(cfg, data_dir);
  RunConfig saved = cfg;
  saved.data.d_v = out.model.d_v;
  saved.data.d_q = out.model.d_q;
  if (!log_path.empty()) write_file_atomic(log_path, training_log_csv(out.log));
  save_model(ckpt_path, out.model, saved);
}

EvalOutput cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& report_path,
                    const std::string& metrics_path, const std::string& traces_path, std::optional<double> h) {
  LoadedModel lm = load_model(ckpt_path);
  const auto test = read_split_or_file(data_dir, "test");
  EvalOutput out;
  out.summary = evaluate(lm.model, test, lm.cfg.seed);
  if (h) {
    out.calibration = {*h, 0.0, false};
  } else {
    if (!fs::is_directory(data_dir))
      throw std::invalid_argument("no threshold given and " + data_dir + " is not a dataset directory");
    const auto val = read_split(data_dir, "val");
    out.calibration = calibrate(run_split(lm.model, val), lm.cfg.oos_objective);
  }
  out.rows = oos_rows(out.summary.episodes, out.calibration.h);
  out.oos = oos_scores(out.rows);

  const std::string report = oos_report_csv(out.rows);
  const std::string metrics = metrics_csv(out.summary, out.calibration, out.oos);
  const std::string traces = traces_jsonl(out.summary.episodes);
  write_file_atomic(report_path, report);
  if (!metrics_path.empty()) write_file_atomic(metrics_path, metrics);
  if (!traces_path.empty()) write_file_atomic(traces_path, traces);
  return out;
}

Calibration cmd_calibrate(const std::string& ckpt_path, const std::string& val_path, OosObjective objective,
                          const std::string& out_path) {
  LoadedModel lm = load_model(ckpt_path);
  const auto val = read_split_or_file(val_path, "val");
  Calibration cal = calibrate(run_split(lm.model, val), objective);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g\n", cal.h);
  write_file_atomic(out_path, buf);
  return cal;
}

std::vector<RetrievalResult> cmd_retrieve(const std::string& ckpt_path, const std::string& queries_path,
                                          const std::string& candidates_dir, const std::string& report_path) {
  LoadedModel lm = load_model(ckpt_path);
  const auto queries = read_queries(queries_path);
  const auto candidates = read_split_or_file(candidates_dir, "test");
  auto results = retrieve(lm.model, queries, candidates, lm.cfg.retrieval.pool_size, lm.cfg.seed);
  write_file_atomic(report_path, retrieval_report_csv(results));
  return results;
}

void cmd_plot(const std::string& traces_path, const std::string& episode_id, const std::string& out_path,
              const std::string& data_dir) {
  std::vector<PlotTrace> plot;
  for (const auto& r : read_traces(traces_path)) {
    if (r.episode_id != episode_id) continue;
    PlotTrace p{std::string(to_string(r.agent)), {}, r.final};
    for (const auto& s : r.steps) p.outputs.push_back(s.second.second);
    plot.push_back(std::move(p));
  }
  if (plot.empty()) throw std::invalid_argument("no traces for episode " + episode_id + " in " + traces_path);
  std::optional<Interval> gt;
  if (!data_dir.empty()) {
    for (const char* split : {"train", "val", "test"}) {
      const auto p = fs::path(data_dir) / (std::string(split) + ".jsonl");
      if (!fs::exists(p)) continue;
      for (const auto& ep : read_episodes(p.string()))
        if (ep.id == episode_id) gt = ep.gt;
    }
  }
  write_file_atomic(out_path, render_2dstb(plot, gt, {480, episode_id}));
}

}  // namespace evmarl
