#include "evmarl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evmarl/evidential.hpp"
#include "evmarl/metrics.hpp"

namespace evmarl {

// ---------------------------------------------------------------------------
// Rewards

double f_dis(double x, double d_t, double d_next, double theta) { return x + d_t - theta * d_next; }

double boundary_reward(const BoundaryMove& move, double gt_boundary, const RewardConfig& cfg) {
  if (move.hold) return cfg.rho;
  const double d_t = boundary_distance(move.prev, gt_boundary);
  const double d_next = boundary_distance(move.applied, gt_boundary);
  if (!move.valid) return f_dis(cfg.beta, d_t, d_next, cfg.theta);
  const bool improved = cfg.branch_as_printed ? d_next > d_t : d_next < d_t;
  return f_dis(improved ? 1.0 - d_next : -1.0 - d_next, d_t, d_next, cfg.theta);
}

double step_reward(double start_reward, double end_reward) { return start_reward + end_reward; }

void assign_rewards(AgentTrace& trace, const Interval& gt, const RewardConfig& cfg) {
  for (auto& s : trace.steps) {
    s.start_reward = boundary_reward(s.start_move, gt.start, cfg);
    s.end_reward = boundary_reward(s.end_move, gt.end, cfg);
    s.reward = step_reward(s.start_reward, s.end_reward);
  }
}

std::vector<double> discounted_returns(std::span<const double> rewards, double discount) {
  std::vector<double> out(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    out[i] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses (value level)

namespace {

std::vector<double> rewards_of(const AgentTrace& trace) {
  std::vector<double> r;
  r.reserve(trace.steps.size());
  for (const auto& s : trace.steps) r.push_back(s.reward);
  return r;
}

const Interval& require_gt(const Episode& ep) {
  if (ep.oos || !ep.gt) throw std::invalid_argument("episode " + ep.id + " has no ground truth");
  return *ep.gt;
}

}  // namespace

PolicyValueLoss policy_value_loss(const AgentTrace& trace, double discount) {
  PolicyValueLoss out;
  if (trace.steps.empty()) return out;
  const auto returns = discounted_returns(rewards_of(trace), discount);
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const double adv = returns[t] - trace.steps[t].value;
    out.policy -= trace.steps[t].log_prob * adv;
    out.value += adv * adv;
  }
  out.value /= static_cast<double>(trace.steps.size());
  return out;
}

AuxLoss auxiliary_losses(const AgentTrace& trace, const Episode& ep, double f0) {
  const Interval& gt = require_gt(ep);
  AuxLoss out;
  if (trace.steps.empty()) return out;
  for (const auto& s : trace.steps) {
    const double di = s.p_iou - tiou(s.region, gt);
    out.iou += di * di;
    const double ds = s.p_dist[0] - boundary_distance(s.region.start, gt.start);
    const double de = s.p_dist[1] - boundary_distance(s.region.end, gt.end);
    out.dist += 0.5 * (ds * ds + de * de);
    const int cls = rel_loc_class(s.region, gt, f0).joint_index;
    const auto p = softmax(s.p_loc);
    out.loc -= std::log(p[static_cast<std::size_t>(cls)]);
  }
  const double T = static_cast<double>(trace.steps.size());
  out.iou /= T;
  out.dist /= T;
  out.loc /= T;
  return out;
}

double trace_evidential_loss(const AgentTrace& trace, const Episode& ep, double f0) {
  const Interval& gt = require_gt(ep);
  if (trace.steps.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : trace.steps)
    sum += evidential_loss(s.evidence, rel_loc_class(s.region, gt, f0).joint_index);
  return sum / static_cast<double>(trace.steps.size());
}

LossBreakdown agent_loss(const AgentTrace& trace, const Episode& ep, const LossWeights& w, double f0,
                         double discount) {
  LossBreakdown b;
  if (!ep.oos && ep.gt) {
    const AuxLoss aux = auxiliary_losses(trace, ep, f0);
    b.evi = w.evi * trace_evidential_loss(trace, ep, f0);
    b.iou = w.iou * aux.iou;
    b.dist = w.dist * aux.dist;
    b.loc = w.loc * aux.loc;
  }
  const PolicyValueLoss pv = policy_value_loss(trace, discount);
  b.policy = w.policy * pv.policy;
  b.value = w.value * pv.value;
  b.total = b.evi + b.iou + b.dist + b.loc + b.policy + b.value;
  return b;
}

// ---------------------------------------------------------------------------
// Losses (tape)

TapeLoss agent_loss(Tape& tape, const Rollout& r, const Episode& ep, const LossWeights& w, double f0,
                    double discount) {
  const auto& steps = r.trace.steps;
  const std::size_t T = steps.size();
  if (T == 0) throw std::invalid_argument("agent_loss: empty trace");
  const double inv_t = 1.0 / static_cast<double>(T);
  TapeLoss out;
  std::vector<Var> components;

  if (!ep.oos && ep.gt) {
    const Interval& gt = *ep.gt;
    std::vector<Var> evi, iou, dist, loc;
    for (std::size_t t = 0; t < T; ++t) {
      const StepVars& v = r.vars[t];
      const Interval& reg = steps[t].region;
      const int cls = rel_loc_class(reg, gt, f0).joint_index;
      evi.push_back(evidential_loss(tape, v.evidence, cls));
      iou.push_back(tape.square(tape.add_scalar(v.p_iou, -tiou(reg, gt))));
      const double k[2] = {boundary_distance(reg.start, gt.start), boundary_distance(reg.end, gt.end)};
      dist.push_back(tape.mean(tape.square(tape.sub(v.p_dist, tape.input(k)))));
      loc.push_back(tape.scale(tape.slice(tape.log_softmax(v.p_loc), static_cast<std::size_t>(cls), 1), -1.0));
    }
    Var e = tape.scale(tape.add_n(evi), w.evi * inv_t);
    Var i = tape.scale(tape.add_n(iou), w.iou * inv_t);
    Var d = tape.scale(tape.add_n(dist), w.dist * inv_t);
    Var l = tape.scale(tape.add_n(loc), w.loc * inv_t);
    out.parts.evi = tape.scalar_value(e);
    out.parts.iou = tape.scalar_value(i);
    out.parts.dist = tape.scalar_value(d);
    out.parts.loc = tape.scalar_value(l);
    components.insert(components.end(), {e, i, d, l});
  }

  const auto returns = discounted_returns(rewards_of(r.trace), discount);
  std::vector<Var> pol, val;
  for (std::size_t t = 0; t < T; ++t) {
    const double adv = returns[t] - steps[t].value;
    pol.push_back(tape.scale(r.vars[t].log_prob, -adv));
    val.push_back(tape.square(tape.add_scalar(r.vars[t].value, -returns[t])));
  }
  Var p = tape.scale(tape.add_n(pol), w.policy);
  Var v = tape.scale(tape.add_n(val), w.value * inv_t);
  out.parts.policy = tape.scalar_value(p);
  out.parts.value = tape.scalar_value(v);
  components.push_back(p);
  components.push_back(v);

  out.total = tape.add_n(components);
  const auto& b = out.parts;
  out.parts.total = b.evi + b.iou + b.dist + b.loc + b.policy + b.value;
  return out;
}

// ---------------------------------------------------------------------------
// Model

Model build_model(const RunConfig& cfg) {
  cfg.validate();
  Model m;
  m.agent_cfg = cfg.agent;
  m.d_v = cfg.data.d_v;
  m.d_q = cfg.data.d_q;
  for (AgentKind k : kAllAgents) m.agents.push_back(make_agent_net(m.store, k, cfg.agent, m.d_v, m.d_q));
  m.fusion = make_fusion_net(m.store, cfg.fusion);
  return m;
}

void init_model(Model& model, Rng& rng) { model.store.init_uniform(rng); }

std::vector<Interval> SystemResult::finals() const {
  std::vector<Interval> out;
  for (const auto& t : traces) out.push_back(t.final);
  return out;
}

SystemResult run_system(const Model& model, const Episode& ep, ActionMode mode, Rng& rng) {
  SystemResult res;
  Tape tape(model.store);
  for (const auto& net : model.agents) {
    tape.clear();
    res.traces.push_back(rollout(tape, net, model.agent_cfg, ep, mode, rng).trace);
  }
  for (const auto& tr : res.traces) res.u.push_back(trusted_iou(fusion_input(tr), model.store, model.fusion));
  res.winner = argmax_first(res.u);
  if (res.traces.size() >= 2) res.eta = eta(res.finals());
  return res;
}

// ---------------------------------------------------------------------------
// Training loop

Rng init_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1717u};
  return Rng(seq);
}

Rng train_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7a41u};
  return Rng(seq);
}

namespace {

struct EpisodeOutcome {
  Var total;
  LossBreakdown loss;  // summed over agents
  double trust = 0.0;
  double winner_tiou = 0.0;
};

EpisodeOutcome record_episode(Tape& tape, const Model& model, const RunConfig& cfg, const Episode& ep,
                              ActionMode mode, Rng& rng) {
  const Interval& gt = *ep.gt;
  EpisodeOutcome out;
  std::vector<Var> terms;
  std::vector<Rollout> rolls;
  for (const auto& net : model.agents) {
    Rollout r = rollout(tape, net, model.agent_cfg, ep, mode, rng);
    assign_rewards(r.trace, gt, cfg.reward);
    const TapeLoss al = agent_loss(tape, r, ep, cfg.train.weights, cfg.agent.f0, cfg.train.discount);
    terms.push_back(al.total);
    out.loss.evi += al.parts.evi;
    out.loss.iou += al.parts.iou;
    out.loss.dist += al.parts.dist;
    out.loss.loc += al.parts.loc;
    out.loss.policy += al.parts.policy;
    out.loss.value += al.parts.value;
    out.loss.total += al.parts.total;
    rolls.push_back(std::move(r));
  }

  std::vector<double> us;
  for (const auto& r : rolls) {
    FusionVars fv;
    fv.boundaries.reserve(r.trace.steps.size());
    for (std::size_t t = 0; t < r.trace.steps.size(); ++t) {
      const auto& s = r.trace.steps[t];
      if (model.fusion.cfg.stop_gradient) {
        fv.evidence.push_back(tape.input(s.evidence.e));
        fv.p_iou.push_back(tape.scalar(s.p_iou));
      } else {
        fv.evidence.push_back(r.vars[t].evidence);
        fv.p_iou.push_back(r.vars[t].p_iou);
      }
      fv.boundaries.push_back(s.region);
    }
    fv.final = r.trace.final;
    Var u = trusted_iou(tape, model.fusion, encode_trace(tape, model.fusion, fv), fv.final);
    us.push_back(tape.scalar_value(u));
    Var tl = trust_loss(tape, u, fv.final, gt);
    out.trust += cfg.train.weights.trust * tape.scalar_value(tl);
    terms.push_back(tape.scale(tl, cfg.train.weights.trust));
  }
  out.total = tape.add_n(terms);
  out.winner_tiou = tiou(rolls[argmax_first(us)].trace.final, gt);
  return out;
}

struct RowAccumulator {
  LossBreakdown loss;
  double trust = 0.0;
  std::vector<double> tious;

  void add(const EpisodeOutcome& o) {
    loss.evi += o.loss.evi;
    loss.iou += o.loss.iou;
    loss.dist += o.loss.dist;
    loss.loc += o.loss.loc;
    loss.policy += o.loss.policy;
    loss.value += o.loss.value;
    loss.total += o.loss.total;
    trust += o.trust;
    tious.push_back(o.winner_tiou);
  }

  EpochRow finish(int epoch, const std::string& split) const {
    EpochRow row;
    row.epoch = epoch;
    row.split = split;
    const double n = std::max<double>(1.0, static_cast<double>(tious.size()));
    row.loss.evi = loss.evi / n;
    row.loss.iou = loss.iou / n;
    row.loss.dist = loss.dist / n;
    row.loss.loc = loss.loc / n;
    row.loss.policy = loss.policy / n;
    row.loss.value = loss.value / n;
    row.loss.total = loss.total / n;
    row.trust = trust / n;
    row.total = row.loss.total + row.trust;
    if (!tious.empty()) {
      row.acc50 = acc_at_tious(tious, 0.5);
      row.acc70 = acc_at_tious(tious, 0.7);
    }
    return row;
  }
};

void apply_update(Model& model, const RunConfig& cfg, int batch) {
  if (batch > 1) {
    const double k = 1.0 / batch;
    for (auto& p : model.store.params())
      for (double& g : p.grad) g *= k;
  }
  model.store.clip_grad_norm(cfg.optim.clip_norm);
  adam_update(model.store, cfg.optim.adam);
}

}  // namespace

EpochRow evaluate_split(const RunConfig& cfg, std::span<const Episode> episodes, const Model& model,
                        int epoch, const std::string& split) {
  Tape tape(model.store);
  Rng unused(0);
  RowAccumulator acc;
  for (const auto& ep : episodes) {
    if (ep.oos || !ep.gt) continue;
    tape.clear();
    acc.add(record_episode(tape, model, cfg, ep, ActionMode::Greedy, unused));
  }
  return acc.finish(epoch, split);
}

TrainLog train(const RunConfig& cfg, std::span<const Episode> train_set, std::span<const Episode> val_set,
               Model& model, Rng& rng, const std::function<void(const EpochRow&)>& on_row) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < train_set.size(); ++i)
    if (!train_set[i].oos && train_set[i].gt) order.push_back(i);

  TrainLog log;
  auto emit = [&](EpochRow row) {
    if (on_row) on_row(row);
    log.rows.push_back(std::move(row));
  };

  Tape tape(model.store);
  const int batch_size = std::max(1, cfg.train.batch_size);
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    RowAccumulator acc;
    int in_batch = 0;
    for (std::size_t idx : order) {
      tape.clear();
      EpisodeOutcome o = record_episode(tape, model, cfg, train_set[idx], ActionMode::Sample, rng);
      tape.backward(o.total, model.store);
      acc.add(o);
      if (++in_batch == batch_size) {
        apply_update(model, cfg, in_batch);
        in_batch = 0;
      }
    }
    if (in_batch > 0) apply_update(model, cfg, in_batch);
    emit(acc.finish(epoch, "train"));
    if (cfg.train.eval_each_epoch && !val_set.empty()) emit(evaluate_split(cfg, val_set, model, epoch, "val"));
  }
  return log;
}

}  // namespace evmarl
