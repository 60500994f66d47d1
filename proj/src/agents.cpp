#include "evmarl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evmarl {

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Esrl: return "esrl";
    case AgentKind::EMover: return "emover";
    case AgentKind::EDark: return "edark";
  }
  return "?";
}

AgentKind agent_kind_from_string(std::string_view name) {
  for (AgentKind k : kAllAgents)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown agent kind: " + std::string(name));
}

FeatureMode feature_mode(AgentKind kind) {
  return kind == AgentKind::EDark ? FeatureMode::Excluded : FeatureMode::Included;
}

int num_actions(AgentKind kind) { return kind == AgentKind::Esrl ? kEsrlActions : kMoverActions; }

void AgentConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("agent.steps must be >= 1");
  if (!(f0 > 0.0 && f0 <= 1.0)) throw std::invalid_argument("agent.f0 must lie in (0,1]");
  if (!(step_size > 0.0)) throw std::invalid_argument("agent.step_size must be > 0");
  for (double o : offsets)
    if (!(o >= 0.0 && o <= f0 + 1e-12)) throw std::invalid_argument("agent.offsets must lie in [0, f0]");
  if (!(shift_large > 0.0 && shift_small > 0.0)) throw std::invalid_argument("agent shifts must be > 0");
  if (policy_hidden < 1) throw std::invalid_argument("agent.policy_hidden must be >= 1");
}

AgentNet make_agent_net(ParameterStore& store, AgentKind kind, const AgentConfig& cfg, int d_v, int d_q) {
  const std::string prefix = std::string(to_string(kind)) + ".";
  AgentNet net;
  net.kind = kind;
  net.obs = make_observation_net(store, prefix, cfg.obs, d_v, d_q);
  const auto o = static_cast<std::size_t>(cfg.obs.o_dim);
  const auto h = static_cast<std::size_t>(cfg.policy_hidden);
  const auto k = static_cast<std::size_t>(num_actions(kind));
  net.policy = make_gru(store, prefix + "policy_gru", o, h);
  net.start_logits = make_dense(store, prefix + "pi_start", h, k, Activation::Identity);
  net.end_logits = make_dense(store, prefix + "pi_end", h, k, Activation::Identity);
  net.value = make_dense(store, prefix + "value", h, 1, Activation::Identity);
  net.evidence = make_evidence_head(store, prefix + "fc_evi", o);
  net.p_iou = make_dense(store, prefix + "head_iou", o, 1, Activation::Sigmoid);
  net.p_dist = make_dense(store, prefix + "head_dist", o, 2, Activation::Sigmoid);
  net.p_loc = make_dense(store, prefix + "head_loc", o, kNumLocClasses, Activation::Identity);
  return net;
}

Interval scanner_window(int t, double step_size, double f0) {
  const double start = t * step_size;
  return {start, std::min(start + f0, 1.0)};
}

double apply_add(const Interval& region, int offset_index, const std::array<double, kNumOffsets>& offsets) {
  const double b = region.start + offsets.at(static_cast<std::size_t>(offset_index));
  return std::clamp(b, region.start, region.end);
}

Interval esrl_apply(const Interval& current, const Interval& region, int start_action, int end_action,
                    const AgentConfig& cfg, BoundaryMove* start_move, BoundaryMove* end_move) {
  // The end leads a rightward scan, so it moves first and the start is
  // checked against the end placed in the same step.
  Interval out = current;
  BoundaryMove em{end_action == 0, Boundary::End, current.end, current.end, current.end, current.start, true};
  if (!em.hold) {
    em.candidate = apply_add(region, end_action - 1, cfg.offsets);
    em.valid = is_valid(em.candidate, Boundary::End, current.start);
    if (em.valid) out.end = em.candidate;
    em.applied = out.end;
  }
  BoundaryMove sm{start_action == 0, Boundary::Start, current.start, current.start, current.start, out.end,
                  true};
  if (!sm.hold) {
    sm.candidate = apply_add(region, start_action - 1, cfg.offsets);
    sm.valid = is_valid(sm.candidate, Boundary::Start, out.end);
    if (sm.valid) out.start = sm.candidate;
    sm.applied = out.start;
  }
  if (start_move) *start_move = sm;
  if (end_move) *end_move = em;
  return out;
}

namespace {

double shift_of(MoverAction a, const AgentConfig& cfg) {
  switch (a) {
    case MoverAction::ShiftLeftLarge: return -cfg.shift_large;
    case MoverAction::ShiftLeftSmall: return -cfg.shift_small;
    case MoverAction::Hold: return 0.0;
    case MoverAction::ShiftRightSmall: return cfg.shift_small;
    case MoverAction::ShiftRightLarge: return cfg.shift_large;
  }
  return 0.0;
}

}  // namespace

Interval mover_apply(const Interval& current, MoverAction start_action, MoverAction end_action,
                     const AgentConfig& cfg, int n_frames, BoundaryMove* start_move,
                     BoundaryMove* end_move) {
  const double gap = 1.0 / n_frames;
  Interval out = current;
  BoundaryMove sm{start_action == MoverAction::Hold, Boundary::Start, current.start, current.start,
                  current.start, current.end, true};
  if (!sm.hold) {
    sm.candidate = current.start + shift_of(start_action, cfg);
    sm.valid = is_valid(sm.candidate, Boundary::Start, current.end);
    out.start = std::clamp(sm.candidate, 0.0, std::max(0.0, current.end - gap));
    sm.applied = out.start;
  }
  BoundaryMove em{end_action == MoverAction::Hold, Boundary::End, current.end, current.end, current.end,
                  out.start, true};
  if (!em.hold) {
    em.candidate = current.end + shift_of(end_action, cfg);
    em.valid = is_valid(em.candidate, Boundary::End, out.start);
    out.end = std::clamp(em.candidate, std::min(1.0, out.start + gap), 1.0);
    em.applied = out.end;
  }
  if (start_move) *start_move = sm;
  if (end_move) *end_move = em;
  return out;
}

namespace {

int choose(std::span<const double> log_probs, ActionMode mode, Rng& rng) {
  switch (mode) {
    case ActionMode::Greedy:
      return static_cast<int>(std::max_element(log_probs.begin(), log_probs.end()) - log_probs.begin());
    case ActionMode::Uniform:
      return std::uniform_int_distribution<int>(0, static_cast<int>(log_probs.size()) - 1)(rng);
    case ActionMode::Sample: {
      std::vector<double> p(log_probs.size());
      double total = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = std::exp(log_probs[i]));
      for (double& x : p) x /= total;
      return static_cast<int>(sample_categorical(p, rng));
    }
  }
  return 0;
}

}  // namespace

Rollout rollout(Tape& tape, const AgentNet& net, const AgentConfig& cfg, const Episode& ep,
                ActionMode mode, Rng& rng) {
  const FeatureMode fmode = feature_mode(net.kind);
  const EpisodeEncoding enc = encode_episode(tape, net.obs, ep);
  std::vector<double> zeros(net.policy.hidden, 0.0);
  Var h = tape.input(zeros);

  Rollout out;
  out.trace.kind = net.kind;
  out.trace.steps.reserve(static_cast<std::size_t>(cfg.steps));
  out.vars.reserve(static_cast<std::size_t>(cfg.steps));
  Interval current{0.0, 1.0};

  for (int t = 0; t < cfg.steps; ++t) {
    StepRecord rec;
    StepVars v;
    rec.t = t;
    rec.region = net.kind == AgentKind::Esrl ? scanner_window(t, cfg.step_size, cfg.f0) : current;

    Var o = assemble_observation(tape, net.obs, enc, ep, rec.region, fmode);
    h = gru_step(tape, net.policy, o, h);
    Var lp_start = tape.log_softmax(dense(tape, net.start_logits, h));
    Var lp_end = tape.log_softmax(dense(tape, net.end_logits, h));
    v.value = dense(tape, net.value, h);

    rec.start_action = choose(tape.value(lp_start), mode, rng);
    rec.end_action = choose(tape.value(lp_end), mode, rng);
    v.log_prob = tape.add(tape.slice(lp_start, static_cast<std::size_t>(rec.start_action), 1),
                          tape.slice(lp_end, static_cast<std::size_t>(rec.end_action), 1));
    rec.log_prob = tape.scalar_value(v.log_prob);
    rec.value = tape.scalar_value(v.value);

    if (net.kind == AgentKind::Esrl) {
      current = esrl_apply(current, rec.region, rec.start_action, rec.end_action, cfg, &rec.start_move,
                           &rec.end_move);
    } else {
      current = mover_apply(current, static_cast<MoverAction>(rec.start_action),
                            static_cast<MoverAction>(rec.end_action), cfg, ep.n_frames(),
                            &rec.start_move, &rec.end_move);
    }
    rec.output = current;

    v.evidence = evidence_head(tape, net.evidence, o);
    v.p_iou = dense(tape, net.p_iou, o);
    v.p_dist = dense(tape, net.p_dist, o);
    v.p_loc = dense(tape, net.p_loc, o);
    rec.evidence = make_evidence(tape.value(v.evidence));
    rec.p_iou = tape.scalar_value(v.p_iou);
    std::copy_n(tape.value(v.p_dist).begin(), 2, rec.p_dist.begin());
    std::copy_n(tape.value(v.p_loc).begin(), kNumLocClasses, rec.p_loc.begin());

    out.trace.steps.push_back(std::move(rec));
    out.vars.push_back(v);
  }
  out.trace.final = current;
  return out;
}

AgentTrace run_episode(const AgentNet& net, const AgentConfig& cfg, const Episode& ep,
                       const ParameterStore& store, ActionMode mode, Rng& rng) {
  Tape tape(store);
  return rollout(tape, net, cfg, ep, mode, rng).trace;
}

}  // namespace evmarl
