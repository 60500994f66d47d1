#include "evmarl/marlcc.hpp"

#include <algorithm>
#include <stdexcept>

#include "evmarl/metrics.hpp"

namespace evmarl {

FusionNet make_fusion_net(ParameterStore& store, const FusionConfig& cfg) {
  FusionNet net;
  net.cfg = cfg;
  const auto evi = static_cast<std::size_t>(cfg.evi_hidden);
  const auto iou = static_cast<std::size_t>(cfg.iou_hidden);
  const auto loc = static_cast<std::size_t>(cfg.loc_hidden);
  const auto gru = static_cast<std::size_t>(cfg.gru_hidden);
  net.ffn_evi = make_dense(store, "fusion.ffn_evi", kNumLocClasses, evi, Activation::ReLU);
  net.ffn_iou = make_dense(store, "fusion.ffn_iou", 1, iou, Activation::ReLU);
  net.ffn_loc = make_dense(store, "fusion.ffn_loc", 2, loc, Activation::ReLU);
  net.gru = make_gru(store, "fusion.gru", evi + iou + loc, gru);
  net.trust_hidden = make_dense(store, "fusion.ffn_tr1", gru + loc,
                                static_cast<std::size_t>(cfg.trust_hidden), Activation::ReLU);
  net.trust_out = make_dense(store, "fusion.ffn_tr2", static_cast<std::size_t>(cfg.trust_hidden), 1,
                             Activation::Sigmoid);
  return net;
}

FusionInput fusion_input(const AgentTrace& trace) {
  FusionInput inp;
  for (const auto& s : trace.steps) {
    std::array<double, kNumLocClasses> e{};
    std::copy_n(s.evidence.e.begin(), kNumLocClasses, e.begin());
    inp.evidence.push_back(e);
    inp.p_iou.push_back(s.p_iou);
    inp.boundaries.push_back(s.region);
  }
  inp.final = trace.final;
  return inp;
}

namespace {

Var loc_pair(Tape& tape, const Interval& iv) {
  const double v[2] = {iv.start, iv.end};
  return tape.input(v);
}

}  // namespace

Var encode_trace(Tape& tape, const FusionNet& net, const FusionVars& inp) {
  const std::size_t T = inp.evidence.size();
  if (inp.p_iou.size() != T || inp.boundaries.size() != T)
    throw std::invalid_argument("encode_trace: stream lengths differ");
  const FusionConfig& cfg = net.cfg;
  std::vector<double> zeros(net.gru.hidden, 0.0);
  Var h = tape.input(zeros);
  const std::vector<double> zero16(kNumLocClasses, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    Var e = cfg.zero_evidence ? tape.input(zero16) : inp.evidence[t];
    Var p = cfg.zero_iou ? tape.scalar(0.0) : inp.p_iou[t];
    Var b = loc_pair(tape, cfg.zero_boundary ? Interval{0.0, 0.0} : inp.boundaries[t]);
    Var x = tape.concat({dense(tape, net.ffn_evi, e), dense(tape, net.ffn_iou, p), dense(tape, net.ffn_loc, b)});
    h = gru_step(tape, net.gru, x, h);
  }
  return h;
}

Var encode_trace(Tape& tape, const FusionNet& net, const FusionInput& inp) {
  FusionVars v;
  const std::size_t T = inp.evidence.size();
  if (inp.p_iou.size() != T || inp.boundaries.size() != T)
    throw std::invalid_argument("encode_trace: stream lengths differ");
  for (std::size_t t = 0; t < T; ++t) {
    v.evidence.push_back(tape.input(inp.evidence[t]));
    v.p_iou.push_back(tape.scalar(inp.p_iou[t]));
  }
  v.boundaries = inp.boundaries;
  v.final = inp.final;
  return encode_trace(tape, net, v);
}

Var trusted_iou(Tape& tape, const FusionNet& net, Var theta, const Interval& final) {
  Var fin = dense(tape, net.ffn_loc, loc_pair(tape, final));
  return dense(tape, net.trust_out, dense(tape, net.trust_hidden, tape.concat({theta, fin})));
}

double trusted_iou(const FusionInput& inp, const ParameterStore& store, const FusionNet& net) {
  Tape tape(store);
  return tape.scalar_value(trusted_iou(tape, net, encode_trace(tape, net, inp), inp.final));
}

double trust_loss(double u, const Interval& final, const Interval& gt) {
  const double d = u - tiou(final, gt);
  return d * d;
}

Var trust_loss(Tape& tape, Var u, const Interval& final, const Interval& gt) {
  return tape.square(tape.add_scalar(u, -tiou(final, gt)));
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax of an empty list");
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Winner select_winner(std::span<const AgentTrace> traces, const ParameterStore& store, const FusionNet& net) {
  if (traces.empty()) throw std::invalid_argument("select_winner: no traces");
  Winner w;
  for (const auto& tr : traces) w.u.push_back(trusted_iou(fusion_input(tr), store, net));
  w.index = argmax_first(w.u);
  w.final = traces[w.index].final;
  return w;
}

OosDecision detect_oos(std::span<const Interval> finals, double h) {
  OosDecision d;
  d.eta = eta(finals);
  d.h = h;
  d.verdict = d.eta > h ? Verdict::Oos : Verdict::Match;
  return d;
}

std::string_view to_string(OosObjective objective) {
  return objective == OosObjective::F1 ? "f1" : "accuracy";
}

OosObjective oos_objective_from_string(std::string_view name) {
  if (name == "f1") return OosObjective::F1;
  if (name == "accuracy") return OosObjective::Accuracy;
  throw std::invalid_argument("objective must be f1 or accuracy, got " + std::string(name));
}

Calibration calibrate_threshold(std::span<const double> etas, std::span<const bool> is_oos,
                                OosObjective objective) {
  if (etas.size() != is_oos.size()) throw std::invalid_argument("calibrate: size mismatch");
  const auto n_oos = std::count(is_oos.begin(), is_oos.end(), true);
  if (n_oos == 0 || n_oos == static_cast<std::ptrdiff_t>(is_oos.size()))
    throw std::invalid_argument("calibrate: validation labels contain a single class");

  std::vector<double> sorted(etas.begin(), etas.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  Calibration best;
  if (sorted.size() == 1) {
    best.h = sorted.front();
    best.degenerate = true;
  }
  std::vector<double> candidates;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  candidates.push_back(sorted.back());

  bool first = true;
  std::vector<std::pair<bool, bool>> decisions(etas.size());
  for (double h : candidates) {
    for (std::size_t i = 0; i < etas.size(); ++i) decisions[i] = {etas[i] > h, is_oos[i]};
    const OosScores s = oos_metrics(decisions);
    const double score = objective == OosObjective::F1 ? s.f1 : s.accuracy;
    if (first || score > best.score) {
      best.h = h;
      best.score = score;
      first = false;
    }
  }
  return best;
}

std::vector<RankedVideo> rank_by_eta(std::vector<RankedVideo> candidates) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedVideo& a, const RankedVideo& b) { return a.eta < b.eta; });
  return candidates;
}

}  // namespace evmarl
