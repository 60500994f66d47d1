#pragma once

// Multi-agent layer: a shared fusion network scores every agent's trace with a
// trusted IoU, the highest score wins the competition, and the spread of the
// agents' final intervals flags out-of-scope queries.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evmarl/agents.hpp"
#include "evmarl/core.hpp"
#include "evmarl/diffcomp.hpp"

namespace evmarl {

struct FusionConfig {
  int evi_hidden = 16;
  int iou_hidden = 8;
  int loc_hidden = 8;
  int gru_hidden = 32;
  int trust_hidden = 32;
  /// Ablation switches: zero a stream at the fusion input.
  bool zero_evidence = false;
  bool zero_iou = false;
  bool zero_boundary = false;
  /// When false, trust-loss gradients also reach the agents' heads.
  bool stop_gradient = true;

  bool operator==(const FusionConfig&) const = default;
};

struct FusionNet {
  Dense ffn_evi;
  Dense ffn_iou;
  Dense ffn_loc;  // shared by the per-step boundaries and the final interval
  GruCell gru;
  Dense trust_hidden;
  Dense trust_out;  // sigmoid
  FusionConfig cfg;
};

FusionNet make_fusion_net(ParameterStore& store, const FusionConfig& cfg);

struct FusionInput {
  std::vector<std::array<double, kNumLocClasses>> evidence;
  std::vector<double> p_iou;
  std::vector<Interval> boundaries;
  Interval final;
};

FusionInput fusion_input(const AgentTrace& trace);

/// Per-step tape handles for the fusion input; lets gradients flow into the
/// agents when stop-gradient is off.
struct FusionVars {
  std::vector<Var> evidence;
  std::vector<Var> p_iou;
  std::vector<Interval> boundaries;
  Interval final;
};

/// Encodes the three streams and runs them through the GRU; returns theta_T.
/// Throws std::invalid_argument if the stream lengths differ.
Var encode_trace(Tape& tape, const FusionNet& net, const FusionVars& inp);
Var encode_trace(Tape& tape, const FusionNet& net, const FusionInput& inp);

/// U_n = sigmoid(FFN_Tr(theta_T ++ FFN_loc(final))).
Var trusted_iou(Tape& tape, const FusionNet& net, Var theta, const Interval& final);

double trusted_iou(const FusionInput& inp, const ParameterStore& store, const FusionNet& net);

/// (U - tIoU(final, gt))^2.
double trust_loss(double u, const Interval& final, const Interval& gt);
Var trust_loss(Tape& tape, Var u, const Interval& final, const Interval& gt);

struct Winner {
  std::size_t index = 0;
  Interval final;
  std::vector<double> u;
};

/// Argmax over scores, ties to the lowest index. Throws on an empty list.
std::size_t argmax_first(std::span<const double> scores);

Winner select_winner(std::span<const AgentTrace> traces, const ParameterStore& store, const FusionNet& net);

struct OosDecision {
  double eta = 0.0;
  double h = 0.0;
  Verdict verdict = Verdict::Match;
};

/// OOS iff eta > h. Throws for fewer than two finals.
OosDecision detect_oos(std::span<const Interval> finals, double h);

enum class OosObjective { F1, Accuracy };

std::string_view to_string(OosObjective objective);
OosObjective oos_objective_from_string(std::string_view name);

struct Calibration {
  double h = 0.0;
  double score = 0.0;  // objective value in percent at h
  bool degenerate = false;
};

/// Sweeps h over the midpoints of sorted distinct eta values (plus the
/// all-Match threshold at the largest eta) and returns the best h, ties to the
/// smaller h. Throws std::invalid_argument when labels contain one class only.
Calibration calibrate_threshold(std::span<const double> etas, std::span<const bool> is_oos,
                                OosObjective objective);

struct RankedVideo {
  std::string video_id;
  double eta = 0.0;
};

/// Stable sort of candidates by ascending eta.
std::vector<RankedVideo> rank_by_eta(std::vector<RankedVideo> candidates);

}  // namespace evmarl
