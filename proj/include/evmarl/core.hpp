#pragma once

// Closed-form geometry on the unit timeline. Video length is normalized to
// 1.0, so every time below is a fraction of the video.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace evmarl {

struct Interval {
  double start = 0.0;
  double end = 1.0;

  bool operator==(const Interval&) const = default;
};

/// True iff 0 <= start < end <= 1.
bool is_valid_interval(const Interval& iv);

/// Temporal IoU. Disjoint intervals clamp to 0; a fully degenerate
/// denominator (all endpoints equal) returns 1.
double tiou(const Interval& a, const Interval& b);

double boundary_distance(double boundary, double gt);

enum class RelLoc : int { LeftFar = 0, LeftNear = 1, RightNear = 2, RightFar = 3 };

inline constexpr int kNumRelLoc = 4;
inline constexpr int kNumLocClasses = kNumRelLoc * kNumRelLoc;  // C = 16

struct RelLocClass {
  RelLoc start_class;
  RelLoc end_class;
  int joint_index;
};

std::string_view to_string(RelLoc r);

/// Position of one boundary relative to its ground-truth boundary. An exact
/// hit (k == 0) is LeftNear.
RelLoc rel_loc(double boundary, double gt, double f0);

RelLocClass rel_loc_class(const Interval& scanner, const Interval& gt, double f0);

enum class Boundary { Start, End };

/// Validity condition on a single boundary given the opposite boundary.
bool is_valid(double candidate, Boundary which, double other_boundary);

/// L1 distance between two outputs in (start, end) space.
double conflict(const Interval& a, const Interval& b);

struct PairConflict {
  std::size_t agent_i;
  std::size_t agent_j;
  double conflict;
};

enum class Verdict { Unset, Match, Oos };

struct ConflictReport {
  std::vector<PairConflict> pairwise;
  double eta = 0.0;
  Verdict verdict = Verdict::Unset;
};

/// All C(n,2) pairwise conflicts and their maximum. Throws
/// std::invalid_argument for fewer than two intervals.
ConflictReport conflict_report(std::span<const Interval> finals);

/// Max pairwise conflict.
double eta(std::span<const Interval> finals);

}  // namespace evmarl
