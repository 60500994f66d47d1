#include "evmarl/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evmarl {

bool is_valid_interval(const Interval& iv) {
  return iv.start >= 0.0 && iv.start < iv.end && iv.end <= 1.0;
}

double tiou(const Interval& a, const Interval& b) {
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (uni <= 0.0) return 1.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double boundary_distance(double boundary, double gt) { return std::abs(boundary - gt); }

std::string_view to_string(RelLoc r) {
  switch (r) {
    case RelLoc::LeftFar: return "LeftFar";
    case RelLoc::LeftNear: return "LeftNear";
    case RelLoc::RightNear: return "RightNear";
    case RelLoc::RightFar: return "RightFar";
  }
  return "?";
}

RelLoc rel_loc(double boundary, double gt, double f0) {
  const double k = boundary_distance(boundary, gt);
  if (boundary <= gt) return k > f0 ? RelLoc::LeftFar : RelLoc::LeftNear;
  return k > f0 ? RelLoc::RightFar : RelLoc::RightNear;
}

RelLocClass rel_loc_class(const Interval& scanner, const Interval& gt, double f0) {
  RelLocClass c{};
  c.start_class = rel_loc(scanner.start, gt.start, f0);
  c.end_class = rel_loc(scanner.end, gt.end, f0);
  c.joint_index = kNumRelLoc * static_cast<int>(c.start_class) + static_cast<int>(c.end_class);
  return c;
}

bool is_valid(double candidate, Boundary which, double other_boundary) {
  if (which == Boundary::Start) return candidate < other_boundary && candidate >= 0.0;
  return candidate > other_boundary && candidate <= 1.0;
}

double conflict(const Interval& a, const Interval& b) {
  return std::abs(a.start - b.start) + std::abs(a.end - b.end);
}

ConflictReport conflict_report(std::span<const Interval> finals) {
  if (finals.size() < 2) throw std::invalid_argument("eta is undefined for fewer than two agents");
  ConflictReport report;
  report.pairwise.reserve(finals.size() * (finals.size() - 1) / 2);
  for (std::size_t i = 0; i < finals.size(); ++i) {
    for (std::size_t j = i + 1; j < finals.size(); ++j) {
      const double c = conflict(finals[i], finals[j]);
      report.pairwise.push_back({i, j, c});
      report.eta = std::max(report.eta, c);
    }
  }
  return report;
}

double eta(std::span<const Interval> finals) { return conflict_report(finals).eta; }

}  // namespace evmarl
