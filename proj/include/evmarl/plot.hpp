#pragma once

// 2DSTB map: x = start boundary, y = end boundary, one polyline per agent
// through its per-step outputs.

#include <optional>
#include <string>
#include <vector>

#include "evmarl/core.hpp"

namespace evmarl {

struct PlotTrace {
  std::string label;
  std::vector<Interval> outputs;  // per-step [start, end]
  Interval final;
};

struct PlotOptions {
  int size = 480;  // pixels per side of the unit square
  std::string title;
};

/// Returns a standalone SVG document. The legend carries the dispersion of the
/// final points (eta) when there are at least two traces.
std::string render_2dstb(const std::vector<PlotTrace>& traces, const std::optional<Interval>& gt,
                         const PlotOptions& opts = {});

}  // namespace evmarl
