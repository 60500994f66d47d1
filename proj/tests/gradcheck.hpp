#pragma once

// Central finite-difference check of tape gradients against every parameter
// of a store.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "evmarl/diffcomp.hpp"

namespace evmarl::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  int checked = 0;
};

/// `build` records a scalar loss on the tape. Relative error uses
/// max(|a|, |n|, 1e-3) in the denominator so vanishing gradients compare
/// absolutely.
inline GradCheckResult grad_check(ParameterStore& store, const std::function<Var(Tape&)>& build,
                                  double h = 1e-5, int max_per_param = 12) {
  store.zero_grad();
  {
    Tape tape(store);
    Var loss = build(tape);
    tape.backward(loss, store);
  }
  auto eval = [&]() {
    Tape tape(store);
    return tape.scalar_value(build(tape));
  };
  GradCheckResult res;
  for (auto& p : store.params()) {
    const std::size_t n = p.value.size();
    const std::size_t stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(max_per_param));
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p.value.values[i];
      p.value.values[i] = orig + h;
      const double up = eval();
      p.value.values[i] = orig - h;
      const double down = eval();
      p.value.values[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      const double rel = std::abs(analytic - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  store.zero_grad();
  return res;
}

}  // namespace evmarl::testing
