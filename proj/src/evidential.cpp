#include "evmarl/evidential.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace evmarl {

Evidence make_evidence(std::span<const double> e) {
  Evidence ev;
  ev.e.assign(e.begin(), e.end());
  ev.alpha.resize(e.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    if (!(e[j] >= 0.0)) throw std::invalid_argument("evidence must be nonnegative");
    ev.alpha[j] = e[j] + 1.0;
  }
  ev.strength = std::accumulate(ev.alpha.begin(), ev.alpha.end(), 0.0);
  ev.uncertainty = static_cast<double>(e.size()) / ev.strength;
  return ev;
}

EvidenceHead make_evidence_head(ParameterStore& store, const std::string& name,
                                std::size_t state_dim) {
  return {make_dense(store, name, state_dim, kNumLocClasses, Activation::Softplus)};
}

Var evidence_head(Tape& tape, const EvidenceHead& head, Var state) {
  return dense(tape, head.fc, state);
}

Evidence evidence_head(const Tensor& state, const ParameterStore& store, const EvidenceHead& head) {
  const Tensor out = dense_forward(state, store[head.fc.w].value, store[head.fc.b].value,
                                   Activation::Softplus);
  return make_evidence(out.values);
}

Var evidential_loss(Tape& tape, Var evidence, int true_class) {
  const auto C = static_cast<double>(tape.size(evidence));
  Var log_s = tape.log(tape.add_scalar(tape.sum(evidence), C));
  Var log_a = tape.log(tape.add_scalar(tape.slice(evidence, static_cast<std::size_t>(true_class), 1), 1.0));
  return tape.sub(log_s, log_a);
}

double evidential_loss(const Evidence& ev, int true_class) {
  return std::log(ev.strength) - std::log(ev.alpha.at(static_cast<std::size_t>(true_class)));
}

double dirichlet_log_density(std::span<const double> p, std::span<const double> alpha) {
  if (p.size() != alpha.size() || p.empty())
    throw std::invalid_argument("dirichlet_log_density: size mismatch");
  double total = 0.0;
  for (double x : p) {
    if (x < -1e-9) throw std::domain_error("point is off the simplex");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::domain_error("point is off the simplex");

  double out = 0.0, strength = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    strength += alpha[j];
    out -= std::lgamma(alpha[j]);
    const double expo = alpha[j] - 1.0;
    if (expo == 0.0) continue;
    if (p[j] <= 0.0) {
      if (expo > 0.0) return -std::numeric_limits<double>::infinity();
      return std::numeric_limits<double>::infinity();
    }
    out += expo * std::log(p[j]);
  }
  return out + std::lgamma(strength);
}

}  // namespace evmarl
