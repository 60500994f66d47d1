#pragma once

// Locational evidence over the 16 relative-location classes and the
// Dirichlet quantities derived from it.

#include <span>
#include <string>
#include <vector>

#include "evmarl/core.hpp"
#include "evmarl/diffcomp.hpp"

namespace evmarl {

struct Evidence {
  std::vector<double> e;      // >= 0, one per class
  std::vector<double> alpha;  // e + 1
  double strength = 0.0;      // S = sum(alpha)
  double uncertainty = 1.0;   // u = C / S
};

/// Builds alpha, S and u from raw evidence. Throws on negative entries.
Evidence make_evidence(std::span<const double> e);

struct EvidenceHead {
  Dense fc;  // Softplus output
};

EvidenceHead make_evidence_head(ParameterStore& store, const std::string& name, std::size_t state_dim);

/// Nonnegative evidence vector for one observation.
Var evidence_head(Tape& tape, const EvidenceHead& head, Var state);
Evidence evidence_head(const Tensor& state, const ParameterStore& store, const EvidenceHead& head);

/// log S - log alpha_true, recorded on the tape.
Var evidential_loss(Tape& tape, Var evidence, int true_class);
double evidential_loss(const Evidence& ev, int true_class);

/// Log-density of Dir(p | alpha). Returns -infinity where the density is zero
/// (a zero coordinate under alpha_j > 1). Throws std::domain_error when p is
/// off the simplex by more than 1e-9.
double dirichlet_log_density(std::span<const double> p, std::span<const double> alpha);

}  // namespace evmarl
