#pragma once

#include <utility>
#include <vector>

#include "nphmm/emission.hpp"
#include "nphmm/rng.hpp"
#include "nphmm/transition.hpp"

namespace nphmm {

/// theta = (Q, f): transition matrix plus one emission density per state.
struct HmmParams {
  TransitionMatrix Q;
  std::vector<EmissionDensity> emissions;

  int k() const { return Q.k; }
  bool discrete() const;
  void validate() const;
};

/// Forward-filter output: predictive rows P(X_t = . | Y_{1:t-1}) and the
/// accumulated log-likelihood. Row 0 is the initial law itself.
struct FilterTrace {
  int n = 0;
  int k = 0;
  std::vector<double> predictive;  // n x k row-major
  double log_lik = 0.0;

  double pred(int t, int i) const { return predictive[static_cast<std::size_t>(t) * k + i]; }
};

/// Log-space forward filter with per-step renormalization; exact log p_n
/// for any n (no underflow). Throws std::domain_error when the one-step
/// predictive likelihood vanishes.
FilterTrace forward_filter(const HmmParams& theta, const std::vector<double>& mu,
                           const std::vector<double>& obs);

/// Filtered rows P(X_t = . | Y_{1:t}) for the same recursion; used by FFBS.
std::vector<double> filtered_probabilities(const HmmParams& theta, const std::vector<double>& mu,
                                           const std::vector<double>& obs);

/// Stationary-start simulation. States are 0-based.
std::pair<std::vector<int>, std::vector<double>> simulate(const HmmParams& theta, int n,
                                                          RandomStream& rng);

double sample_emission(const EmissionDensity& f, RandomStream& rng);

/// p_ell^theta(window) = sum over paths of mu_{x_1} Q_{x_1 x_2} ... f_{x_ell}(y_ell),
/// stationary start.
double joint_marginal_density(const HmmParams& theta, const std::vector<double>& window);

/// Same with an explicit initial law (shared work for distance code).
double joint_marginal_density(const HmmParams& theta, const std::vector<double>& mu,
                              const std::vector<double>& window);

/// Relabel hidden states by a permutation: perm[i] is the new index of old
/// state i. The observed law is invariant under this map.
HmmParams permute_states(const HmmParams& theta, const std::vector<int>& perm);

}  // namespace nphmm
