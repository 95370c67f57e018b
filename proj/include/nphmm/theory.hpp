#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nphmm/hmm.hpp"
#include "nphmm/rng.hpp"

namespace nphmm {

struct BoundReport {
  std::string name;
  double worst_margin = 0.0;  // bound minus observed; positive = satisfied
  double rho = std::numeric_limits<double>::quiet_NaN();
  std::string witness;
  long long trials = 0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> extras;
};

// Forgetting coefficient of Lemma B.2.
double rho(double q, int k);

// Two filters started from different initial laws must contract at 2*rho^{t-1}.
BoundReport filter_forgetting_check(const HmmParams& theta, const std::vector<double>& mu,
                                    const std::vector<double>& mu2,
                                    const std::vector<double>& obs);

// sum a_i b_i / sum c_i d_i <= max_i(a_i/c_i) * max_j(b_j/d_j).
BoundReport ratio_bound_check(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& c, const std::vector<double>& d);

// KL(p_n^{theta*}, p_n^{theta(eps)}) / (n eps^2) stays below C_K and KL grows
// (sub)linearly in n at fixed eps.
BoundReport kl_scaling_probe(const HmmParams& theta_star, const std::vector<double>& eps_schedule,
                             const std::vector<int>& n_grid);

// Var(L_n ratio)/n boundedness across an n grid; the lemma's constant is
// fitted per alpha and reported, never asserted.
BoundReport variance_bound_probe(const HmmParams& theta_star, const HmmParams& theta,
                                 const std::vector<int>& n_grid,
                                 const std::vector<double>& alpha_grid);

// Downstream consequence of the extended-chain lemma: conditional means of the
// per-step log ratio forget the prefix geometrically; the fitted rate is
// reported against rho^{1/2}. Diagnostic only, no hard assertion.
BoundReport extended_forgetting_probe(const HmmParams& theta_star, const HmmParams& theta, int n);

// Deterministic parameter perturbation used by the scaling probes: tilts Q
// entries and emission masses by +-eps with alternating signs, renormalized.
HmmParams perturb_params(const HmmParams& theta, double eps);

// CLI suites: forgetting | ratio | kl | variance | mixing.
BoundReport run_check_suite(const std::string& suite, long long trials, std::uint64_t seed);

}  // namespace nphmm
