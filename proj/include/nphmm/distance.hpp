#pragma once

#include <string>
#include <vector>

#include "nphmm/hmm.hpp"
#include "nphmm/rng.hpp"

namespace nphmm {

enum class DivMethod { automatic, exact_enumeration, quadrature, monte_carlo, chain_rule };

std::string div_method_name(DivMethod m);

struct DivergenceReport {
  double value = 0.0;
  DivMethod method = DivMethod::exact_enumeration;
  double mc_se = 0.0;       // standard error for MC methods
  double err_bound = 0.0;   // deterministic truncation error bar (exact discrete mode)
  long long n_draws = 0;
  int n = 0;                // path/window length
  bool infinite = false;    // support violation: value is +inf, not an error
};

struct DistanceOptions {
  long long mc_draws = 100000;
  double quad_tol = 1e-4;
  long long lattice_budget = 100000000;  // max V^ell windows for exact mode
  // > 0: discrete exact mode shrinks the lattice to the smallest V whose
  // combined stationary tail mass is below this; the trimmed mass stays in
  // err_bound. 0 keeps the full stored support.
  double lattice_trim = 0.0;
  // > 0: continuous ell <= 2 uses a fixed tensor grid with step
  // grid_step_sigmas * sigma_min instead of adaptive quadrature.
  double grid_step_sigmas = 0.0;
};

/// D_ell(theta, theta2) = || p_ell^theta - p_ell^theta2 ||_L1.
/// Discrete: exact lattice sum, tail correction in err_bound. Continuous:
/// ell <= 2 nested adaptive quadrature (tol 1e-4), ell >= 3 Monte Carlo from
/// the mixture (p1+p2)/2. rng required only for MC.
DivergenceReport d_ell(const HmmParams& theta, const HmmParams& theta2, int ell,
                       DivMethod method = DivMethod::automatic, RandomStream* rng = nullptr,
                       const DistanceOptions& opt = {});

struct LipschitzReport {
  double d_ell_value = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound + tol - D_ell
  bool ok = false;
  double mu_term = 0.0, q_term = 0.0, emission_term = 0.0;
};

/// Right-hand side sum |mu - mu~|_1 + k(ell-1) max|Q - Q~| + ell d(f, f~),
/// checked against the exact/quadrature D_ell.
LipschitzReport d_ell_lipschitz_bound(const HmmParams& theta, const HmmParams& theta2, int ell,
                                      RandomStream* rng = nullptr, const DistanceOptions& opt = {});

struct KlOptions {
  long long mc_sequences = 200;  // chain-rule MC: simulated paths from theta*
  long long lattice_budget = 10000000;
};

/// KL(p_n^{theta*}, p_n^{theta}). Exact: sum over the V^n lattice (discrete,
/// truth tail-free). Chain-rule: MC over Y ~ theta* of per-step conditional
/// KLs (discrete sums or quadrature). Support violations set infinite.
DivergenceReport kl_path(const HmmParams& theta_star, const HmmParams& theta, int n,
                         DivMethod method = DivMethod::automatic, RandomStream* rng = nullptr,
                         const KlOptions& opt = {});

struct VarianceReport {
  double variance = 0.0;
  double s1 = 0.0;  // sum of conditional variances of the increments
  double s2 = 0.0;  // variance of the compensator (forgetting part)
  double mc_se = 0.0;
  long long n_draws = 0;
  bool infinite = false;
  DivMethod method = DivMethod::exact_enumeration;
};

/// Var^{theta*}(L_n^{theta*} - L_n^{theta}) with the martingale/forgetting
/// split S1, S2 reported alongside (Var <= 2 S1 + 2 S2).
VarianceReport llr_variance(const HmmParams& theta_star, const HmmParams& theta, int n,
                            DivMethod method = DivMethod::automatic, RandomStream* rng = nullptr,
                            const KlOptions& opt = {});

/// C_K = 4 + log(2k/q*) + 10^4 k^2 / q*^5.
double c_k_constant(int k, double q_star);

struct KlNeighborhoodCondition {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  bool infinite = false;
};

struct KlNeighborhoodReport {
  std::vector<KlNeighborhoodCondition> conditions;
  bool all_pass = false;
};

/// Conditions (A.1)-(A.6) with S = {1..l_max}; exact sums including tails.
KlNeighborhoodReport kl_neighborhood_check(const std::vector<DiscretePmf>& fstar,
                                           const std::vector<DiscretePmf>& f,
                                           const std::vector<DiscretePmf>& ftilde, long long l_max,
                                           double eps_tilde, double u_n);

/// Continuous variant with S = [-t_s, t_s]; quadrature to 1e-8.
KlNeighborhoodReport kl_neighborhood_check(const std::vector<GaussianMixtureDensity>& fstar,
                                           const std::vector<GaussianMixtureDensity>& f,
                                           const std::vector<GaussianMixtureDensity>& ftilde,
                                           double t_s, double eps_tilde, double u_n);

}  // namespace nphmm
