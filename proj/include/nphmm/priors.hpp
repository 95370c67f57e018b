#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nphmm/emission.hpp"
#include "nphmm/rng.hpp"
#include "nphmm/transition.hpp"

namespace nphmm {

// Transition priors. Row densities w.r.t. Lebesgue measure on the simplex:
//   Q1: pi(u) proportional to prod_i exp(-alpha_i / u_i)
//   Q2: pi(u) proportional to prod_i exp(-beta_i * exp(u_i^{-alpha_i}))
//   Q3: uniform on the floored simplex {u : min_i u_i >= q}
enum class QPriorVariant { q1_exponential, q2_double_exponential, q3_truncated };

struct QPriorSpec {
  QPriorVariant variant = QPriorVariant::q3_truncated;
  std::vector<double> alpha;  // within-row parameters, broadcast if size 1
  std::vector<double> beta;
  double floor_q = 0.2;
  long long rejection_budget = 1000000;

  void validate(int k) const;
  double alpha_at(int i) const;
  double beta_at(int i) const;
};

std::string q_prior_variant_name(QPriorVariant v);

// Unnormalized log density of one row / of the whole matrix (product of rows).
double log_row_density(const QPriorSpec& spec, const std::vector<double>& row);
double log_transition_density(const QPriorSpec& spec, const TransitionMatrix& q);

std::vector<double> sample_prior_row(const QPriorSpec& spec, int k, RandomStream& rng);
TransitionMatrix sample_transition_prior(const QPriorSpec& spec, int k, RandomStream& rng);

// DP prior on pmfs over N with base measure G(l) = c0 * l^{-alpha_g},
// truncated stick-breaking; the post-stop residual is folded back as a
// G-proportional smear so draws keep positive mass everywhere.
struct DpDiscreteSpec {
  double c0 = 1.0;
  double alpha_g = 2.0;
  int trunc_h = 100;
  double trunc_eps = 1e-6;
  long long dense_cap = 1000;  // cells stored densely; heavier atoms fold into the tail

  double g_at(long long l) const;
  double total_mass() const;
  double mass_through(long long l) const;  // G({1,...,l})
  void validate() const;
};

struct DpDrawInfo {
  double residual = 0.0;  // stick mass left when the stopping rule fired
  int sticks = 0;
};

DiscretePmf sample_dp_discrete(const DpDiscreteSpec& spec, RandomStream& rng,
                               DpDrawInfo* info = nullptr);

// Conjugate posterior draw from DP(G + sum_i c_i delta_{y_i}) given distinct
// observed values with counts; exact on the observed cells via the Dirichlet
// partition property, stick-breaking on the rest.
DiscretePmf sample_dp_posterior(const DpDiscreteSpec& spec,
                                const std::vector<std::pair<long long, long long>>& counts,
                                RandomStream& rng, DpDrawInfo* info = nullptr);

// DPM-Gaussian prior: sigma ~ InverseGamma(shape, scale), locations from
// N(0, base_scale^2), weights by truncated stick-breaking with the last
// component absorbing the residual.
struct DpmGaussianSpec {
  double base_scale = 2.0;
  double concentration = 1.0;
  double sigma_shape = 2.0;
  double sigma_scale = 1.0;
  int trunc_h = 100;
  double trunc_eps = 1e-6;

  void validate() const;
};

GaussianMixtureDensity sample_dpm_gaussian(const DpmGaussianSpec& spec, RandomStream& rng,
                                           DpDrawInfo* info = nullptr);

// Fixed truncation level used by the blocked Gibbs sweep (conjugacy needs a
// fixed number of sticks).
int blocked_gibbs_truncation(const DpmGaussianSpec& spec);

// Monte Carlo estimate of Pi_Q((Delta_k^k(q))^c) on a grid of floors.
struct QTailEstimate {
  std::vector<double> q_grid;
  std::vector<double> prob;  // isotonic-smoothed, nondecreasing in q
  std::vector<double> raw;
  std::vector<double> se;
};

QTailEstimate prior_q_tail_estimate(const QPriorSpec& spec, int k, std::vector<double> q_grid,
                                    long long n_mc, RandomStream& rng);

// Fraction of joint prior draws (f_1,...,f_k) inside the (A.1)-(A.6)
// neighborhood of fstar, with S = {1..L} (or [-T,T]) chosen from the truth
// tails and ftilde = f.
struct PriorMassEstimate {
  long long hits = 0;
  long long n_mc = 0;
  double fraction = 0.0;
  double log_estimate = 0.0;
  double se_log = 0.0;
  bool lower_bound_only = false;  // zero hits: estimate is only "< 1/n_mc"
  double s_boundary = 0.0;        // L (discrete) or T (continuous)
  std::string display;
};

PriorMassEstimate prior_mass_kl_neighborhood(const DpDiscreteSpec& spec,
                                             const std::vector<DiscretePmf>& fstar,
                                             double eps_tilde, double u_n, long long n_mc,
                                             RandomStream& rng);
PriorMassEstimate prior_mass_kl_neighborhood(const DpmGaussianSpec& spec,
                                             const std::vector<GaussianMixtureDensity>& fstar,
                                             double eps_tilde, double u_n, long long n_mc,
                                             RandomStream& rng);

// Pool-adjacent-violators, nondecreasing fit.
std::vector<double> isotonic_nondecreasing(std::vector<double> values);

// Rate sequences driving the concentration experiments:
//   eps_tilde(n) = n^{-exponent} (log n)^{t0}
//   eps(n)       = n^{-exponent} (log n)^{t}
//   u(n)         = (log n)^{3/2} if polylog_u, else 1
// The posterior threshold at sample size n is m_mult * eps(n) / q_floor.
struct RateSchedule {
  double exponent = 0.5;
  double t0 = 1.0;
  double t = 4.5;
  bool polylog_u = true;
  double m_mult = 1.0;
  double q_floor = 0.2;

  double eps_tilde(long long n) const;
  double eps(long long n) const;
  double u(long long n) const;
  double threshold(long long n) const;
  // Checks eps_tilde <= eps pointwise and n * eps_tilde(n)^2 strictly
  // increasing over the grid; throws on violation.
  void validate_grid(const std::vector<long long>& n_grid) const;
};

}  // namespace nphmm
