#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nphmm/distance.hpp"
#include "nphmm/hmm.hpp"
#include "nphmm/priors.hpp"
#include "nphmm/rng.hpp"

namespace nphmm {

enum class GibbsModel { discrete_dp, continuous_dpm };

/// Everything a chain run needs. `dp` is read for the discrete model, `dpm`
/// for the continuous one; the transition prior is shared.
struct GibbsConfig {
  GibbsModel model = GibbsModel::discrete_dp;
  int k = 2;
  QPriorSpec q_prior;
  DpDiscreteSpec dp;
  DpmGaussianSpec dpm;
  long long iterations = 5000;
  long long burn_in = 1000;
  long long thin = 4;
  std::uint64_t seed = 1;
  double mh_step = 0.3;  // lognormal random-walk scale for the sigma update

  // iterations >= burn_in >= 0 (equality gives an empty, well-formed run),
  // thin >= 1, k >= 1, and the relevant prior specs valid.
  void validate() const;
};

struct PosteriorSample {
  std::vector<HmmParams> draws;  // post burn-in, thinned
  std::vector<double> log_liks;  // stationary-start log L_n per kept draw
  std::vector<std::pair<std::string, double>> acceptance_rates;
  std::string seed_lineage;
};

/// Exact draw from P(X_{1:n} | Y_{1:n}, theta) with stationary start. The
/// backward pass runs on filtered rows.
std::vector<int> ffbs_states(const HmmParams& theta, const std::vector<double>& obs,
                             RandomStream& rng);

struct TransitionUpdate {
  TransitionMatrix Q;
  int accepted_rows = 0;
};

/// Per-row Metropolis-Hastings with Dirichlet(1 + counts_row) proposals; the
/// proposal cancels the path's multinomial factor, so acceptance is the prior
/// ratio times mu^{Q'}(x_1)/mu^Q(x_1) (the stationary start ties rows
/// together). counts is k x k row-major; first_state is x_1.
TransitionUpdate update_transition(const std::vector<long long>& counts, const QPriorSpec& prior,
                                   const TransitionMatrix& current, int first_state,
                                   RandomStream& rng);

/// Discrete model: exact conjugate draw per state from
/// DP(G + sum_{t: x_t=j} delta_{y_t}); empty states fall back to the prior.
std::vector<EmissionDensity> update_emissions(const std::vector<std::vector<double>>& assignments,
                                              const DpDiscreteSpec& spec, RandomStream& rng);

struct EmissionSweep {
  std::vector<EmissionDensity> emissions;
  int sigma_accepted = 0;
  int sigma_attempts = 0;
};

/// Continuous model: one blocked-Gibbs sweep per state (allocations, sticks,
/// locations, sigma) from the current mixtures. Every mixture must carry
/// exactly blocked_gibbs_truncation(spec) components; states with no data
/// regenerate all blocks from their prior conditionals.
EmissionSweep update_emissions(const std::vector<std::vector<double>>& assignments,
                               const DpmGaussianSpec& spec,
                               const std::vector<GaussianMixtureDensity>& current, double mh_step,
                               RandomStream& rng);

/// Truncated stick-breaking prior draw with exactly
/// blocked_gibbs_truncation(spec) components (last stick forced to 1) - the
/// representation the blocked sweep leaves invariant. Residual mass beyond
/// the truncation is below spec.trunc_eps by construction of the level.
GaussianMixtureDensity sample_tsb_mixture(const DpmGaussianSpec& spec, RandomStream& rng);

/// Prior draw of full parameters in the representation run_chain maintains.
HmmParams sample_chain_prior(const GibbsConfig& config, RandomStream& rng);

/// Systematic-scan Gibbs: FFBS -> transition rows -> emissions, repeated, with
/// theta^(0) from the prior. Deterministic given (config, obs).
PosteriorSample run_chain(const GibbsConfig& config, const std::vector<double>& obs);

struct DistanceSummary {
  double median = 0.0;
  double q90 = 0.0;
  double exceedance = 0.0;  // fraction of draws with D_ell >= threshold
  double threshold = 0.0;   // M * eps_n / q_floor
  double worst_err_bound = 0.0;
  std::vector<double> distances;  // per kept draw, chain order
};

/// Per-draw D_ell(theta^(s), theta_star) plus the Theorem-1 exceedance
/// fraction at threshold m_mult * rate.eps(n) / rate.q_floor.
DistanceSummary posterior_distance_summary(const PosteriorSample& sample,
                                           const HmmParams& theta_star, int ell, double m_mult,
                                           const RateSchedule& rate, long long n,
                                           const DistanceOptions& opt = {},
                                           RandomStream* rng = nullptr);

struct GewekeResult {
  std::vector<std::string> names;
  std::vector<double> z;
  std::vector<double> mean_marginal, se_marginal;
  std::vector<double> mean_successive, se_successive;
  long long cycles = 0;
  bool pass = false;  // all |z| <= 3
};

/// Getting-it-right check: marginal-conditional (fresh prior + data draws)
/// against successive-conditional (Gibbs cycle plus a Y | X, theta redraw)
/// means of fixed test functions of theta. Discrete: Q_11, f_1({1}), f_1({2});
/// continuous: Q_11, sigma_1, f_1(0). Successive-side standard errors use
/// batch means.
GewekeResult geweke_joint_check(const GibbsConfig& config, int n_data, long long n_cycles,
                                RandomStream& rng);

/// Linear-interpolation quantile of a sample (p in [0,1]).
double sample_quantile(std::vector<double> values, double p);

}  // namespace nphmm
