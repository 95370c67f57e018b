#include "nphmm/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace nphmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_draw(const HmmParams& theta) {
  theta.Q.validate();
  for (const auto& f : theta.emissions) validate_emission(f);
}

double log_stationary_at(const TransitionMatrix& q, int state) {
  return std::log(stationary_distribution(q)[state]);
}

// Unnormalized log InverseGamma(shape, scale) density at sigma.
double log_inv_gamma(double sigma, double shape, double scale) {
  if (!(sigma > 0.0)) return -kInf;
  return -(shape + 1.0) * std::log(sigma) - scale / sigma;
}

}  // namespace

void GibbsConfig::validate() const {
  if (k < 1) throw std::invalid_argument("GibbsConfig: k must be positive");
  if (burn_in < 0 || iterations < burn_in)
    throw std::invalid_argument("GibbsConfig: need iterations >= burn_in >= 0");
  if (thin < 1) throw std::invalid_argument("GibbsConfig: thin must be >= 1");
  if (!(mh_step > 0.0)) throw std::invalid_argument("GibbsConfig: mh_step must be positive");
  q_prior.validate(k);
  if (model == GibbsModel::discrete_dp)
    dp.validate();
  else
    dpm.validate();
}

std::vector<int> ffbs_states(const HmmParams& theta, const std::vector<double>& obs,
                             RandomStream& rng) {
  const int k = theta.k();
  const int n = static_cast<int>(obs.size());
  if (n == 0) return {};
  const auto mu = stationary_distribution(theta.Q);
  const auto filt = filtered_probabilities(theta, mu, obs);
  std::vector<int> x(n);
  std::vector<double> w(k);
  for (int i = 0; i < k; ++i) w[i] = filt[static_cast<std::size_t>(n - 1) * k + i];
  x[n - 1] = rng.categorical(w);
  for (int t = n - 2; t >= 0; --t) {
    for (int i = 0; i < k; ++i)
      w[i] = filt[static_cast<std::size_t>(t) * k + i] * theta.Q(i, x[t + 1]);
    x[t] = rng.categorical(w);
  }
  return x;
}

TransitionUpdate update_transition(const std::vector<long long>& counts, const QPriorSpec& prior,
                                   const TransitionMatrix& current, int first_state,
                                   RandomStream& rng) {
  const int k = current.k;
  prior.validate(k);
  if (static_cast<int>(counts.size()) != k * k)
    throw std::invalid_argument("update_transition: counts must be k x k");
  if (first_state < 0 || first_state >= k)
    throw std::invalid_argument("update_transition: first_state out of range");
  TransitionUpdate out;
  out.Q = current;
  double log_mu_cur = log_stationary_at(out.Q, first_state);
  std::vector<double> alpha(k), old_row(k);
  for (int r = 0; r < k; ++r) {
    for (int j = 0; j < k; ++j) {
      alpha[j] = 1.0 + static_cast<double>(counts[static_cast<std::size_t>(r) * k + j]);
      old_row[j] = out.Q(r, j);
    }
    const auto prop = rng.dirichlet(alpha);
    const double lp_new = log_row_density(prior, prop);
    if (!std::isfinite(lp_new)) continue;  // outside the prior support
    const double lp_old = log_row_density(prior, old_row);
    TransitionMatrix cand = out.Q;
    for (int j = 0; j < k; ++j) cand.p[static_cast<std::size_t>(r) * k + j] = prop[j];
    const double log_mu_new = log_stationary_at(cand, first_state);
    const double log_acc = lp_new - lp_old + log_mu_new - log_mu_cur;
    if (std::log(rng.uniform()) < log_acc) {
      out.Q = cand;
      log_mu_cur = log_mu_new;
      ++out.accepted_rows;
    }
  }
  return out;
}

std::vector<EmissionDensity> update_emissions(const std::vector<std::vector<double>>& assignments,
                                              const DpDiscreteSpec& spec, RandomStream& rng) {
  std::vector<EmissionDensity> out;
  out.reserve(assignments.size());
  for (const auto& ys : assignments) {
    std::map<long long, long long> tab;
    for (double y : ys) {
      const long long cell = std::llround(y);
      if (cell < 1 || std::abs(y - static_cast<double>(cell)) > 1e-9)
        throw std::invalid_argument("update_emissions: discrete observations must be integers >= 1");
      ++tab[cell];
    }
    std::vector<std::pair<long long, long long>> counts(tab.begin(), tab.end());
    out.emplace_back(sample_dp_posterior(spec, counts, rng));
  }
  return out;
}

EmissionSweep update_emissions(const std::vector<std::vector<double>>& assignments,
                               const DpmGaussianSpec& spec,
                               const std::vector<GaussianMixtureDensity>& current, double mh_step,
                               RandomStream& rng) {
  spec.validate();
  if (!(mh_step > 0.0)) throw std::invalid_argument("update_emissions: mh_step must be positive");
  if (assignments.size() != current.size())
    throw std::invalid_argument("update_emissions: one observation set per state required");
  const int h_eff = blocked_gibbs_truncation(spec);
  EmissionSweep out;
  out.emissions.reserve(current.size());
  for (std::size_t j = 0; j < current.size(); ++j) {
    const auto& mix = current[j];
    if (static_cast<int>(mix.weights.size()) != h_eff)
      throw std::invalid_argument(
          "update_emissions: mixture truncation does not match blocked_gibbs_truncation");
    const auto& y = assignments[j];
    const int m = static_cast<int>(y.size());
    GaussianMixtureDensity next = mix;

    // Allocations against the incoming mixture.
    std::vector<int> alloc(m);
    std::vector<long long> n_h(h_eff, 0);
    std::vector<double> s_h(h_eff, 0.0), w(h_eff), d2(h_eff);
    for (int t = 0; t < m; ++t) {
      double d2_min = kInf;
      for (int h = 0; h < h_eff; ++h) {
        const double z = (y[t] - mix.locations[h]) / mix.sigma;
        d2[h] = 0.5 * z * z;
        d2_min = std::min(d2_min, d2[h]);
      }
      for (int h = 0; h < h_eff; ++h) w[h] = mix.weights[h] * std::exp(-(d2[h] - d2_min));
      const int h_star = rng.categorical(w);
      alloc[t] = h_star;
      ++n_h[h_star];
      s_h[h_star] += y[t];
    }

    // Sticks: Beta(1 + n_h, M + observations beyond h); last stick pinned.
    double rem = 1.0;
    long long beyond = m;
    for (int h = 0; h < h_eff; ++h) {
      beyond -= n_h[h];
      const double v = (h == h_eff - 1)
                           ? 1.0
                           : rng.beta(1.0 + static_cast<double>(n_h[h]),
                                      spec.concentration + static_cast<double>(beyond));
      next.weights[h] = rem * v;
      rem *= (1.0 - v);
    }

    // Locations: Gaussian conjugacy at the incoming sigma.
    const double base_prec = 1.0 / (spec.base_scale * spec.base_scale);
    const double obs_prec = 1.0 / (mix.sigma * mix.sigma);
    for (int h = 0; h < h_eff; ++h) {
      const double prec = base_prec + static_cast<double>(n_h[h]) * obs_prec;
      const double mean = s_h[h] * obs_prec / prec;
      next.locations[h] = mean + rng.normal() / std::sqrt(prec);
    }

    // Sigma: direct prior draw when the state is empty (the likelihood drops
    // out of the conditional), lognormal random-walk MH otherwise.
    if (m == 0) {
      next.sigma = rng.inverse_gamma(spec.sigma_shape, spec.sigma_scale);
    } else {
      ++out.sigma_attempts;
      const auto log_lik = [&](double sigma) {
        double s = -static_cast<double>(m) * std::log(sigma);
        const double half_prec = 0.5 / (sigma * sigma);
        for (int t = 0; t < m; ++t) {
          const double d = y[t] - next.locations[alloc[t]];
          s -= half_prec * d * d;
        }
        return s;
      };
      const double sigma_prop = mix.sigma * std::exp(mh_step * rng.normal());
      const double log_acc = log_lik(sigma_prop) - log_lik(mix.sigma) +
                             log_inv_gamma(sigma_prop, spec.sigma_shape, spec.sigma_scale) -
                             log_inv_gamma(mix.sigma, spec.sigma_shape, spec.sigma_scale) +
                             std::log(sigma_prop) - std::log(mix.sigma);
      if (std::log(rng.uniform()) < log_acc) {
        next.sigma = sigma_prop;
        ++out.sigma_accepted;
      }
    }
    out.emissions.emplace_back(std::move(next));
  }
  return out;
}

GaussianMixtureDensity sample_tsb_mixture(const DpmGaussianSpec& spec, RandomStream& rng) {
  spec.validate();
  const int h_eff = blocked_gibbs_truncation(spec);
  GaussianMixtureDensity mix;
  mix.weights.resize(h_eff);
  mix.locations.resize(h_eff);
  mix.sigma = rng.inverse_gamma(spec.sigma_shape, spec.sigma_scale);
  double rem = 1.0;
  for (int h = 0; h < h_eff; ++h) {
    const double v = (h == h_eff - 1) ? 1.0 : rng.beta(1.0, spec.concentration);
    mix.weights[h] = rem * v;
    rem *= (1.0 - v);
    mix.locations[h] = spec.base_scale * rng.normal();
  }
  return mix;
}

HmmParams sample_chain_prior(const GibbsConfig& config, RandomStream& rng) {
  HmmParams theta;
  theta.Q = sample_transition_prior(config.q_prior, config.k, rng);
  theta.emissions.reserve(config.k);
  for (int j = 0; j < config.k; ++j) {
    if (config.model == GibbsModel::discrete_dp)
      theta.emissions.emplace_back(sample_dp_discrete(config.dp, rng));
    else
      theta.emissions.emplace_back(sample_tsb_mixture(config.dpm, rng));
  }
  return theta;
}

namespace {

// One systematic-scan cycle: hidden path, transition rows, emissions. Returns
// the sampled path for callers that need it (Geweke redraws Y from it).
std::vector<int> gibbs_cycle(HmmParams& theta, const GibbsConfig& config,
                             const std::vector<double>& obs, RandomStream& rng,
                             long long* q_accepted, long long* sigma_accepted,
                             long long* sigma_attempts) {
  const int k = config.k;
  const auto x = ffbs_states(theta, obs, rng);
  std::vector<long long> counts(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t t = 0; t + 1 < x.size(); ++t)
    ++counts[static_cast<std::size_t>(x[t]) * k + x[t + 1]];
  const auto tu = update_transition(counts, config.q_prior, theta.Q, x[0], rng);
  theta.Q = tu.Q;
  *q_accepted += tu.accepted_rows;

  std::vector<std::vector<double>> assign(k);
  for (std::size_t t = 0; t < x.size(); ++t) assign[x[t]].push_back(obs[t]);
  if (config.model == GibbsModel::discrete_dp) {
    theta.emissions = update_emissions(assign, config.dp, rng);
  } else {
    std::vector<GaussianMixtureDensity> cur;
    cur.reserve(k);
    for (const auto& f : theta.emissions) cur.push_back(std::get<GaussianMixtureDensity>(f));
    auto sweep = update_emissions(assign, config.dpm, cur, config.mh_step, rng);
    theta.emissions.assign(sweep.emissions.begin(), sweep.emissions.end());
    *sigma_accepted += sweep.sigma_accepted;
    *sigma_attempts += sweep.sigma_attempts;
  }
  return x;
}

}  // namespace

PosteriorSample run_chain(const GibbsConfig& config, const std::vector<double>& obs) {
  config.validate();
  if (obs.empty()) throw std::invalid_argument("run_chain: observations required");
  RandomStream root(config.seed);
  PosteriorSample out;
  out.seed_lineage = root.lineage();
  auto init = root.substream(0);
  HmmParams theta = sample_chain_prior(config, init);
  long long q_accepted = 0, sigma_accepted = 0, sigma_attempts = 0;
  for (long long it = 0; it < config.iterations; ++it) {
    auto step = root.substream(static_cast<std::uint64_t>(it) + 1);
    try {
      gibbs_cycle(theta, config, obs, step, &q_accepted, &sigma_accepted, &sigma_attempts);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_chain: iteration " + std::to_string(it) + " (stream " +
                               step.lineage() + "): " + e.what());
    }
    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      validate_draw(theta);
      out.draws.push_back(theta);
      out.log_liks.push_back(
          forward_filter(theta, stationary_distribution(theta.Q), obs).log_lik);
    }
  }
  const double q_att = static_cast<double>(config.iterations) * config.k;
  out.acceptance_rates.emplace_back("transition_rows",
                                    q_att > 0 ? static_cast<double>(q_accepted) / q_att : 0.0);
  if (config.model == GibbsModel::continuous_dpm)
    out.acceptance_rates.emplace_back(
        "sigma", sigma_attempts > 0 ? static_cast<double>(sigma_accepted) / sigma_attempts : 0.0);
  return out;
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty sample");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

DistanceSummary posterior_distance_summary(const PosteriorSample& sample,
                                           const HmmParams& theta_star, int ell, double m_mult,
                                           const RateSchedule& rate, long long n,
                                           const DistanceOptions& opt, RandomStream* rng) {
  if (sample.draws.empty())
    throw std::invalid_argument("posterior_distance_summary: empty sample");
  if (!(m_mult > 0.0))
    throw std::invalid_argument("posterior_distance_summary: threshold multiplier must be positive");
  DistanceSummary s;
  s.threshold = m_mult * rate.eps(n) / rate.q_floor;
  s.distances.reserve(sample.draws.size());
  long long above = 0;
  for (const auto& draw : sample.draws) {
    const auto rep = d_ell(draw, theta_star, ell, DivMethod::automatic, rng, opt);
    s.distances.push_back(rep.value);
    s.worst_err_bound = std::max(s.worst_err_bound, rep.err_bound);
    if (rep.value >= s.threshold) ++above;
  }
  s.median = sample_quantile(s.distances, 0.5);
  s.q90 = sample_quantile(s.distances, 0.9);
  s.exceedance = static_cast<double>(above) / static_cast<double>(s.distances.size());
  return s;
}

namespace {

std::array<double, 3> geweke_stats(const HmmParams& theta, bool discrete) {
  std::array<double, 3> s{};
  s[0] = theta.Q(0, 0);
  if (discrete) {
    const auto& pmf = std::get<DiscretePmf>(theta.emissions[0]);
    s[1] = pmf.at(1);
    s[2] = pmf.at(2);
  } else {
    const auto& mix = std::get<GaussianMixtureDensity>(theta.emissions[0]);
    s[1] = mix.sigma;
    s[2] = mix.at(0.0);
  }
  return s;
}

void mean_and_iid_se(const std::vector<double>& xs, double* mean, double* se) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  *mean = m;
  *se = std::sqrt(ss / (n - 1.0) / n);
}

// Batch-means standard error for an autocorrelated sequence: sqrt(n) batches
// of sqrt(n) values, remainder dropped.
void mean_and_batch_se(const std::vector<double>& xs, double* mean, double* se) {
  const std::size_t n = xs.size();
  const std::size_t b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t nb = n / b;
  std::vector<double> bm(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t t = 0; t < b; ++t) bm[i] += xs[i * b + t];
    bm[i] /= static_cast<double>(b);
  }
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : bm) ss += (x - m) * (x - m);
  *mean = m;
  *se = std::sqrt(ss / (static_cast<double>(nb) - 1.0) / static_cast<double>(nb));
}

}  // namespace

GewekeResult geweke_joint_check(const GibbsConfig& config, int n_data, long long n_cycles,
                                RandomStream& rng) {
  config.validate();
  if (n_data < 1) throw std::invalid_argument("geweke_joint_check: n_data must be >= 1");
  if (n_cycles < 100) throw std::invalid_argument("geweke_joint_check: need >= 100 cycles");
  const bool discrete = config.model == GibbsModel::discrete_dp;
  GewekeResult res;
  res.cycles = n_cycles;
  res.names = discrete ? std::vector<std::string>{"Q11", "f1_mass_at_1", "f1_mass_at_2"}
                       : std::vector<std::string>{"Q11", "sigma_1", "f1_density_at_0"};

  std::vector<std::vector<double>> mc(3), sc(3);
  for (auto& v : mc) v.reserve(n_cycles);
  for (auto& v : sc) v.reserve(n_cycles);

  auto mc_master = rng.substream(1);
  for (long long c = 0; c < n_cycles; ++c) {
    auto s = mc_master.substream(static_cast<std::uint64_t>(c));
    const auto theta = sample_chain_prior(config, s);
    const auto stats = geweke_stats(theta, discrete);
    for (int i = 0; i < 3; ++i) mc[i].push_back(stats[i]);
  }

  auto sc_stream = rng.substream(2);
  HmmParams theta = sample_chain_prior(config, sc_stream);
  auto sim = simulate(theta, n_data, sc_stream);
  std::vector<double> obs = sim.second;
  long long qa = 0, sa = 0, satt = 0;
  for (long long c = 0; c < n_cycles; ++c) {
    const auto x = gibbs_cycle(theta, config, obs, sc_stream, &qa, &sa, &satt);
    for (int t = 0; t < n_data; ++t) obs[t] = sample_emission(theta.emissions[x[t]], sc_stream);
    const auto stats = geweke_stats(theta, discrete);
    for (int i = 0; i < 3; ++i) sc[i].push_back(stats[i]);
  }

  res.pass = true;
  for (int i = 0; i < 3; ++i) {
    double m1, se1, m2, se2;
    mean_and_iid_se(mc[i], &m1, &se1);
    mean_and_batch_se(sc[i], &m2, &se2);
    const double z = (m1 - m2) / std::sqrt(se1 * se1 + se2 * se2);
    res.mean_marginal.push_back(m1);
    res.se_marginal.push_back(se1);
    res.mean_successive.push_back(m2);
    res.se_successive.push_back(se2);
    res.z.push_back(z);
    if (!(std::abs(z) <= 3.0)) res.pass = false;
  }
  return res;
}

}  // namespace nphmm
