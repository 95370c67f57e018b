#include "nphmm/hmm.hpp"

#include <cmath>
#include <stdexcept>

namespace nphmm {

bool HmmParams::discrete() const {
  if (emissions.empty()) throw std::invalid_argument("HmmParams: no emissions");
  return is_discrete(emissions[0]);
}

void HmmParams::validate() const {
  Q.validate();
  if (static_cast<int>(emissions.size()) != Q.k)
    throw std::invalid_argument("HmmParams: emission count != k");
  const bool disc = is_discrete(emissions[0]);
  for (const auto& f : emissions) {
    if (is_discrete(f) != disc)
      throw std::invalid_argument("HmmParams: emissions mix discrete and continuous");
    validate_emission(f);
  }
}

FilterTrace forward_filter(const HmmParams& theta, const std::vector<double>& mu,
                           const std::vector<double>& obs) {
  theta.validate();
  const int k = theta.k();
  if (static_cast<int>(mu.size()) != k)
    throw std::invalid_argument("forward_filter: initial law has wrong length");
  FilterTrace trace;
  trace.n = static_cast<int>(obs.size());
  trace.k = k;
  trace.predictive.resize(static_cast<std::size_t>(trace.n) * k);
  std::vector<double> pred = mu;
  std::vector<double> filt(k, 0.0);
  double log_lik = 0.0;
  for (int t = 0; t < trace.n; ++t) {
    for (int i = 0; i < k; ++i) trace.predictive[static_cast<std::size_t>(t) * k + i] = pred[i];
    double step = 0.0;
    for (int i = 0; i < k; ++i) {
      filt[i] = pred[i] * density_eval(theta.emissions[i], obs[t]);
      step += filt[i];
    }
    if (!(step > 0.0))
      throw std::domain_error("forward_filter: zero likelihood at t=" + std::to_string(t + 1));
    log_lik += std::log(step);
    for (int i = 0; i < k; ++i) filt[i] /= step;
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += filt[i] * theta.Q(i, j);
      pred[j] = s;
    }
  }
  trace.log_lik = log_lik;
  return trace;
}

std::vector<double> filtered_probabilities(const HmmParams& theta, const std::vector<double>& mu,
                                           const std::vector<double>& obs) {
  const int k = theta.k();
  const int n = static_cast<int>(obs.size());
  std::vector<double> out(static_cast<std::size_t>(n) * k);
  std::vector<double> pred = mu;
  for (int t = 0; t < n; ++t) {
    double step = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = pred[i] * density_eval(theta.emissions[i], obs[t]);
      out[static_cast<std::size_t>(t) * k + i] = v;
      step += v;
    }
    if (!(step > 0.0))
      throw std::domain_error("filtered_probabilities: zero likelihood at t=" + std::to_string(t + 1));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(t) * k + i] /= step;
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += out[static_cast<std::size_t>(t) * k + i] * theta.Q(i, j);
      pred[j] = s;
    }
  }
  return out;
}

double sample_emission(const EmissionDensity& f, RandomStream& rng) {
  if (const auto* pmf = std::get_if<DiscretePmf>(&f)) {
    double u = rng.uniform();
    for (int l = 1; l <= pmf->v_max(); ++l) {
      u -= pmf->probs[static_cast<std::size_t>(l - 1)];
      if (u <= 0.0) return static_cast<double>(l);
    }
    // Tail: geometric continuation beyond V_max.
    if (pmf->tail_mass <= 0.0) return static_cast<double>(pmf->v_max());
    const double r = pmf->tail_rate;
    long long extra = 0;
    if (r > 0.0) {
      const double v = rng.uniform();
      extra = static_cast<long long>(std::floor(std::log(v) / std::log(r)));
      if (extra < 0) extra = 0;
    }
    return static_cast<double>(pmf->v_max() + 1 + extra);
  }
  const auto& mix = std::get<GaussianMixtureDensity>(f);
  const int h = rng.categorical(mix.weights);
  return mix.locations[static_cast<std::size_t>(h)] + mix.sigma * rng.normal();
}

std::pair<std::vector<int>, std::vector<double>> simulate(const HmmParams& theta, int n,
                                                          RandomStream& rng) {
  theta.validate();
  if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  const auto mu = stationary_distribution(theta.Q);
  const int k = theta.k();
  std::vector<int> states(n);
  std::vector<double> obs(n);
  std::vector<double> row(k);
  states[0] = rng.categorical(mu);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) row[j] = theta.Q(states[t - 1], j);
    states[t] = rng.categorical(row);
  }
  for (int t = 0; t < n; ++t) obs[t] = sample_emission(theta.emissions[states[t]], rng);
  return {std::move(states), std::move(obs)};
}

double joint_marginal_density(const HmmParams& theta, const std::vector<double>& mu,
                              const std::vector<double>& window) {
  const int k = theta.k();
  if (window.empty()) throw std::invalid_argument("joint_marginal_density: empty window");
  std::vector<double> alpha(k), next(k);
  for (int i = 0; i < k; ++i) alpha[i] = mu[i] * density_eval(theta.emissions[i], window[0]);
  for (std::size_t t = 1; t < window.size(); ++t) {
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += alpha[i] * theta.Q(i, j);
      next[j] = s * density_eval(theta.emissions[j], window[t]);
    }
    alpha.swap(next);
  }
  double total = 0.0;
  for (double v : alpha) total += v;
  return total;
}

double joint_marginal_density(const HmmParams& theta, const std::vector<double>& window) {
  return joint_marginal_density(theta, stationary_distribution(theta.Q), window);
}

HmmParams permute_states(const HmmParams& theta, const std::vector<int>& perm) {
  const int k = theta.k();
  if (static_cast<int>(perm.size()) != k) throw std::invalid_argument("permute_states: bad permutation");
  HmmParams out;
  out.Q.k = k;
  out.Q.p.assign(static_cast<std::size_t>(k) * k, 0.0);
  out.emissions.resize(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) out.Q.at(perm[i], perm[j]) = theta.Q(i, j);
    out.emissions[static_cast<std::size_t>(perm[i])] = theta.emissions[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace nphmm
