#pragma once

// Small builders shared by the unit tests.

#include <vector>

#include "nphmm/hmm.hpp"
#include "nphmm/rng.hpp"

namespace th {

inline nphmm::TransitionMatrix make_q(int k, std::vector<double> entries) {
  nphmm::TransitionMatrix q;
  q.k = k;
  q.p = std::move(entries);
  return q;
}

inline nphmm::DiscretePmf pmf(std::vector<double> probs, double tail_mass = 0.0,
                              double tail_rate = 0.0) {
  nphmm::DiscretePmf f;
  f.probs = std::move(probs);
  f.tail_mass = tail_mass;
  f.tail_rate = tail_rate;
  return f;
}

inline nphmm::GaussianMixtureDensity gmix(std::vector<double> weights,
                                          std::vector<double> locations, double sigma) {
  nphmm::GaussianMixtureDensity g;
  g.weights = std::move(weights);
  g.locations = std::move(locations);
  g.sigma = sigma;
  return g;
}

inline nphmm::HmmParams discrete_params(nphmm::TransitionMatrix q,
                                        std::vector<std::vector<double>> state_probs) {
  nphmm::HmmParams theta;
  theta.Q = std::move(q);
  for (auto& probs : state_probs) theta.emissions.emplace_back(pmf(std::move(probs)));
  return theta;
}

// Row = q_floor * 1 + (1 - k q_floor) * Dirichlet(1,...,1): min entry >= q_floor
// by construction, full support otherwise.
inline nphmm::TransitionMatrix random_q(int k, double q_floor, nphmm::RandomStream& rng) {
  nphmm::TransitionMatrix q;
  q.k = k;
  q.p.resize(static_cast<std::size_t>(k) * k);
  const std::vector<double> ones(static_cast<std::size_t>(k), 1.0);
  for (int i = 0; i < k; ++i) {
    const auto u = rng.dirichlet(ones);
    for (int j = 0; j < k; ++j) q.at(i, j) = q_floor + (1.0 - k * q_floor) * u[j];
  }
  return q;
}

// Strictly positive pmf on {1..v}, no tail.
inline nphmm::DiscretePmf random_pmf(int v, nphmm::RandomStream& rng, double min_p = 0.02) {
  const std::vector<double> ones(static_cast<std::size_t>(v), 1.0);
  auto u = rng.dirichlet(ones);
  for (double& x : u) x = min_p + (1.0 - v * min_p) * x;
  return pmf(std::move(u));
}

inline nphmm::HmmParams random_discrete_params(int k, int v, double q_floor,
                                               nphmm::RandomStream& rng) {
  nphmm::HmmParams theta;
  theta.Q = random_q(k, q_floor, rng);
  for (int i = 0; i < k; ++i) theta.emissions.emplace_back(random_pmf(v, rng));
  return theta;
}

inline std::vector<double> random_symbols(int n, int v, nphmm::RandomStream& rng) {
  std::vector<double> obs(static_cast<std::size_t>(n));
  for (auto& y : obs) y = static_cast<double>(1 + rng.uniform_int(v));
  return obs;
}

}  // namespace th
