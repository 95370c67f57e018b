#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "nphmm/hmm.hpp"
#include "oracles.hpp"

using namespace nphmm;

namespace {

HmmParams example_theta() {
  return th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                             {{0.5, 0.3, 0.2}, {0.1, 0.3, 0.6}});
}

}  // namespace

TEST_SUITE("hmm") {

TEST_CASE("params validation") {
  example_theta().validate();
  HmmParams bad = example_theta();
  bad.emissions.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  HmmParams mixed = example_theta();
  mixed.emissions[1] = th::gmix({1.0}, {0.0}, 1.0);
  CHECK_THROWS_AS(mixed.validate(), std::invalid_argument);
}

TEST_CASE("simulate: degenerate single state") {
  HmmParams theta;
  theta.Q = th::make_q(1, {1.0});
  theta.emissions.emplace_back(th::pmf({0.4, 0.6}));
  RandomStream rng(401);
  const auto [states, obs] = simulate(theta, 200, rng);
  for (int x : states) CHECK(x == 0);
  CHECK(obs.size() == 200);
}

TEST_CASE("simulate: identical emissions reduce to iid draws from f1") {
  HmmParams theta = th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                                        {{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  RandomStream rng(402);
  const int n = 100000;
  const auto [states, obs] = simulate(theta, n, rng);
  double counts[3] = {0, 0, 0};
  for (double y : obs) ++counts[static_cast<int>(y) - 1];
  const double probs[3] = {0.5, 0.3, 0.2};
  double chi2 = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double e = probs[j] * n;
    chi2 += (counts[j] - e) * (counts[j] - e) / e;
  }
  CHECK(chi2 < 9.21);  // chi-square(2), 99%
}

TEST_CASE("simulate: stationary state frequencies") {
  HmmParams theta = example_theta();
  RandomStream rng(403);
  const int n = 1000000;
  const auto [states, obs] = simulate(theta, n, rng);
  double freq1 = 0.0;
  for (int x : states) freq1 += x == 0;
  freq1 /= n;
  // chain autocorrelation (second eigenvalue 0.3) inflates the binomial sd
  const double sd = std::sqrt(4.0 / 7.0 * 3.0 / 7.0 * (1.3 / 0.7) / n);
  CHECK(std::abs(freq1 - 4.0 / 7.0) < 3.0 * sd);
}

TEST_CASE("forward filter: uninformative emissions keep rows at mu") {
  HmmParams theta = th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                                        {{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const auto mu = stationary_distribution(theta.Q);
  const std::vector<double> obs = {1, 3, 2, 2, 1, 3, 1};
  const FilterTrace trace = forward_filter(theta, mu, obs);
  for (int t = 0; t < trace.n; ++t)
    for (int i = 0; i < 2; ++i) CHECK(std::abs(trace.pred(t, i) - mu[i]) <= 1e-12);
}

TEST_CASE("forward filter: log-lik equals the 2^5 path enumeration") {
  HmmParams theta = example_theta();
  const auto mu = stationary_distribution(theta.Q);
  const std::vector<double> obs = {1, 2, 3, 3, 1};
  const FilterTrace trace = forward_filter(theta, mu, obs);
  CHECK(std::abs(trace.log_lik - oracle::log_lik(theta, mu, obs)) <= 1e-10);
}

TEST_CASE("forward filter: predictive rows are floored at q from t >= 2") {
  RandomStream rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    const HmmParams theta = th::random_discrete_params(2, 3, 0.2, rng);
    const auto mu = stationary_distribution(theta.Q);
    const auto obs = th::random_symbols(40, 3, rng);
    const FilterTrace trace = forward_filter(theta, mu, obs);
    for (int t = 1; t < trace.n; ++t) {
      double row_sum = 0.0;
      for (int i = 0; i < 2; ++i) {
        CHECK(trace.pred(t, i) >= 0.2 - 1e-12);
        row_sum += trace.pred(t, i);
      }
      CHECK(std::abs(row_sum - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("forward filter: zero predictive likelihood throws") {
  HmmParams theta = th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                                        {{1.0, 0.0}, {1.0, 0.0}});
  const auto mu = stationary_distribution(theta.Q);
  CHECK_THROWS_AS(forward_filter(theta, mu, {1, 2}), std::domain_error);
}

TEST_CASE("filtered probabilities are normalized and consistent with the trace") {
  HmmParams theta = example_theta();
  const auto mu = stationary_distribution(theta.Q);
  const std::vector<double> obs = {2, 1, 3, 2};
  const auto filt = filtered_probabilities(theta, mu, obs);
  REQUIRE(filt.size() == obs.size() * 2);
  const FilterTrace trace = forward_filter(theta, mu, obs);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    CHECK(std::abs(filt[t * 2] + filt[t * 2 + 1] - 1.0) <= 1e-12);
    // filtered row t propagated through Q must give the next predictive row
    if (t + 1 < obs.size()) {
      for (int j = 0; j < 2; ++j) {
        const double prop = filt[t * 2] * theta.Q(0, j) + filt[t * 2 + 1] * theta.Q(1, j);
        CHECK(std::abs(prop - trace.pred(static_cast<int>(t) + 1, j)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("joint marginal: one-step mixture formula") {
  HmmParams theta = th::discrete_params(th::make_q(2, {0.5, 0.5, 0.5, 0.5}),
                                        {{0.8, 0.2}, {0.2, 0.8}});
  // mu = [0.5, 0.5]: p_1(1) = 0.5 * 0.8 + 0.5 * 0.2
  CHECK(joint_marginal_density(theta, {1.0}) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("joint marginal: windows of length 2 sum to 1") {
  RandomStream rng(405);
  for (int trial = 0; trial < 10; ++trial) {
    const HmmParams theta = th::random_discrete_params(2, 4, 0.1, rng);
    double total = 0.0;
    oracle::for_each_window(4, 2, [&](const std::vector<double>& w) {
      total += joint_marginal_density(theta, w);
    });
    CHECK(std::abs(total - 1.0) <= 1e-10);
  }
}

TEST_CASE("joint marginal: three-step window matches the path enumeration") {
  HmmParams theta = example_theta();
  const auto mu = stationary_distribution(theta.Q);
  const std::vector<double> window = {2, 1, 3};
  CHECK(std::abs(joint_marginal_density(theta, window) -
                 oracle::window_prob(theta, mu, window)) <= 1e-12);
}

TEST_CASE("joint marginal: continuous window integrates to 1") {
  HmmParams theta;
  theta.Q = th::make_q(2, {0.7, 0.3, 0.4, 0.6});
  theta.emissions = {EmissionDensity(th::gmix({1.0}, {-2.0}, 1.0)),
                     EmissionDensity(th::gmix({1.0}, {2.0}, 1.0))};
  // ell = 1
  const double mass1 = oracle::simpson(
      [&](double y) { return joint_marginal_density(theta, {y}); }, -12.0, 12.0, 2000);
  CHECK(mass1 == doctest::Approx(1.0).epsilon(1e-6));
  // ell = 2 tensor Simpson
  const double mass2 = oracle::simpson(
      [&](double y1) {
        return oracle::simpson(
            [&](double y2) { return joint_marginal_density(theta, {y1, y2}); }, -12.0, 12.0, 200);
      },
      -12.0, 12.0, 200);
  CHECK(mass2 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("state relabeling leaves the observed law invariant") {
  HmmParams theta = example_theta();
  const HmmParams swapped = permute_states(theta, {1, 0});
  const auto mu = stationary_distribution(theta.Q);
  const auto mu2 = stationary_distribution(swapped.Q);
  const std::vector<double> obs = {1, 3, 2, 1, 2};
  CHECK(forward_filter(theta, mu, obs).log_lik ==
        doctest::Approx(forward_filter(swapped, mu2, obs).log_lik).epsilon(1e-12));
  oracle::for_each_window(3, 2, [&](const std::vector<double>& w) {
    CHECK(std::abs(joint_marginal_density(theta, w) - joint_marginal_density(swapped, w)) <=
          1e-12);
  });
}

}  // TEST_SUITE
