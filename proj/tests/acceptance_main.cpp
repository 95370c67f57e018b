// Acceptance gate: one self-contained check per shipped guarantee, one
// PASS/FAIL line each. Exit status is nonzero iff any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "nphmm/distance.hpp"
#include "nphmm/json_io.hpp"
#include "nphmm/rate.hpp"
#include "nphmm/sampler.hpp"
#include "nphmm/theory.hpp"
#include "oracles.hpp"

using namespace nphmm;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

HmmParams random_instance(int k, int v, RandomStream& rng, double q_floor = 0.05) {
  return th::random_discrete_params(k, v, q_floor, rng);
}

std::vector<double> random_law(int k, RandomStream& rng) {
  return rng.dirichlet(std::vector<double>(static_cast<std::size_t>(k), 1.0));
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / x.size();
    my += y[i] / y.size();
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

// 1. forward log-likelihood against brute-force path enumeration
Outcome c1_filter_path() {
  RandomStream rng(9101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    const int v = 2 + static_cast<int>(rng.uniform_int(3));
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    const HmmParams theta = random_instance(k, v, rng);
    const auto obs = th::random_symbols(n, v, rng);
    const auto mu = stationary_distribution(theta.Q);
    const double err =
        std::abs(forward_filter(theta, mu, obs).log_lik - oracle::log_lik(theta, mu, obs));
    worst = std::max(worst, err);
  }
  return {worst <= 1e-10, fmt("max |log-lik gap| %.2e over 100 instances", worst)};
}

// 2. filter forgetting under 2 rho^{t-1}
Outcome c2_forgetting() {
  RandomStream rng(9102);
  double worst = 1e300;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(2));
    const double q = 0.05 + 0.25 * rng.uniform();
    const HmmParams theta = th::random_discrete_params(k, 4, q, rng);
    const auto mu = random_law(k, rng);
    const auto mu2 = random_law(k, rng);
    const auto obs = th::random_symbols(50, 4, rng);
    const BoundReport rep = filter_forgetting_check(theta, mu, mu2, obs);
    worst = std::min(worst, rep.worst_margin);
  }
  return {worst >= -1e-10, fmt("worst margin %.2e over 200 trials", worst)};
}

// 3. predictive floor at t >= 2 plus TV mixing under (1-q)^m
Outcome c3_floor_mixing() {
  RandomStream rng(9103);
  double floor_margin = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(2));
    const double q = 0.05 + 0.25 * rng.uniform();
    const HmmParams theta = th::random_discrete_params(k, 4, q, rng);
    const auto mu = random_law(k, rng);
    const auto obs = th::random_symbols(30, 4, rng);
    const FilterTrace trace = forward_filter(theta, mu, obs);
    const double qmin = theta.Q.min_entry();
    for (int t = 1; t < trace.n; ++t)
      for (int i = 0; i < k; ++i) floor_margin = std::min(floor_margin, trace.pred(t, i) - qmin);
  }
  double mix_margin = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(3));
    const double q = 0.05 + 0.25 * rng.uniform();
    const MixingReport rep = tv_mixing_check(th::random_q(k, q, rng), 100);
    mix_margin = std::min(mix_margin, rep.worst_margin);
  }
  return {floor_margin >= -1e-12 && mix_margin >= 0.0,
          fmt("floor margin %.2e, mixing margin %.2e", floor_margin, mix_margin)};
}

// 4. sum ratio bound on nonnegative tuples
Outcome c4_ratio() {
  RandomStream rng(9104);
  long long violations = 0;
  double worst = 1e300;
  for (int trial = 0; trial < 10000; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform_int(6));
    std::vector<double> a(dim), b(dim), c(dim), d(dim);
    for (int i = 0; i < dim; ++i) {
      a[i] = rng.uniform() < 0.15 ? 0.0 : rng.uniform();
      b[i] = rng.uniform() < 0.15 ? 0.0 : rng.uniform();
      c[i] = 0.01 + rng.uniform();
      d[i] = 0.01 + rng.uniform();
    }
    const BoundReport rep = ratio_bound_check(a, b, c, d);
    worst = std::min(worst, rep.worst_margin);
    if (rep.worst_margin < -1e-12) ++violations;
  }
  return {violations == 0,
          fmt("%g violations in 10^4 tuples, worst margin %.2e", static_cast<double>(violations), worst)};
}

// 5. KL path structure: MC agreement, iid additivity, local quadratic, C_K cap
Outcome c5_kl() {
  RandomStream rng(9105);
  // (a) exact vs chain-rule MC, 3 SE, 20 instances
  int mc_fail = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(2));
    const int v = 2 + static_cast<int>(rng.uniform_int(3));
    const HmmParams star = random_instance(k, v, rng);
    const HmmParams other = random_instance(k, v, rng);
    const DivergenceReport exact = kl_path(star, other, 4, DivMethod::exact_enumeration);
    KlOptions opt;
    opt.mc_sequences = 20000;
    const DivergenceReport mc = kl_path(star, other, 4, DivMethod::chain_rule, &rng, opt);
    if (std::abs(exact.value - mc.value) > 3.0 * mc.mc_se + 1e-12) ++mc_fail;
  }
  // (b) iid reduction: identical rows make KL additive in n
  double add_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto row = random_law(2, rng);
    const auto row2 = random_law(2, rng);
    HmmParams star, other;
    star.Q = th::make_q(2, {row[0], row[1], row[0], row[1]});
    other.Q = th::make_q(2, {row2[0], row2[1], row2[0], row2[1]});
    for (int i = 0; i < 2; ++i) {
      star.emissions.emplace_back(th::random_pmf(3, rng));
      other.emissions.emplace_back(th::random_pmf(3, rng));
    }
    const double kl1 = kl_path(star, other, 1, DivMethod::exact_enumeration).value;
    for (int n = 2; n <= 6; ++n) {
      const double kln = kl_path(star, other, n, DivMethod::exact_enumeration).value;
      add_err = std::max(add_err, std::abs(kln - n * kl1));
    }
  }
  // (c) local quadratic exponent in eps
  const HmmParams base = th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                                             {{0.5, 0.3, 0.2}, {0.1, 0.3, 0.6}});
  std::vector<double> lx, ly;
  for (double eps : {0.04, 0.02, 0.01}) {
    const double kl = kl_path(base, perturb_params(base, eps), 5, DivMethod::exact_enumeration).value;
    lx.push_back(std::log(eps));
    ly.push_back(std::log(kl));
  }
  const double expo = ls_slope(lx, ly);
  // (d) KL/(n eps^2) below the assumption constant
  bool cap_ok = true;
  double worst_ratio = 0.0, ck = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const HmmParams star = random_instance(2, 3, rng, 0.1);
    const BoundReport rep = kl_scaling_probe(star, {0.02, 0.05, 0.1}, {2, 3, 4, 5, 6, 7, 8});
    cap_ok = cap_ok && rep.pass;
    for (const auto& [key, val] : rep.extras) {
      if (key == "max_kl_ratio") worst_ratio = std::max(worst_ratio, val);
      if (key == "c_k") ck = val;
    }
  }
  const bool ok = mc_fail == 0 && add_err <= 1e-10 && expo >= 1.8 && expo <= 2.2 && cap_ok;
  return {ok, fmt("mc fails %.0f/20, additivity err %.1e, quad exponent %.3f", double(mc_fail),
                  add_err, expo) +
                  fmt(", kl ratio %.3g <= C_K %.4g", worst_ratio, ck)};
}

// 6. log-likelihood-ratio variance: MC agreement and Var/n flatness
Outcome c6_variance() {
  RandomStream rng(9106);
  int mc_fail = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(2));
    const int v = 2 + static_cast<int>(rng.uniform_int(3));
    const HmmParams star = random_instance(k, v, rng);
    const HmmParams other = perturb_params(star, 0.1 + 0.2 * rng.uniform());
    const VarianceReport exact = llr_variance(star, other, 4, DivMethod::exact_enumeration);
    const auto mu_s = stationary_distribution(star.Q);
    const auto mu_o = stationary_distribution(other.Q);
    const int n_mc = 4000;
    std::vector<double> llr(n_mc);
    for (int s = 0; s < n_mc; ++s) {
      const auto [states, obs] = simulate(star, 4, rng);
      llr[s] =
          forward_filter(star, mu_s, obs).log_lik - forward_filter(other, mu_o, obs).log_lik;
    }
    const double mean = oracle::mean(llr);
    double s2 = 0.0, m4 = 0.0;
    for (double x : llr) {
      const double d = x - mean;
      s2 += d * d / n_mc;
      m4 += d * d * d * d / n_mc;
    }
    const double se = std::sqrt(std::max(m4 - s2 * s2, 0.0) / n_mc);
    if (std::abs(exact.variance - s2) > 3.0 * se + 1e-12) ++mc_fail;
  }
  double worst_ratio = 0.0;
  bool flat_ok = true;
  for (int trial = 0; trial < 5; ++trial) {
    const HmmParams star = random_instance(2, 3, rng, 0.1);
    const BoundReport rep =
        variance_bound_probe(star, perturb_params(star, 0.05), {4, 5, 6, 7, 8, 9, 10}, {1.0});
    flat_ok = flat_ok && rep.pass;
    for (const auto& [key, val] : rep.extras)
      if (key == "var_over_n_ratio") worst_ratio = std::max(worst_ratio, val);
  }
  return {mc_fail == 0 && flat_ok,
          fmt("mc fails %.0f/20, worst Var/n max-min ratio %.3f <= 1.5", double(mc_fail), worst_ratio)};
}

// 7. joint-law distance geometry at ell = 2
Outcome c7_distance() {
  RandomStream rng(9107);
  double id_err = 0.0, tri_worst = 0.0, mono_worst = 0.0, range_worst = 0.0;
  bool lip_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const HmmParams a = random_instance(2, 4, rng);
    id_err = std::max(id_err, d_ell(a, a, 2).value);
    id_err = std::max(id_err, d_ell(a, permute_states(a, {1, 0}), 2).value);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const HmmParams a = random_instance(2, 4, rng);
    const HmmParams b = random_instance(2, 4, rng);
    const HmmParams c = random_instance(2, 4, rng);
    const double dab = d_ell(a, b, 2).value;
    const double dbc = d_ell(b, c, 2).value;
    const double dac = d_ell(a, c, 2).value;
    range_worst = std::max(range_worst, std::max({dab, dbc, dac}) - 2.0);
    tri_worst = std::max(tri_worst, dac - dab - dbc);
    mono_worst = std::max(mono_worst, d_ell(a, b, 1).value - dab);
    lip_ok = lip_ok && d_ell_lipschitz_bound(a, b, 2).ok;
  }
  const bool ok = id_err <= 1e-10 && range_worst <= 1e-12 && tri_worst <= 1e-9 &&
                  mono_worst <= 1e-12 && lip_ok;
  return {ok, fmt("identity/relabel %.1e, triangle slack %.1e, D1-D2 slack %.1e", id_err,
                  tri_worst, mono_worst)};
}

// 8. sampler correctness: Geweke on both variants plus FFBS marginals
Outcome c8_sampler() {
  GibbsConfig disc;
  disc.model = GibbsModel::discrete_dp;
  disc.k = 2;
  disc.q_prior.variant = QPriorVariant::q3_truncated;
  disc.q_prior.floor_q = 0.05;
  disc.dp.dense_cap = 100;
  RandomStream rng(9108);
  const GewekeResult gd = geweke_joint_check(disc, 6, 10000, rng);

  GibbsConfig cont = disc;
  cont.model = GibbsModel::continuous_dpm;
  const GewekeResult gc = geweke_joint_check(cont, 5, 10000, rng);

  double zmax = 0.0;
  for (double z : gd.z) zmax = std::max(zmax, std::abs(z));
  for (double z : gc.z) zmax = std::max(zmax, std::abs(z));

  const HmmParams theta = th::discrete_params(th::make_q(2, {0.7, 0.3, 0.4, 0.6}),
                                              {{0.5, 0.3, 0.2}, {0.1, 0.3, 0.6}});
  const std::vector<double> obs = {1, 3, 2, 3, 1, 2};
  const int n_draws = 200000;
  std::vector<std::vector<int>> hits(obs.size(), std::vector<int>(2, 0));
  for (int s = 0; s < n_draws; ++s) {
    const auto x = ffbs_states(theta, obs, rng);
    for (std::size_t t = 0; t < obs.size(); ++t) ++hits[t][x[t]];
  }
  double ffbs_worst = 0.0;  // in SE units
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const double target = oracle::smoothing_marginal(theta, obs, static_cast<int>(t), 1);
    const double p = static_cast<double>(hits[t][1]) / n_draws;
    const double se = std::sqrt(std::max(target * (1.0 - target) / n_draws, 1e-300));
    ffbs_worst = std::max(ffbs_worst, std::abs(p - target) / se);
  }
  const bool ok = gd.pass && gc.pass && ffbs_worst <= 3.0;
  return {ok, fmt("max |geweke z| %.2f (both variants), ffbs marginal max %.2f SE", zmax,
                  ffbs_worst)};
}

// 9. discrete posterior contraction slope
Outcome c9_discrete_rate() {
  ExperimentConfig cfg;
  cfg.truth = default_discrete_truth();
  cfg.gibbs.model = GibbsModel::discrete_dp;
  cfg.gibbs.k = cfg.truth.Q.k;
  cfg.gibbs.q_prior.variant = QPriorVariant::q3_truncated;
  cfg.gibbs.q_prior.floor_q = 0.05;
  cfg.gibbs.dp.dense_cap = 50;
  cfg.gibbs.iterations = 600;
  cfg.gibbs.burn_in = 200;
  cfg.gibbs.thin = 8;
  cfg.n_grid = {500, 1000, 2000, 4000, 8000};
  cfg.replicates = 10;
  cfg.ell = 2;
  cfg.seed = 424242;
  cfg.dist.lattice_trim = 1e-8;
  const auto rows = run_rate_experiment(cfg);
  long long errors = 0;
  std::map<long long, std::vector<double>> by_n;
  for (const auto& rec : rows) {
    if (!rec.error.empty()) {
      ++errors;
      continue;
    }
    by_n[rec.n].push_back(rec.median_d);
  }
  bool decreasing = true;
  double prev = 1e300;
  for (auto& [n, meds] : by_n) {
    const double m = sample_quantile(meds, 0.5);
    decreasing = decreasing && m < prev;
    prev = m;
  }
  const SlopeFit fit = fit_rate_slope(rows, "median_D");
  const bool ok = errors == 0 && decreasing && fit.slope >= -0.70 && fit.slope <= -0.30;
  return {ok, fmt("slope %.3f in [-0.70, -0.30], %g cell errors, medians", fit.slope,
                  static_cast<double>(errors)) +
                  (decreasing ? " strictly decreasing" : " NOT decreasing")};
}

// 10. continuous posterior contraction slope
Outcome c10_continuous_rate() {
  ExperimentConfig cfg;
  cfg.truth = default_continuous_truth();
  cfg.gibbs.model = GibbsModel::continuous_dpm;
  cfg.gibbs.k = cfg.truth.Q.k;
  cfg.gibbs.q_prior.variant = QPriorVariant::q3_truncated;
  cfg.gibbs.q_prior.floor_q = 0.05;
  cfg.gibbs.iterations = 500;
  cfg.gibbs.burn_in = 200;
  cfg.gibbs.thin = 6;
  cfg.n_grid = {250, 500, 1000, 2000};
  cfg.replicates = 5;
  cfg.ell = 2;
  cfg.seed = 515151;
  cfg.dist.grid_step_sigmas = 0.1;
  const auto rows = run_rate_experiment(cfg);
  long long errors = 0;
  for (const auto& rec : rows)
    if (!rec.error.empty()) ++errors;
  const SlopeFit fit = fit_rate_slope(rows, "median_D");
  const bool ok = errors == 0 && fit.slope <= -0.25 && fit.ci_hi < 0.0;
  return {ok, fmt("slope %.3f <= -0.25, bootstrap CI [%.3f, %.3f] excludes 0", fit.slope,
                  fit.ci_lo, fit.ci_hi)};
}

// 11. prior probes: base-measure bracket, floor zero, tail ordering, mass monotonicity
Outcome c11_priors() {
  DpDiscreteSpec dp;
  bool bracket_ok = true;
  for (long long l = 1; l <= 100000; ++l)
    bracket_ok = bracket_ok && dp.g_at(l) == dp.c0 * std::pow(static_cast<double>(l), -dp.alpha_g);

  RandomStream r3(9111);
  QPriorSpec q3;
  q3.variant = QPriorVariant::q3_truncated;
  q3.floor_q = 0.2;
  const QTailEstimate t3 = prior_q_tail_estimate(q3, 2, {0.05, 0.1, 0.15, 0.2}, 2000, r3);
  bool zero_ok = true;
  for (double raw : t3.raw) zero_ok = zero_ok && raw == 0.0;

  QPriorSpec q1;
  q1.variant = QPriorVariant::q1_exponential;
  q1.alpha = {1.0};
  QPriorSpec q2;
  q2.variant = QPriorVariant::q2_double_exponential;
  q2.alpha = {1.0};
  q2.beta = {1.0};
  RandomStream ra(9112), rb(9112);  // paired proposals
  const std::vector<double> grid = {0.05, 0.1, 0.15};
  const QTailEstimate e1 = prior_q_tail_estimate(q1, 2, grid, 30000, ra);
  const QTailEstimate e2 = prior_q_tail_estimate(q2, 2, grid, 30000, rb);
  bool order_ok = true;
  double order_worst = -1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double slack = e2.prob[i] - e1.prob[i] - 3.0 * (e1.se[i] + e2.se[i]);
    order_worst = std::max(order_worst, slack);
    order_ok = order_ok && slack <= 0.0;
  }

  EnvelopeClassSpec env;
  env.d_env = std::expm1(1.0);
  const DiscretePmf truth = make_envelope_pmf(env, "exp", 1.0, 30);
  std::vector<double> logs;
  for (double eps : {10.0, 1.0, 1e-8}) {
    RandomStream rm(9113);
    logs.push_back(prior_mass_kl_neighborhood(dp, {truth}, eps, 1.0, 400, rm).log_estimate);
  }
  const bool mono_ok = logs[1] <= logs[0] && logs[2] <= logs[1];

  const bool ok = bracket_ok && zero_ok && order_ok && mono_ok;
  return {ok, std::string("bracket ") + (bracket_ok ? "exact" : "BROKEN") + ", floor zeros " +
                  (zero_ok ? "exact" : "BROKEN") + fmt(", ordering slack %.2e", order_worst) +
                  ", mass logs " + (mono_ok ? "monotone" : "NOT monotone")};
}

struct Criterion {
  int id;
  const char* label;
  double time_limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "filter/path equivalence", 30.0, c1_filter_path},
      {2, "filter forgetting bound", 10.0, c2_forgetting},
      {3, "predictive floor and TV mixing", 10.0, c3_floor_mixing},
      {4, "sum ratio bound", 5.0, c4_ratio},
      {5, "KL structure", 120.0, c5_kl},
      {6, "variance structure", 120.0, c6_variance},
      {7, "joint-law distance geometry", 60.0, c7_distance},
      {8, "sampler correctness", 600.0, c8_sampler},
      {9, "discrete concentration rate", 3600.0, c9_discrete_rate},
      {10, "continuous concentration rate", 3600.0, c10_continuous_rate},
      {11, "prior probes", 300.0, c11_priors},
  };

  int failures = 0, ran = 0;
  for (const auto& crit : criteria) {
    if (only != 0 && crit.id != only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = crit.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = elapsed < crit.time_limit_s;
    const bool pass = out.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s — criterion %d: %s (%s; %.1f s%s)\n", pass ? "PASS" : "FAIL", crit.id,
                crit.label, out.detail.c_str(), elapsed,
                in_time ? "" : " — over the time limit");
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches --only %d\n", only);
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
