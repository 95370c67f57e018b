#include "nphmm/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "nphmm/distance.hpp"

namespace nphmm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string q_prior_variant_name(QPriorVariant v) {
  switch (v) {
    case QPriorVariant::q1_exponential: return "q1-exponential";
    case QPriorVariant::q2_double_exponential: return "q2-double-exponential";
    case QPriorVariant::q3_truncated: return "q3-truncated";
  }
  return "unknown";
}

void QPriorSpec::validate(int k) const {
  if (k < 1) throw std::invalid_argument("QPriorSpec: k must be positive");
  const auto check_vec = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != 1 && static_cast<int>(v.size()) != k)
      throw std::invalid_argument(std::string("QPriorSpec: ") + what +
                                  " must have size 1 or k");
    for (double x : v)
      if (!(x > 0.0)) throw std::invalid_argument(std::string("QPriorSpec: ") + what + " <= 0");
  };
  if (variant == QPriorVariant::q1_exponential || variant == QPriorVariant::q2_double_exponential)
    check_vec(alpha, "alpha");
  if (variant == QPriorVariant::q2_double_exponential) check_vec(beta, "beta");
  if (variant == QPriorVariant::q3_truncated) {
    if (!(floor_q > 0.0) || floor_q > 1.0 / k + 1e-15)
      throw std::invalid_argument("QPriorSpec: floor must lie in (0, 1/k]");
  }
  if (rejection_budget < 1) throw std::invalid_argument("QPriorSpec: rejection budget < 1");
}

double QPriorSpec::alpha_at(int i) const {
  return alpha.size() == 1 ? alpha[0] : alpha.at(i);
}

double QPriorSpec::beta_at(int i) const { return beta.size() == 1 ? beta[0] : beta.at(i); }

double log_row_density(const QPriorSpec& spec, const std::vector<double>& row) {
  const int k = static_cast<int>(row.size());
  switch (spec.variant) {
    case QPriorVariant::q1_exponential: {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        if (!(row[i] > 0.0)) return -kInf;
        s += spec.alpha_at(i) / row[i];
      }
      return -s;
    }
    case QPriorVariant::q2_double_exponential: {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        if (!(row[i] > 0.0)) return -kInf;
        s += spec.beta_at(i) * std::exp(std::pow(row[i], -spec.alpha_at(i)));
      }
      return -s;
    }
    case QPriorVariant::q3_truncated: {
      for (double x : row)
        if (x < spec.floor_q) return -kInf;
      return 0.0;
    }
  }
  return -kInf;
}

double log_transition_density(const QPriorSpec& spec, const TransitionMatrix& q) {
  double s = 0.0;
  std::vector<double> row(q.k);
  for (int i = 0; i < q.k; ++i) {
    for (int j = 0; j < q.k; ++j) row[j] = q(i, j);
    s += log_row_density(spec, row);
  }
  return s;
}

namespace {

// Upper bound on the log row density, used as the rejection envelope against
// the uniform simplex proposal.
double log_density_envelope(const QPriorSpec& spec, int k) {
  switch (spec.variant) {
    case QPriorVariant::q1_exponential: {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += std::sqrt(spec.alpha_at(i));
      return -s * s;  // minimum of sum alpha_i/u_i on the simplex
    }
    case QPriorVariant::q2_double_exponential: {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += spec.beta_at(i);
      return -std::exp(1.0) * s;  // exp(u^{-a}) >= e on (0,1]
    }
    case QPriorVariant::q3_truncated:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

std::vector<double> sample_prior_row(const QPriorSpec& spec, int k, RandomStream& rng) {
  spec.validate(k);
  const std::vector<double> ones(k, 1.0);
  const double env = log_density_envelope(spec, k);
  for (long long trial = 0; trial < spec.rejection_budget; ++trial) {
    std::vector<double> u = rng.dirichlet(ones);
    if (spec.variant == QPriorVariant::q3_truncated) {
      if (*std::min_element(u.begin(), u.end()) >= spec.floor_q) return u;
      continue;
    }
    const double log_acc = log_row_density(spec, u) - env;
    if (std::log(rng.uniform()) < log_acc) return u;
  }
  throw std::runtime_error("sample_prior_row: rejection budget exceeded for " +
                           q_prior_variant_name(spec.variant));
}

TransitionMatrix sample_transition_prior(const QPriorSpec& spec, int k, RandomStream& rng) {
  TransitionMatrix q;
  q.k = k;
  q.p.resize(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    const auto row = sample_prior_row(spec, k, rng);
    for (int j = 0; j < k; ++j) q.p[static_cast<std::size_t>(i) * k + j] = row[j];
  }
  return q;
}

double DpDiscreteSpec::g_at(long long l) const {
  return c0 * std::pow(static_cast<double>(l), -alpha_g);
}

double DpDiscreteSpec::total_mass() const { return c0 * std::riemann_zeta(alpha_g); }

double DpDiscreteSpec::mass_through(long long l) const {
  double s = 0.0;
  for (long long y = 1; y <= l; ++y) s += g_at(y);
  return s;
}

void DpDiscreteSpec::validate() const {
  if (!(c0 > 0.0)) throw std::invalid_argument("DpDiscreteSpec: c0 <= 0");
  if (!(alpha_g >= 2.0)) throw std::invalid_argument("DpDiscreteSpec: alpha_g < 2");
  if (trunc_h < 1 || !(trunc_eps > 0.0) || trunc_eps >= 1.0)
    throw std::invalid_argument("DpDiscreteSpec: bad truncation policy");
  if (dense_cap < 2) throw std::invalid_argument("DpDiscreteSpec: dense_cap < 2");
}

namespace {

constexpr long long kAtomWalkCap = 50000000;

// Inverse-CDF walk over G (restricted to the complement of `excluded`,
// which must be sorted). Heavy polynomial tail: the walk is capped, with
// P(hit cap) ~ 1e-8 for the default base measure.
long long sample_g_atom(const DpDiscreteSpec& spec, const std::vector<long long>& excluded,
                        double restricted_mass, RandomStream& rng) {
  const double target = rng.uniform() * restricted_mass;
  double acc = 0.0;
  std::size_t ex = 0;
  for (long long l = 1; l <= kAtomWalkCap; ++l) {
    while (ex < excluded.size() && excluded[ex] < l) ++ex;
    if (ex < excluded.size() && excluded[ex] == l) continue;
    acc += spec.g_at(l);
    if (acc >= target) return l;
  }
  return kAtomWalkCap;
}

// Builds the stored pmf: dense cells up to the cap get atoms plus the
// G-proportional smear; everything past the cap is pinned into the
// geometric tail so the total mass is exactly one.
DiscretePmf assemble_dp_pmf(const DpDiscreteSpec& spec,
                            const std::vector<std::pair<long long, double>>& atoms,
                            double smear_mass, const std::vector<long long>& smear_excluded,
                            double smear_base_mass) {
  const long long cap = spec.dense_cap;
  DiscretePmf pmf;
  pmf.probs.assign(cap, 0.0);
  if (smear_mass > 0.0 && smear_base_mass > 0.0) {
    std::size_t ex = 0;
    for (long long l = 1; l <= cap; ++l) {
      while (ex < smear_excluded.size() && smear_excluded[ex] < l) ++ex;
      if (ex < smear_excluded.size() && smear_excluded[ex] == l) continue;
      pmf.probs[l - 1] = smear_mass * spec.g_at(l) / smear_base_mass;
    }
  }
  for (const auto& [l, w] : atoms)
    if (l <= cap) pmf.probs[l - 1] += w;
  double dense = 0.0;
  for (double x : pmf.probs) dense += x;
  pmf.tail_mass = std::max(0.0, 1.0 - dense);
  pmf.tail_rate = std::pow(static_cast<double>(cap) / (cap + 1.0), spec.alpha_g);
  return pmf;
}

}  // namespace

DiscretePmf sample_dp_discrete(const DpDiscreteSpec& spec, RandomStream& rng, DpDrawInfo* info) {
  spec.validate();
  const double m = spec.total_mass();
  std::vector<std::pair<long long, double>> atoms;
  const std::vector<long long> none;
  double rem = 1.0;
  int sticks = 0;
  const int hard_cap = std::max(spec.trunc_h * 10, 1000);
  while (rem >= spec.trunc_eps) {
    if (++sticks > hard_cap)
      throw std::runtime_error("sample_dp_discrete: stick budget exhausted before residual target");
    const double v = rng.beta(1.0, m);
    atoms.emplace_back(sample_g_atom(spec, none, m, rng), rem * v);
    rem *= (1.0 - v);
  }
  if (info) {
    info->residual = rem;
    info->sticks = sticks;
  }
  return assemble_dp_pmf(spec, atoms, rem, none, m);
}

DiscretePmf sample_dp_posterior(const DpDiscreteSpec& spec,
                                const std::vector<std::pair<long long, long long>>& counts,
                                RandomStream& rng, DpDrawInfo* info) {
  if (counts.empty()) return sample_dp_discrete(spec, rng, info);
  spec.validate();
  std::vector<long long> observed;
  observed.reserve(counts.size());
  for (const auto& [y, c] : counts) {
    if (y < 1 || c < 1) throw std::invalid_argument("sample_dp_posterior: bad count cell");
    observed.push_back(y);
  }
  std::sort(observed.begin(), observed.end());
  if (std::adjacent_find(observed.begin(), observed.end()) != observed.end())
    throw std::invalid_argument("sample_dp_posterior: duplicate value cells");

  const double m = spec.total_mass();
  double observed_base = 0.0;
  for (long long y : observed) observed_base += spec.g_at(y);
  const double m_rest = m - observed_base;

  // Dirichlet over ({y_1},...,{y_d}, rest) with base+count concentrations.
  std::vector<double> gam(counts.size() + 1);
  double gam_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    gam[i] = rng.gamma(static_cast<double>(counts[i].second) + spec.g_at(counts[i].first), 1.0);
    gam_sum += gam[i];
  }
  gam.back() = rng.gamma(m_rest, 1.0);
  gam_sum += gam.back();

  std::vector<std::pair<long long, double>> atoms;
  for (std::size_t i = 0; i < counts.size(); ++i)
    atoms.emplace_back(counts[i].first, gam[i] / gam_sum);
  double rem = gam.back() / gam_sum;  // rest-DP mass, broken below

  int sticks = 0;
  const int hard_cap = std::max(spec.trunc_h * 10, 1000);
  while (rem >= spec.trunc_eps) {
    if (++sticks > hard_cap)
      throw std::runtime_error("sample_dp_posterior: stick budget exhausted");
    const double v = rng.beta(1.0, m_rest);
    atoms.emplace_back(sample_g_atom(spec, observed, m_rest, rng), rem * v);
    rem *= (1.0 - v);
  }
  if (info) {
    info->residual = rem;
    info->sticks = sticks;
  }
  return assemble_dp_pmf(spec, atoms, rem, observed, m_rest);
}

void DpmGaussianSpec::validate() const {
  if (!(base_scale > 0.0) || !(concentration > 0.0))
    throw std::invalid_argument("DpmGaussianSpec: base scale and concentration must be positive");
  if (!(sigma_shape > 0.0) || !(sigma_scale > 0.0))
    throw std::invalid_argument("DpmGaussianSpec: inverse-gamma parameters must be positive");
  if (trunc_h < 2 || !(trunc_eps > 0.0) || trunc_eps >= 1.0)
    throw std::invalid_argument("DpmGaussianSpec: bad truncation policy");
}

GaussianMixtureDensity sample_dpm_gaussian(const DpmGaussianSpec& spec, RandomStream& rng,
                                           DpDrawInfo* info) {
  spec.validate();
  GaussianMixtureDensity mix;
  mix.sigma = rng.inverse_gamma(spec.sigma_shape, spec.sigma_scale);
  double rem = 1.0;
  int h = 0;
  while (rem >= spec.trunc_eps && h < spec.trunc_h - 1) {
    const double v = rng.beta(1.0, spec.concentration);
    mix.weights.push_back(rem * v);
    mix.locations.push_back(spec.base_scale * rng.normal());
    rem *= (1.0 - v);
    ++h;
  }
  if (info) {
    info->residual = rem;
    info->sticks = h;
  }
  // last stick forced to one: the residual becomes a final base-draw component
  mix.weights.push_back(rem);
  mix.locations.push_back(spec.base_scale * rng.normal());
  return mix;
}

int blocked_gibbs_truncation(const DpmGaussianSpec& spec) {
  const double step = std::log(spec.concentration / (1.0 + spec.concentration));
  const int needed = static_cast<int>(std::ceil(std::log(spec.trunc_eps) / step)) + 30;
  return std::max(5, std::min(spec.trunc_h, needed));
}

std::vector<double> isotonic_nondecreasing(std::vector<double> values) {
  const std::size_t n = values.size();
  std::vector<double> level(n), weight(n);
  std::vector<std::size_t> len(n);
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    level[blocks] = values[i];
    weight[blocks] = 1.0;
    len[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
      weight[blocks - 2] = w;
      len[blocks - 2] += len[blocks - 1];
      --blocks;
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t r = 0; r < len[b]; ++r) out.push_back(level[b]);
  return out;
}

QTailEstimate prior_q_tail_estimate(const QPriorSpec& spec, int k, std::vector<double> q_grid,
                                    long long n_mc, RandomStream& rng) {
  spec.validate(k);
  if (n_mc < 1000) throw std::invalid_argument("prior_q_tail_estimate: n_mc must be >= 1000");
  std::sort(q_grid.begin(), q_grid.end());
  QTailEstimate est;
  est.q_grid = q_grid;
  const std::size_t nq = q_grid.size();
  est.raw.assign(nq, 0.0);
  est.se.assign(nq, 0.0);

  if (spec.variant == QPriorVariant::q3_truncated) {
    std::vector<double> mins;
    mins.reserve(n_mc);
    for (long long s = 0; s < n_mc; ++s) {
      const auto row = sample_prior_row(spec, k, rng);
      mins.push_back(*std::min_element(row.begin(), row.end()));
    }
    for (std::size_t qi = 0; qi < nq; ++qi) {
      if (q_grid[qi] <= spec.floor_q + 1e-15) {
        est.raw[qi] = 0.0;  // support excludes the event entirely
        est.se[qi] = 0.0;
        continue;
      }
      long long ge = 0;
      for (double mn : mins) ge += mn >= q_grid[qi];
      const double p = static_cast<double>(ge) / n_mc;
      est.raw[qi] = 1.0 - std::pow(p, k);
      const double se_p = std::sqrt(std::max(0.0, p * (1.0 - p) / n_mc));
      est.se[qi] = k * std::pow(p, k - 1) * se_p;
    }
  } else {
    // Self-normalized importance sampling from the uniform simplex; the
    // proposal stream is spec-independent so paired comparisons can share it.
    const std::vector<double> ones(k, 1.0);
    std::vector<double> logw(n_mc), minu(n_mc);
    double max_lw = -kInf;
    for (long long s = 0; s < n_mc; ++s) {
      const auto u = rng.dirichlet(ones);
      logw[s] = log_row_density(spec, u);
      minu[s] = *std::min_element(u.begin(), u.end());
      max_lw = std::max(max_lw, logw[s]);
    }
    double wsum = 0.0;
    std::vector<double> w(n_mc);
    for (long long s = 0; s < n_mc; ++s) {
      w[s] = std::exp(logw[s] - max_lw);
      wsum += w[s];
    }
    for (std::size_t qi = 0; qi < nq; ++qi) {
      double hit = 0.0;
      for (long long s = 0; s < n_mc; ++s)
        if (minu[s] >= q_grid[qi]) hit += w[s];
      const double p = hit / wsum;
      double var_acc = 0.0;
      for (long long s = 0; s < n_mc; ++s) {
        const double h = minu[s] >= q_grid[qi] ? 1.0 : 0.0;
        var_acc += w[s] * w[s] * (h - p) * (h - p);
      }
      const double se_p = std::sqrt(var_acc) / wsum;
      est.raw[qi] = 1.0 - std::pow(p, k);
      est.se[qi] = k * std::pow(p, k - 1) * se_p;
    }
  }
  est.prob = isotonic_nondecreasing(est.raw);
  return est;
}

namespace {

PriorMassEstimate finish_mass_estimate(long long hits, long long n_mc, double boundary) {
  PriorMassEstimate est;
  est.hits = hits;
  est.n_mc = n_mc;
  est.s_boundary = boundary;
  est.fraction = static_cast<double>(hits) / n_mc;
  char buf[64];
  if (hits == 0) {
    est.lower_bound_only = true;
    est.log_estimate = std::log(0.5 / n_mc);  // nominal value below one hit
    est.se_log = 0.0;
    std::snprintf(buf, sizeof buf, "< 1/%lld", static_cast<long long>(n_mc));
  } else {
    est.log_estimate = std::log(est.fraction);
    est.se_log = std::sqrt((1.0 - est.fraction) / hits);
    std::snprintf(buf, sizeof buf, "%.6g", est.fraction);
  }
  est.display = buf;
  return est;
}

}  // namespace

PriorMassEstimate prior_mass_kl_neighborhood(const DpDiscreteSpec& spec,
                                             const std::vector<DiscretePmf>& fstar,
                                             double eps_tilde, double u_n, long long n_mc,
                                             RandomStream& rng) {
  spec.validate();
  if (fstar.empty()) throw std::invalid_argument("prior_mass_kl_neighborhood: empty truth");
  if (!(eps_tilde > 0.0) || !(u_n >= 1.0) || n_mc < 1)
    throw std::invalid_argument("prior_mass_kl_neighborhood: bad arguments");
  const double target = eps_tilde * eps_tilde / (2.0 * u_n);
  long long l_s = 1;
  const auto worst_tail = [&](long long l) {
    double t = 0.0;
    for (const auto& f : fstar) t = std::max(t, f.tail_beyond(l));
    return t;
  };
  while (l_s < 100000 && worst_tail(l_s) > target) ++l_s;

  const int k = static_cast<int>(fstar.size());
  long long hits = 0;
  for (long long s = 0; s < n_mc; ++s) {
    std::vector<DiscretePmf> f;
    f.reserve(k);
    for (int j = 0; j < k; ++j) f.push_back(sample_dp_discrete(spec, rng));
    const auto rep = kl_neighborhood_check(fstar, f, f, l_s, eps_tilde, u_n);
    hits += rep.all_pass ? 1 : 0;
  }
  return finish_mass_estimate(hits, n_mc, static_cast<double>(l_s));
}

PriorMassEstimate prior_mass_kl_neighborhood(const DpmGaussianSpec& spec,
                                             const std::vector<GaussianMixtureDensity>& fstar,
                                             double eps_tilde, double u_n, long long n_mc,
                                             RandomStream& rng) {
  spec.validate();
  if (fstar.empty()) throw std::invalid_argument("prior_mass_kl_neighborhood: empty truth");
  if (!(eps_tilde > 0.0) || !(u_n >= 1.0) || n_mc < 1)
    throw std::invalid_argument("prior_mass_kl_neighborhood: bad arguments");
  const double target = eps_tilde * eps_tilde / (2.0 * u_n);
  const auto worst_tail = [&](double t) {
    double worst = 0.0;
    for (const auto& mix : fstar) {
      double s = 0.0;
      for (std::size_t h = 0; h < mix.weights.size(); ++h) {
        const double a = (-t - mix.locations[h]) / mix.sigma;
        const double b = (t - mix.locations[h]) / mix.sigma;
        s += mix.weights[h] *
             (1.0 - 0.5 * (std::erf(b / std::sqrt(2.0)) - std::erf(a / std::sqrt(2.0))));
      }
      worst = std::max(worst, s);
    }
    return worst;
  };
  double t_s = 1.0;
  while (t_s < 1e6 && worst_tail(t_s) > target) t_s *= 1.25;

  const int k = static_cast<int>(fstar.size());
  long long hits = 0;
  for (long long s = 0; s < n_mc; ++s) {
    std::vector<GaussianMixtureDensity> f;
    f.reserve(k);
    for (int j = 0; j < k; ++j) f.push_back(sample_dpm_gaussian(spec, rng));
    const auto rep = kl_neighborhood_check(fstar, f, f, t_s, eps_tilde, u_n);
    hits += rep.all_pass ? 1 : 0;
  }
  return finish_mass_estimate(hits, n_mc, t_s);
}

double RateSchedule::eps_tilde(long long n) const {
  if (n < 2) throw std::invalid_argument("RateSchedule: n must be >= 2");
  return std::pow(static_cast<double>(n), -exponent) *
         std::pow(std::log(static_cast<double>(n)), t0);
}

double RateSchedule::eps(long long n) const {
  if (n < 2) throw std::invalid_argument("RateSchedule: n must be >= 2");
  return std::pow(static_cast<double>(n), -exponent) *
         std::pow(std::log(static_cast<double>(n)), t);
}

double RateSchedule::u(long long n) const {
  if (n < 2) throw std::invalid_argument("RateSchedule: n must be >= 2");
  return polylog_u ? std::pow(std::log(static_cast<double>(n)), 1.5) : 1.0;
}

double RateSchedule::threshold(long long n) const {
  if (!(q_floor > 0.0)) throw std::invalid_argument("RateSchedule: q_floor must be positive");
  return m_mult * eps(n) / q_floor;
}

void RateSchedule::validate_grid(const std::vector<long long>& n_grid) const {
  if (!(exponent > 0.0) || !(m_mult > 0.0) || !(q_floor > 0.0) || t0 < 0.0 || t < 0.0)
    throw std::invalid_argument("RateSchedule: constants must be positive");
  double prev = 0.0;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const long long n = n_grid[i];
    const double et = eps_tilde(n);
    if (et > eps(n) + 1e-15)
      throw std::invalid_argument("RateSchedule: eps_tilde exceeds eps at n=" + std::to_string(n));
    const double growth = static_cast<double>(n) * et * et;
    if (i > 0 && growth <= prev)
      throw std::invalid_argument("RateSchedule: n * eps_tilde(n)^2 not increasing at n=" +
                                  std::to_string(n));
    prev = growth;
  }
}

}  // namespace nphmm
