#include "nphmm/distance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "nphmm/quadrature.hpp"

namespace nphmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int max_vmax(const HmmParams& theta) {
  int v = 0;
  for (const auto& f : theta.emissions) v = std::max(v, std::get<DiscretePmf>(f).v_max());
  return v;
}

// Per-theta tail mass of one observation beyond v under the stationary law.
double stationary_tail_mass(const HmmParams& theta, const std::vector<double>& mu, long long v) {
  double s = 0.0;
  for (int i = 0; i < theta.k(); ++i)
    s += mu[i] * std::get<DiscretePmf>(theta.emissions[i]).tail_beyond(v);
  return s;
}

void check_same_space(const HmmParams& a, const HmmParams& b) {
  a.validate();
  b.validate();
  if (a.discrete() != b.discrete())
    throw std::invalid_argument("incompatible observation spaces (discrete vs continuous)");
}

// Component locations of every mixture in both parameter sets, plus the
// integration range covering all of them to +-pad sigma.
void continuous_range(const HmmParams& a, const HmmParams& b, double pad, double* lo, double* hi,
                      std::vector<double>* breaks) {
  *lo = kInf;
  *hi = -kInf;
  double sigma_max = 0.0;
  for (const HmmParams* th : {&a, &b}) {
    for (const auto& f : th->emissions) {
      const auto& mix = std::get<GaussianMixtureDensity>(f);
      sigma_max = std::max(sigma_max, mix.sigma);
      for (double z : mix.locations) {
        *lo = std::min(*lo, z);
        *hi = std::max(*hi, z);
        if (breaks) breaks->push_back(z);
      }
    }
  }
  *lo -= pad * sigma_max;
  *hi += pad * sigma_max;
}

DivergenceReport d_ell_discrete_exact(const HmmParams& a, const HmmParams& b, int ell,
                                      const DistanceOptions& opt) {
  const auto mu_a = stationary_distribution(a.Q);
  const auto mu_b = stationary_distribution(b.Q);
  long long v = std::max(max_vmax(a), max_vmax(b));
  if (opt.lattice_trim > 0.0) {
    // Combined tail mass is nonincreasing in v, so the smallest admissible
    // support is found by bisection.
    long long lo = 1, hi = v;
    while (lo < hi) {
      const long long mid = lo + (hi - lo) / 2;
      if (stationary_tail_mass(a, mu_a, mid) + stationary_tail_mass(b, mu_b, mid) >
          opt.lattice_trim)
        lo = mid + 1;
      else
        hi = mid;
    }
    v = lo;
  }
  double windows = 1.0;
  for (int t = 0; t < ell; ++t) windows *= static_cast<double>(v);
  if (windows > static_cast<double>(opt.lattice_budget))
    throw std::invalid_argument("d_ell: V^ell exceeds the exact-enumeration budget; use monte_carlo");
  const int ka = a.k(), kb = b.k();
  // Emission tables f_i(y) for y = 1..v.
  std::vector<std::vector<double>> fa(ka, std::vector<double>(v + 1));
  std::vector<std::vector<double>> fb(kb, std::vector<double>(v + 1));
  for (int i = 0; i < ka; ++i)
    for (long long y = 1; y <= v; ++y) fa[i][y] = std::get<DiscretePmf>(a.emissions[i]).at(y);
  for (int i = 0; i < kb; ++i)
    for (long long y = 1; y <= v; ++y) fb[i][y] = std::get<DiscretePmf>(b.emissions[i]).at(y);

  // Depth-indexed scratch keeps the window recursion allocation-free.
  std::vector<std::vector<double>> alpha_a(ell + 1, std::vector<double>(ka));
  std::vector<std::vector<double>> alpha_b(ell + 1, std::vector<double>(kb));
  std::vector<std::vector<double>> beta_a(ell, std::vector<double>(ka));
  std::vector<std::vector<double>> beta_b(ell, std::vector<double>(kb));
  double total = 0.0;
  std::function<void(int)> rec = [&](int depth) {
    if (depth == ell) {
      double pa = 0.0, pb = 0.0;
      for (double x : alpha_a[depth]) pa += x;
      for (double x : alpha_b[depth]) pb += x;
      total += std::abs(pa - pb);
      return;
    }
    auto& ba = beta_a[depth];
    auto& bb = beta_b[depth];
    if (depth == 0) {
      ba = mu_a;
      bb = mu_b;
    } else {
      for (int j = 0; j < ka; ++j) {
        double s = 0.0;
        for (int i = 0; i < ka; ++i) s += alpha_a[depth][i] * a.Q(i, j);
        ba[j] = s;
      }
      for (int j = 0; j < kb; ++j) {
        double s = 0.0;
        for (int i = 0; i < kb; ++i) s += alpha_b[depth][i] * b.Q(i, j);
        bb[j] = s;
      }
    }
    for (long long y = 1; y <= v; ++y) {
      for (int j = 0; j < ka; ++j) alpha_a[depth + 1][j] = ba[j] * fa[j][y];
      for (int j = 0; j < kb; ++j) alpha_b[depth + 1][j] = bb[j] * fb[j][y];
      rec(depth + 1);
    }
  };
  rec(0);

  DivergenceReport rep;
  rep.value = total;
  rep.method = DivMethod::exact_enumeration;
  rep.n = ell;
  rep.err_bound =
      ell * (stationary_tail_mass(a, mu_a, v) + stationary_tail_mass(b, mu_b, v));
  return rep;
}

// Fixed tensor-grid trapezoid evaluation for continuous ell <= 2. Emission
// values are tabulated once per grid, so the cost is G^2 k^2 flops rather
// than nested adaptive refinement.
DivergenceReport d_ell_grid(const HmmParams& a, const HmmParams& b, int ell,
                            const DistanceOptions& opt) {
  const auto mu_a = stationary_distribution(a.Q);
  const auto mu_b = stationary_distribution(b.Q);
  double lo, hi;
  continuous_range(a, b, 10.0, &lo, &hi, nullptr);
  double sigma_min = kInf;
  for (const HmmParams* th : {&a, &b})
    for (const auto& f : th->emissions)
      sigma_min = std::min(sigma_min, std::get<GaussianMixtureDensity>(f).sigma);
  double h = opt.grid_step_sigmas * sigma_min;
  h = std::max(h, (hi - lo) / 4096.0);
  const int g = static_cast<int>(std::ceil((hi - lo) / h)) + 1;
  h = (hi - lo) / (g - 1);
  const int ka = a.k(), kb = b.k();
  std::vector<double> fa(static_cast<std::size_t>(ka) * g), fb(static_cast<std::size_t>(kb) * g);
  for (int i = 0; i < ka; ++i)
    for (int t = 0; t < g; ++t)
      fa[static_cast<std::size_t>(i) * g + t] = density_eval(a.emissions[i], lo + t * h);
  for (int i = 0; i < kb; ++i)
    for (int t = 0; t < g; ++t)
      fb[static_cast<std::size_t>(i) * g + t] = density_eval(b.emissions[i], lo + t * h);
  const auto wt = [&](int t) { return (t == 0 || t == g - 1) ? 0.5 : 1.0; };

  DivergenceReport rep;
  rep.method = DivMethod::quadrature;
  rep.n = ell;
  double total = 0.0;
  if (ell == 1) {
    for (int t = 0; t < g; ++t) {
      double pa = 0.0, pb = 0.0;
      for (int i = 0; i < ka; ++i) pa += mu_a[i] * fa[static_cast<std::size_t>(i) * g + t];
      for (int i = 0; i < kb; ++i) pb += mu_b[i] * fb[static_cast<std::size_t>(i) * g + t];
      total += wt(t) * std::abs(pa - pb);
    }
    rep.value = total * h;
    return rep;
  }
  std::vector<double> beta_a(ka), beta_b(kb);
  for (int t1 = 0; t1 < g; ++t1) {
    for (int j = 0; j < ka; ++j) {
      double s = 0.0;
      for (int i = 0; i < ka; ++i)
        s += mu_a[i] * fa[static_cast<std::size_t>(i) * g + t1] * a.Q(i, j);
      beta_a[j] = s;
    }
    for (int j = 0; j < kb; ++j) {
      double s = 0.0;
      for (int i = 0; i < kb; ++i)
        s += mu_b[i] * fb[static_cast<std::size_t>(i) * g + t1] * b.Q(i, j);
      beta_b[j] = s;
    }
    double row = 0.0;
    for (int t2 = 0; t2 < g; ++t2) {
      double pa = 0.0, pb = 0.0;
      for (int j = 0; j < ka; ++j) pa += beta_a[j] * fa[static_cast<std::size_t>(j) * g + t2];
      for (int j = 0; j < kb; ++j) pb += beta_b[j] * fb[static_cast<std::size_t>(j) * g + t2];
      row += wt(t2) * std::abs(pa - pb);
    }
    total += wt(t1) * row;
  }
  rep.value = total * h * h;
  return rep;
}

DivergenceReport d_ell_quadrature(const HmmParams& a, const HmmParams& b, int ell,
                                  const DistanceOptions& opt) {
  const auto mu_a = stationary_distribution(a.Q);
  const auto mu_b = stationary_distribution(b.Q);
  double lo, hi;
  std::vector<double> breaks;
  continuous_range(a, b, 10.0, &lo, &hi, &breaks);
  DivergenceReport rep;
  rep.method = DivMethod::quadrature;
  rep.n = ell;
  if (ell == 1) {
    const auto integrand = [&](double y) {
      return std::abs(joint_marginal_density(a, mu_a, {y}) - joint_marginal_density(b, mu_b, {y}));
    };
    QuadratureOptions q{opt.quad_tol, 48};
    rep.value = integrate_with_breaks(integrand, lo, hi, breaks, q);
    return rep;
  }
  // ell == 2: p(y1, y2) = sum_j beta_j(y1) f_j(y2) with
  // beta_j(y1) = sum_i mu_i f_i(y1) Q(i, j); the inner integral is adaptive
  // per outer point, so the outer integrand is exact to the inner tolerance.
  const int ka = a.k(), kb = b.k();
  QuadratureOptions inner_opt{0.4 * opt.quad_tol / (hi - lo), 48};
  const auto outer = [&](double y1) {
    std::vector<double> beta_a(ka), beta_b(kb);
    for (int j = 0; j < ka; ++j) {
      double s = 0.0;
      for (int i = 0; i < ka; ++i)
        s += mu_a[i] * density_eval(a.emissions[i], y1) * a.Q(i, j);
      beta_a[j] = s;
    }
    for (int j = 0; j < kb; ++j) {
      double s = 0.0;
      for (int i = 0; i < kb; ++i)
        s += mu_b[i] * density_eval(b.emissions[i], y1) * b.Q(i, j);
      beta_b[j] = s;
    }
    const auto inner = [&](double y2) {
      double pa = 0.0, pb = 0.0;
      for (int j = 0; j < ka; ++j) pa += beta_a[j] * density_eval(a.emissions[j], y2);
      for (int j = 0; j < kb; ++j) pb += beta_b[j] * density_eval(b.emissions[j], y2);
      return std::abs(pa - pb);
    };
    return integrate_with_breaks(inner, lo, hi, breaks, inner_opt);
  };
  QuadratureOptions outer_opt{0.5 * opt.quad_tol, 48};
  rep.value = integrate_with_breaks(outer, lo, hi, breaks, outer_opt);
  return rep;
}

DivergenceReport d_ell_monte_carlo(const HmmParams& a, const HmmParams& b, int ell,
                                   RandomStream& rng, const DistanceOptions& opt) {
  if (opt.mc_draws < 100) throw std::invalid_argument("d_ell: Monte Carlo budget below 100 draws");
  const auto mu_a = stationary_distribution(a.Q);
  const auto mu_b = stationary_distribution(b.Q);
  double sum = 0.0, sum_sq = 0.0;
  for (long long s = 0; s < opt.mc_draws; ++s) {
    const bool from_a = rng.uniform() < 0.5;
    auto draw = simulate(from_a ? a : b, ell, rng);
    const double pa = joint_marginal_density(a, mu_a, draw.second);
    const double pb = joint_marginal_density(b, mu_b, draw.second);
    const double g = (pa + pb) > 0.0 ? 2.0 * std::abs(pa - pb) / (pa + pb) : 0.0;
    sum += g;
    sum_sq += g * g;
  }
  DivergenceReport rep;
  rep.method = DivMethod::monte_carlo;
  rep.n = ell;
  rep.n_draws = opt.mc_draws;
  rep.value = sum / opt.mc_draws;
  const double var = std::max(0.0, sum_sq / opt.mc_draws - rep.value * rep.value);
  rep.mc_se = std::sqrt(var / opt.mc_draws);
  return rep;
}

}  // namespace

std::string div_method_name(DivMethod m) {
  switch (m) {
    case DivMethod::automatic: return "auto";
    case DivMethod::exact_enumeration: return "exact-enumeration";
    case DivMethod::quadrature: return "quadrature";
    case DivMethod::monte_carlo: return "monte-carlo";
    case DivMethod::chain_rule: return "chain-rule";
  }
  return "unknown";
}

DivergenceReport d_ell(const HmmParams& theta, const HmmParams& theta2, int ell, DivMethod method,
                       RandomStream* rng, const DistanceOptions& opt) {
  check_same_space(theta, theta2);
  if (ell < 1) throw std::invalid_argument("d_ell: ell must be >= 1");
  if (theta.discrete()) {
    if (method == DivMethod::automatic) {
      const double v = std::max(max_vmax(theta), max_vmax(theta2));
      method = std::pow(v, ell) <= static_cast<double>(opt.lattice_budget)
                   ? DivMethod::exact_enumeration
                   : DivMethod::monte_carlo;
    }
    if (method == DivMethod::exact_enumeration) return d_ell_discrete_exact(theta, theta2, ell, opt);
    if (method == DivMethod::monte_carlo) {
      if (!rng) throw std::invalid_argument("d_ell: monte_carlo needs an RNG stream");
      return d_ell_monte_carlo(theta, theta2, ell, *rng, opt);
    }
    throw std::invalid_argument("d_ell: unsupported method for discrete parameters");
  }
  if (method == DivMethod::automatic)
    method = ell <= 2 ? DivMethod::quadrature : DivMethod::monte_carlo;
  if (method == DivMethod::quadrature) {
    if (ell > 2) throw std::invalid_argument("d_ell: quadrature supports ell <= 2 only");
    if (opt.grid_step_sigmas > 0.0) return d_ell_grid(theta, theta2, ell, opt);
    return d_ell_quadrature(theta, theta2, ell, opt);
  }
  if (method == DivMethod::monte_carlo) {
    if (!rng) throw std::invalid_argument("d_ell: monte_carlo needs an RNG stream");
    return d_ell_monte_carlo(theta, theta2, ell, *rng, opt);
  }
  throw std::invalid_argument("d_ell: unsupported method for continuous parameters");
}

LipschitzReport d_ell_lipschitz_bound(const HmmParams& theta, const HmmParams& theta2, int ell,
                                      RandomStream* rng, const DistanceOptions& opt) {
  check_same_space(theta, theta2);
  if (theta.k() != theta2.k())
    throw std::invalid_argument("d_ell_lipschitz_bound: state counts differ");
  const auto mu = stationary_distribution(theta.Q);
  const auto mu2 = stationary_distribution(theta2.Q);
  LipschitzReport rep;
  for (int i = 0; i < theta.k(); ++i) rep.mu_term += std::abs(mu[i] - mu2[i]);
  double max_q = 0.0;
  for (std::size_t i = 0; i < theta.Q.p.size(); ++i)
    max_q = std::max(max_q, std::abs(theta.Q.p[i] - theta2.Q.p[i]));
  rep.q_term = theta.k() * (ell - 1) * max_q;
  rep.emission_term = ell * emission_metric_d(theta.emissions, theta2.emissions);
  rep.bound = rep.mu_term + rep.q_term + rep.emission_term;
  const auto d = d_ell(theta, theta2, ell, DivMethod::automatic, rng, opt);
  rep.d_ell_value = d.value;
  const double tol = 1e-9 + d.err_bound + 3.0 * d.mc_se;
  rep.margin = rep.bound + tol - d.value;
  rep.ok = rep.margin >= 0.0;
  return rep;
}

namespace {

// Conditional one-step density q(y) = sum_i pred_i f_i(y) and the per-step
// conditional KL between two such mixtures, exact sum (discrete) or
// quadrature (continuous). Returns +inf on support violation.
double conditional_kl_discrete(const std::vector<double>& pred_star,
                               const std::vector<const DiscretePmf*>& fstar,
                               const std::vector<double>& pred,
                               const std::vector<const DiscretePmf*>& f) {
  const int ks = static_cast<int>(fstar.size());
  const int ko = static_cast<int>(f.size());
  long long v = 0;
  for (const auto* pm : fstar) v = std::max<long long>(v, pm->v_max());
  for (const auto* pm : f) v = std::max<long long>(v, pm->v_max());
  double kl = 0.0;
  double covered = 0.0;
  long long y = 1;
  while (y <= v || (1.0 - covered) > 1e-15) {
    double qs = 0.0, q = 0.0;
    for (int i = 0; i < ks; ++i) qs += pred_star[i] * fstar[i]->at(y);
    for (int i = 0; i < ko; ++i) q += pred[i] * f[i]->at(y);
    if (qs > 0.0) {
      if (q <= 0.0) return kInf;
      kl += qs * std::log(qs / q);
      covered += qs;
    }
    ++y;
    if (y > v + 8000000) break;
  }
  return kl;
}

double conditional_kl_continuous(const std::vector<double>& pred_star,
                                 const std::vector<const GaussianMixtureDensity*>& fstar,
                                 const std::vector<double>& pred,
                                 const std::vector<const GaussianMixtureDensity*>& f,
                                 double lo, double hi, const std::vector<double>& breaks) {
  const auto qs_at = [&](double y) {
    double s = 0.0;
    for (std::size_t i = 0; i < fstar.size(); ++i) s += pred_star[i] * fstar[i]->at(y);
    return s;
  };
  const auto q_at = [&](double y) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += pred[i] * f[i]->at(y);
    return s;
  };
  const auto integrand = [&](double y) {
    const double a = qs_at(y);
    if (a <= 0.0) return 0.0;
    return a * std::log(a / q_at(y));
  };
  QuadratureOptions opt{1e-9, 48};
  return integrate_with_breaks(integrand, lo, hi, breaks, opt);
}

DivergenceReport kl_exact_discrete(const HmmParams& ts, const HmmParams& th, int n,
                                   const KlOptions& opt) {
  for (const auto& f : ts.emissions)
    if (std::get<DiscretePmf>(f).tail_mass > 0.0)
      throw std::invalid_argument(
          "kl_path: exact enumeration needs a tail-free truth; use chain_rule");
  const long long v = max_vmax(ts);
  double seqs = 1.0;
  for (int t = 0; t < n; ++t) seqs *= static_cast<double>(v);
  if (seqs > static_cast<double>(opt.lattice_budget))
    throw std::invalid_argument("kl_path: V^n exceeds the exact budget; use chain_rule");
  const auto mu_s = stationary_distribution(ts.Q);
  const auto mu_o = stationary_distribution(th.Q);
  const int ks = ts.k(), ko = th.k();
  double kl = 0.0;
  bool infinite = false;
  std::function<void(int, std::vector<double>&, std::vector<double>&)> rec =
      [&](int depth, std::vector<double>& alpha_s, std::vector<double>& alpha_o) {
        if (infinite) return;
        if (depth == n) {
          double ps = 0.0, po = 0.0;
          for (double x : alpha_s) ps += x;
          for (double x : alpha_o) po += x;
          if (ps > 0.0) {
            if (po <= 0.0) {
              infinite = true;
              return;
            }
            kl += ps * std::log(ps / po);
          }
          return;
        }
        std::vector<double> bs(ks), bo(ko);
        if (depth == 0) {
          bs = mu_s;
          bo = mu_o;
        } else {
          for (int j = 0; j < ks; ++j) {
            double s = 0.0;
            for (int i = 0; i < ks; ++i) s += alpha_s[i] * ts.Q(i, j);
            bs[j] = s;
          }
          for (int j = 0; j < ko; ++j) {
            double s = 0.0;
            for (int i = 0; i < ko; ++i) s += alpha_o[i] * th.Q(i, j);
            bo[j] = s;
          }
        }
        for (long long y = 1; y <= v; ++y) {
          std::vector<double> na(ks), no(ko);
          for (int j = 0; j < ks; ++j)
            na[j] = bs[j] * std::get<DiscretePmf>(ts.emissions[j]).at(y);
          for (int j = 0; j < ko; ++j)
            no[j] = bo[j] * std::get<DiscretePmf>(th.emissions[j]).at(y);
          rec(depth + 1, na, no);
        }
      };
  std::vector<double> empty_s, empty_o;
  rec(0, empty_s, empty_o);
  DivergenceReport rep;
  rep.method = DivMethod::exact_enumeration;
  rep.n = n;
  rep.infinite = infinite;
  rep.value = infinite ? kInf : kl;
  return rep;
}

DivergenceReport kl_chain_rule(const HmmParams& ts, const HmmParams& th, int n, RandomStream& rng,
                               const KlOptions& opt) {
  const auto mu_s = stationary_distribution(ts.Q);
  const auto mu_o = stationary_distribution(th.Q);
  const int ko = th.k();
  const bool disc = ts.discrete();
  std::vector<const DiscretePmf*> pmf_s, pmf_o;
  std::vector<const GaussianMixtureDensity*> mix_s, mix_o;
  double lo = 0.0, hi = 0.0;
  std::vector<double> breaks;
  if (disc) {
    for (const auto& f : ts.emissions) pmf_s.push_back(&std::get<DiscretePmf>(f));
    for (const auto& f : th.emissions) pmf_o.push_back(&std::get<DiscretePmf>(f));
  } else {
    for (const auto& f : ts.emissions) mix_s.push_back(&std::get<GaussianMixtureDensity>(f));
    for (const auto& f : th.emissions) mix_o.push_back(&std::get<GaussianMixtureDensity>(f));
    continuous_range(ts, th, 12.0, &lo, &hi, &breaks);
  }
  double sum = 0.0, sum_sq = 0.0;
  bool infinite = false;
  for (long long s = 0; s < opt.mc_sequences && !infinite; ++s) {
    auto draw = simulate(ts, n, rng);
    const auto& y = draw.second;
    std::vector<double> pred_s = mu_s, pred_o = mu_o;
    double path_total = 0.0;
    for (int t = 0; t < n; ++t) {
      const double step = disc ? conditional_kl_discrete(pred_s, pmf_s, pred_o, pmf_o)
                               : conditional_kl_continuous(pred_s, mix_s, pred_o, mix_o, lo, hi, breaks);
      if (std::isinf(step)) {
        infinite = true;
        break;
      }
      path_total += step;
      // advance both filters on the observed y_t
      auto advance = [&](const HmmParams& theta, std::vector<double>& pred) {
        const int k = theta.k();
        std::vector<double> filt(k);
        double norm = 0.0;
        for (int i = 0; i < k; ++i) {
          filt[i] = pred[i] * density_eval(theta.emissions[i], y[t]);
          norm += filt[i];
        }
        if (!(norm > 0.0)) throw std::domain_error("kl_path: zero likelihood under the truth");
        for (int j = 0; j < k; ++j) {
          double v2 = 0.0;
          for (int i = 0; i < k; ++i) v2 += filt[i] / norm * theta.Q(i, j);
          pred[j] = v2;
        }
      };
      advance(ts, pred_s);
      // the other filter can hit zero likelihood: that is a support violation
      double norm_o = 0.0;
      std::vector<double> filt_o(ko);
      for (int i = 0; i < ko; ++i) {
        filt_o[i] = pred_o[i] * density_eval(th.emissions[i], y[t]);
        norm_o += filt_o[i];
      }
      if (!(norm_o > 0.0)) {
        infinite = true;
        break;
      }
      for (int j = 0; j < ko; ++j) {
        double v2 = 0.0;
        for (int i = 0; i < ko; ++i) v2 += filt_o[i] / norm_o * th.Q(i, j);
        pred_o[j] = v2;
      }
    }
    sum += path_total;
    sum_sq += path_total * path_total;
  }
  DivergenceReport rep;
  rep.method = DivMethod::chain_rule;
  rep.n = n;
  rep.n_draws = opt.mc_sequences;
  rep.infinite = infinite;
  if (infinite) {
    rep.value = kInf;
    return rep;
  }
  rep.value = sum / opt.mc_sequences;
  const double var = std::max(0.0, sum_sq / opt.mc_sequences - rep.value * rep.value);
  rep.mc_se = std::sqrt(var / opt.mc_sequences);
  return rep;
}

}  // namespace

DivergenceReport kl_path(const HmmParams& theta_star, const HmmParams& theta, int n,
                         DivMethod method, RandomStream* rng, const KlOptions& opt) {
  check_same_space(theta_star, theta);
  if (n < 1) throw std::invalid_argument("kl_path: n must be >= 1");
  if (method == DivMethod::automatic) {
    if (theta_star.discrete()) {
      bool tail_free = true;
      for (const auto& f : theta_star.emissions)
        if (std::get<DiscretePmf>(f).tail_mass > 0.0) tail_free = false;
      const double v = max_vmax(theta_star);
      method = tail_free && std::pow(v, n) <= static_cast<double>(opt.lattice_budget)
                   ? DivMethod::exact_enumeration
                   : DivMethod::chain_rule;
    } else {
      method = DivMethod::chain_rule;
    }
  }
  if (method == DivMethod::exact_enumeration) {
    if (!theta_star.discrete())
      throw std::invalid_argument("kl_path: exact enumeration is discrete-only");
    return kl_exact_discrete(theta_star, theta, n, opt);
  }
  if (method == DivMethod::chain_rule) {
    if (!rng) throw std::invalid_argument("kl_path: chain_rule needs an RNG stream");
    return kl_chain_rule(theta_star, theta, n, *rng, opt);
  }
  throw std::invalid_argument("kl_path: unsupported method");
}

namespace {

// Per-step conditional mean/second-moment of Z_{t+1} = log(q*/q)(Y_{t+1})
// given predictive rows; exact sum over the truth lattice (tail-free truth).
void step_moments_discrete(const std::vector<double>& pred_s,
                           const std::vector<const DiscretePmf*>& fs,
                           const std::vector<double>& pred_o,
                           const std::vector<const DiscretePmf*>& fo, long long v, double* e1,
                           double* e2, bool* infinite) {
  double m1 = 0.0, m2 = 0.0;
  for (long long y = 1; y <= v; ++y) {
    double qs = 0.0, qo = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) qs += pred_s[i] * fs[i]->at(y);
    for (std::size_t i = 0; i < fo.size(); ++i) qo += pred_o[i] * fo[i]->at(y);
    if (qs <= 0.0) continue;
    if (qo <= 0.0) {
      *infinite = true;
      return;
    }
    const double z = std::log(qs / qo);
    m1 += qs * z;
    m2 += qs * z * z;
  }
  *e1 = m1;
  *e2 = m2;
}

VarianceReport llr_exact_discrete(const HmmParams& ts, const HmmParams& th, int n,
                                  const KlOptions& opt) {
  for (const auto& f : ts.emissions)
    if (std::get<DiscretePmf>(f).tail_mass > 0.0)
      throw std::invalid_argument("llr_variance: exact mode needs a tail-free truth");
  const long long v = max_vmax(ts);
  double seqs = 1.0;
  for (int t = 0; t < n; ++t) seqs *= static_cast<double>(v);
  if (seqs > static_cast<double>(opt.lattice_budget))
    throw std::invalid_argument("llr_variance: V^n exceeds the exact budget");
  const auto mu_s = stationary_distribution(ts.Q);
  const auto mu_o = stationary_distribution(th.Q);
  const int ks = ts.k(), ko = th.k();
  std::vector<const DiscretePmf*> fs, fo;
  for (const auto& f : ts.emissions) fs.push_back(&std::get<DiscretePmf>(f));
  for (const auto& f : th.emissions) fo.push_back(&std::get<DiscretePmf>(f));

  double ez = 0.0, ez2 = 0.0, ea = 0.0, ea2 = 0.0, s1 = 0.0;
  bool infinite = false;
  // DFS carrying unnormalized filters (alpha) for both parameters plus the
  // compensator sum A = sum of per-step conditional means along the prefix.
  std::function<void(int, const std::vector<double>&, const std::vector<double>&, double)> rec =
      [&](int depth, const std::vector<double>& alpha_s, const std::vector<double>& alpha_o,
          double a_sum) {
        if (infinite) return;
        double ps = 0.0, po = 0.0;
        std::vector<double> pred_s(ks), pred_o(ko);
        if (depth == 0) {
          ps = 1.0;
          po = 1.0;
          pred_s = mu_s;
          pred_o = mu_o;
        } else {
          for (double x : alpha_s) ps += x;
          for (double x : alpha_o) po += x;
          if (ps <= 0.0) return;  // null prefix under the truth
          if (po <= 0.0) {
            infinite = true;
            return;
          }
          for (int j = 0; j < ks; ++j) {
            double s = 0.0;
            for (int i = 0; i < ks; ++i) s += alpha_s[i] * ts.Q(i, j);
            pred_s[j] = s / ps;
          }
          for (int j = 0; j < ko; ++j) {
            double s = 0.0;
            for (int i = 0; i < ko; ++i) s += alpha_o[i] * th.Q(i, j);
            pred_o[j] = s / po;
          }
        }
        if (depth == n) {
          const double z = std::log(ps / po);
          ez += ps * z;
          ez2 += ps * z * z;
          ea += ps * a_sum;
          ea2 += ps * a_sum * a_sum;
          return;
        }
        double e1 = 0.0, e2 = 0.0;
        step_moments_discrete(pred_s, fs, pred_o, fo, v, &e1, &e2, &infinite);
        if (infinite) return;
        s1 += ps * (e2 - e1 * e1);
        for (long long y = 1; y <= v; ++y) {
          std::vector<double> na(ks), no(ko);
          for (int j = 0; j < ks; ++j) na[j] = ps * pred_s[j] * fs[j]->at(y);
          for (int j = 0; j < ko; ++j) no[j] = po * pred_o[j] * fo[j]->at(y);
          rec(depth + 1, na, no, a_sum + e1);
        }
      };
  rec(0, {}, {}, 0.0);

  VarianceReport rep;
  rep.method = DivMethod::exact_enumeration;
  rep.infinite = infinite;
  if (infinite) {
    rep.variance = kInf;
    rep.s1 = kInf;
    rep.s2 = kInf;
    return rep;
  }
  rep.variance = std::max(0.0, ez2 - ez * ez);
  rep.s1 = std::max(0.0, s1);
  rep.s2 = std::max(0.0, ea2 - ea * ea);
  return rep;
}

VarianceReport llr_monte_carlo(const HmmParams& ts, const HmmParams& th, int n, RandomStream& rng,
                               const KlOptions& opt) {
  const auto mu_s = stationary_distribution(ts.Q);
  const auto mu_o = stationary_distribution(th.Q);
  const int ks = ts.k(), ko = th.k();
  const bool disc = ts.discrete();
  std::vector<const DiscretePmf*> fs, fo;
  std::vector<const GaussianMixtureDensity*> ms, mo;
  long long v = 0;
  double lo = 0.0, hi = 0.0;
  std::vector<double> breaks;
  if (disc) {
    for (const auto& f : ts.emissions) {
      fs.push_back(&std::get<DiscretePmf>(f));
      v = std::max<long long>(v, fs.back()->v_max());
    }
    for (const auto& f : th.emissions) {
      fo.push_back(&std::get<DiscretePmf>(f));
      v = std::max<long long>(v, fo.back()->v_max());
    }
    v += 2000;  // cover geometric tails far past any plausible mass
  } else {
    for (const auto& f : ts.emissions) ms.push_back(&std::get<GaussianMixtureDensity>(f));
    for (const auto& f : th.emissions) mo.push_back(&std::get<GaussianMixtureDensity>(f));
    continuous_range(ts, th, 12.0, &lo, &hi, &breaks);
  }
  std::vector<double> zs(opt.mc_sequences), as(opt.mc_sequences);
  double s1_acc = 0.0;
  bool infinite = false;
  for (long long s = 0; s < opt.mc_sequences && !infinite; ++s) {
    auto draw = simulate(ts, n, rng);
    const auto& y = draw.second;
    std::vector<double> pred_s = mu_s, pred_o = mu_o;
    double llr = 0.0, a_sum = 0.0, s1_path = 0.0;
    for (int t = 0; t < n && !infinite; ++t) {
      double e1 = 0.0, e2 = 0.0;
      if (disc) {
        step_moments_discrete(pred_s, fs, pred_o, fo, v, &e1, &e2, &infinite);
      } else {
        const auto qs_at = [&](double yy) {
          double acc = 0.0;
          for (std::size_t i = 0; i < ms.size(); ++i) acc += pred_s[i] * ms[i]->at(yy);
          return acc;
        };
        const auto qo_at = [&](double yy) {
          double acc = 0.0;
          for (std::size_t i = 0; i < mo.size(); ++i) acc += pred_o[i] * mo[i]->at(yy);
          return acc;
        };
        QuadratureOptions qopt{1e-9, 48};
        e1 = integrate_with_breaks(
            [&](double yy) {
              const double a = qs_at(yy);
              return a > 0.0 ? a * std::log(a / qo_at(yy)) : 0.0;
            },
            lo, hi, breaks, qopt);
        e2 = integrate_with_breaks(
            [&](double yy) {
              const double a = qs_at(yy);
              if (a <= 0.0) return 0.0;
              const double z = std::log(a / qo_at(yy));
              return a * z * z;
            },
            lo, hi, breaks, qopt);
      }
      if (infinite) break;
      double qs_y = 0.0, qo_y = 0.0;
      for (int i = 0; i < ks; ++i) qs_y += pred_s[i] * density_eval(ts.emissions[i], y[t]);
      for (int i = 0; i < ko; ++i) qo_y += pred_o[i] * density_eval(th.emissions[i], y[t]);
      if (!(qo_y > 0.0)) {
        infinite = true;
        break;
      }
      const double z_t = std::log(qs_y / qo_y);
      llr += z_t;
      a_sum += e1;
      s1_path += (z_t - e1) * (z_t - e1);
      auto advance = [&](const HmmParams& theta, std::vector<double>& pred, double norm_y) {
        const int k = theta.k();
        std::vector<double> filt(k);
        for (int i = 0; i < k; ++i)
          filt[i] = pred[i] * density_eval(theta.emissions[i], y[t]) / norm_y;
        for (int j = 0; j < k; ++j) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) acc += filt[i] * theta.Q(i, j);
          pred[j] = acc;
        }
      };
      advance(ts, pred_s, qs_y);
      advance(th, pred_o, qo_y);
    }
    zs[s] = llr;
    as[s] = a_sum;
    s1_acc += s1_path;
  }
  VarianceReport rep;
  rep.method = DivMethod::monte_carlo;
  rep.n_draws = opt.mc_sequences;
  rep.infinite = infinite;
  if (infinite) {
    rep.variance = kInf;
    return rep;
  }
  const auto sample_var = [](const std::vector<double>& x) {
    double mean = 0.0;
    for (double t : x) mean += t;
    mean /= x.size();
    double acc = 0.0;
    for (double t : x) acc += (t - mean) * (t - mean);
    return acc / (x.size() - 1);
  };
  rep.variance = sample_var(zs);
  rep.s1 = s1_acc / opt.mc_sequences;
  rep.s2 = sample_var(as);
  // asymptotic SE of a sample variance
  double mean = 0.0;
  for (double t : zs) mean += t;
  mean /= zs.size();
  double m4 = 0.0;
  for (double t : zs) m4 += std::pow(t - mean, 4.0);
  m4 /= zs.size();
  rep.mc_se = std::sqrt(std::max(0.0, m4 - rep.variance * rep.variance) /
                        static_cast<double>(opt.mc_sequences));
  return rep;
}

}  // namespace

VarianceReport llr_variance(const HmmParams& theta_star, const HmmParams& theta, int n,
                            DivMethod method, RandomStream* rng, const KlOptions& opt) {
  check_same_space(theta_star, theta);
  if (n < 1) throw std::invalid_argument("llr_variance: n must be >= 1");
  if (method == DivMethod::automatic) {
    if (theta_star.discrete()) {
      bool tail_free = true;
      for (const auto& f : theta_star.emissions)
        if (std::get<DiscretePmf>(f).tail_mass > 0.0) tail_free = false;
      const double v = max_vmax(theta_star);
      method = tail_free && std::pow(v, n) <= static_cast<double>(opt.lattice_budget)
                   ? DivMethod::exact_enumeration
                   : DivMethod::monte_carlo;
    } else {
      method = DivMethod::monte_carlo;
    }
  }
  if (method == DivMethod::exact_enumeration) {
    if (!theta_star.discrete())
      throw std::invalid_argument("llr_variance: exact enumeration is discrete-only");
    return llr_exact_discrete(theta_star, theta, n, opt);
  }
  if (method == DivMethod::monte_carlo || method == DivMethod::chain_rule) {
    if (!rng) throw std::invalid_argument("llr_variance: Monte Carlo needs an RNG stream");
    return llr_monte_carlo(theta_star, theta, n, *rng, opt);
  }
  throw std::invalid_argument("llr_variance: unsupported method");
}

double c_k_constant(int k, double q_star) {
  if (k < 1 || !(q_star > 0.0) || q_star > 1.0 / k + 1e-15)
    throw std::domain_error("c_k_constant: requires 0 < q* <= 1/k");
  return 4.0 + std::log(2.0 * k / q_star) + 1e4 * k * k / std::pow(q_star, 5.0);
}

namespace {

void push_condition(KlNeighborhoodReport* rep, const std::string& name, double lhs, double rhs) {
  KlNeighborhoodCondition c;
  c.name = name;
  c.lhs = lhs;
  c.rhs = rhs;
  c.infinite = std::isinf(lhs) && lhs > 0.0;
  c.pass = !(c.infinite) && lhs <= rhs;
  rep->conditions.push_back(c);
}

}  // namespace

KlNeighborhoodReport kl_neighborhood_check(const std::vector<DiscretePmf>& fstar,
                                           const std::vector<DiscretePmf>& f,
                                           const std::vector<DiscretePmf>& ftilde, long long l_max,
                                           double eps_tilde, double u_n) {
  const int k = static_cast<int>(fstar.size());
  if (static_cast<int>(f.size()) != k || static_cast<int>(ftilde.size()) != k)
    throw std::invalid_argument("kl_neighborhood_check: state count mismatch");
  if (!(eps_tilde > 0.0) || !(u_n >= 1.0))
    throw std::invalid_argument("kl_neighborhood_check: requires eps_tilde > 0, u_n >= 1");
  const double tight = eps_tilde * eps_tilde / u_n;
  const double loose = eps_tilde * eps_tilde;
  KlNeighborhoodReport rep;

  // (A.1): all of N, truth-weighted squared log ratio, worst (i, j) pair.
  double a1 = 0.0;
  for (int i = 0; i < k && !std::isinf(a1); ++i) {
    for (int j = 0; j < k; ++j) {
      double sum = 0.0;
      double rem = 1.0;
      long long y = 1;
      while (rem > 1e-17 && y < 8000000) {
        const double w = fstar[i].at(y);
        rem -= w;
        if (w > 0.0) {
          const double num = fstar[j].at(y);
          const double den = f[j].at(y);
          if (num <= 0.0 || den <= 0.0) {
            if (num != den) {
              sum = kInf;
              break;
            }
          } else {
            const double lg = std::log(num / den);
            sum += w * lg * lg;
          }
        }
        ++y;
      }
      a1 = std::max(a1, sum);
      if (std::isinf(a1)) break;
    }
  }
  push_condition(&rep, "A.1", a1, tight);

  // (A.2): chi-square style distance on S against the truth.
  double a2 = 0.0;
  for (int j = 0; j < k; ++j) {
    double sum = 0.0;
    for (long long y = 1; y <= l_max; ++y) {
      const double num = fstar[j].at(y) - f[j].at(y);
      const double den = fstar[j].at(y);
      if (den <= 0.0) {
        if (std::abs(num) > 0.0) {
          sum = kInf;
          break;
        }
      } else {
        sum += num * num / den;
      }
    }
    a2 = std::max(a2, sum);
  }
  push_condition(&rep, "A.2", a2, tight);

  // (A.3)/(A.4): masses outside S, exact via the stored tails.
  double a3 = 0.0, a4 = 0.0;
  for (int j = 0; j < k; ++j) {
    a3 = std::max(a3, ftilde[j].tail_beyond(l_max));
    a4 = std::max(a4, fstar[j].tail_beyond(l_max));
  }
  push_condition(&rep, "A.3", a3, loose);
  push_condition(&rep, "A.4", a4, tight);

  // (A.5): signed control of log(ftilde/f) on S.
  double a5 = -kInf;
  bool a5_any = false;
  for (int i = 0; i < k; ++i) {
    double sum = 0.0;
    bool bad = false;
    for (long long y = 1; y <= l_max && !bad; ++y) {
      const double w = fstar[i].at(y);
      if (w <= 0.0) continue;
      double best = -kInf;
      for (int j = 0; j < k; ++j) {
        const double num = ftilde[j].at(y);
        const double den = f[j].at(y);
        if (num > 0.0 && den <= 0.0) {
          best = kInf;
          break;
        }
        if (num <= 0.0) continue;  // log -inf never attains the max unless all do
        best = std::max(best, std::log(num / den));
      }
      if (std::isinf(best) && best > 0.0) {
        sum = kInf;
        bad = true;
      } else if (!std::isinf(best)) {
        sum += w * best;
      }
      // all-j -inf contributes -inf: dominated by any finite term; skip
    }
    a5_any = true;
    a5 = std::max(a5, sum);
    if (std::isinf(a5) && a5 > 0.0) break;
  }
  push_condition(&rep, "A.5", a5_any ? a5 : 0.0, loose);

  // (A.6): chi-square style distance on S against the approximant.
  double a6 = 0.0;
  for (int j = 0; j < k; ++j) {
    double sum = 0.0;
    for (long long y = 1; y <= l_max; ++y) {
      const double num = fstar[j].at(y) - ftilde[j].at(y);
      const double den = ftilde[j].at(y);
      if (den <= 0.0) {
        if (std::abs(num) > 0.0) {
          sum = kInf;
          break;
        }
      } else {
        sum += num * num / den;
      }
    }
    a6 = std::max(a6, sum);
  }
  push_condition(&rep, "A.6", a6, loose);

  rep.all_pass = true;
  for (const auto& c : rep.conditions) rep.all_pass = rep.all_pass && c.pass;
  return rep;
}

KlNeighborhoodReport kl_neighborhood_check(const std::vector<GaussianMixtureDensity>& fstar,
                                           const std::vector<GaussianMixtureDensity>& f,
                                           const std::vector<GaussianMixtureDensity>& ftilde,
                                           double t_s, double eps_tilde, double u_n) {
  const int k = static_cast<int>(fstar.size());
  if (static_cast<int>(f.size()) != k || static_cast<int>(ftilde.size()) != k)
    throw std::invalid_argument("kl_neighborhood_check: state count mismatch");
  if (!(eps_tilde > 0.0) || !(u_n >= 1.0) || !(t_s > 0.0))
    throw std::invalid_argument("kl_neighborhood_check: bad arguments");
  const double tight = eps_tilde * eps_tilde / u_n;
  const double loose = eps_tilde * eps_tilde;
  KlNeighborhoodReport rep;

  double lo = -t_s, hi = t_s, sigma_max = 0.0;
  std::vector<double> breaks;
  for (const auto* fam : {&fstar, &f, &ftilde}) {
    for (const auto& mix : *fam) {
      sigma_max = std::max(sigma_max, mix.sigma);
      for (double z : mix.locations) {
        breaks.push_back(z);
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
    }
  }
  const double big = std::max(std::abs(lo), std::abs(hi)) + 12.0 * sigma_max;
  QuadratureOptions qopt{1e-10, 48};

  double a1 = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      a1 = std::max(a1, integrate_with_breaks(
                            [&](double y) {
                              const double w = fstar[i].at(y);
                              if (w <= 0.0) return 0.0;
                              const double lg = std::log(fstar[j].at(y) / f[j].at(y));
                              return w * lg * lg;
                            },
                            -big, big, breaks, qopt));
  push_condition(&rep, "A.1", a1, tight);

  double a2 = 0.0;
  for (int j = 0; j < k; ++j)
    a2 = std::max(a2, integrate_with_breaks(
                          [&](double y) {
                            const double d = fstar[j].at(y) - f[j].at(y);
                            return d * d / fstar[j].at(y);
                          },
                          -t_s, t_s, breaks, qopt));
  push_condition(&rep, "A.2", a2, tight);

  // Gaussian mixture tail mass outside [-T, T], closed form.
  const auto tail_mass = [&](const GaussianMixtureDensity& mix) {
    double s = 0.0;
    for (std::size_t h = 0; h < mix.weights.size(); ++h) {
      const double a = (-t_s - mix.locations[h]) / mix.sigma;
      const double b = (t_s - mix.locations[h]) / mix.sigma;
      const double inside = 0.5 * (std::erf(b / std::sqrt(2.0)) - std::erf(a / std::sqrt(2.0)));
      s += mix.weights[h] * (1.0 - inside);
    }
    return s;
  };
  double a3 = 0.0, a4 = 0.0;
  for (int j = 0; j < k; ++j) {
    a3 = std::max(a3, tail_mass(ftilde[j]));
    a4 = std::max(a4, tail_mass(fstar[j]));
  }
  push_condition(&rep, "A.3", a3, loose);
  push_condition(&rep, "A.4", a4, tight);

  double a5 = 0.0;
  for (int i = 0; i < k; ++i)
    a5 = std::max(a5, integrate_with_breaks(
                          [&](double y) {
                            const double w = fstar[i].at(y);
                            if (w <= 0.0) return 0.0;
                            double best = -kInf;
                            for (int j = 0; j < k; ++j)
                              best = std::max(best, std::log(ftilde[j].at(y) / f[j].at(y)));
                            return w * best;
                          },
                          -t_s, t_s, breaks, qopt));
  push_condition(&rep, "A.5", a5, loose);

  double a6 = 0.0;
  for (int j = 0; j < k; ++j)
    a6 = std::max(a6, integrate_with_breaks(
                          [&](double y) {
                            const double d = fstar[j].at(y) - ftilde[j].at(y);
                            return d * d / ftilde[j].at(y);
                          },
                          -t_s, t_s, breaks, qopt));
  push_condition(&rep, "A.6", a6, loose);

  rep.all_pass = true;
  for (const auto& c : rep.conditions) rep.all_pass = rep.all_pass && c.pass;
  return rep;
}

}  // namespace nphmm
