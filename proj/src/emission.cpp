#include "nphmm/emission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nphmm/quadrature.hpp"

namespace nphmm {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double square(double x) { return x * x; }

}  // namespace

double DiscretePmf::at(long long l) const {
  if (l < 1) return 0.0;
  if (l <= v_max()) return probs[static_cast<std::size_t>(l - 1)];
  if (tail_mass <= 0.0) return 0.0;
  // Geometric continuation: first tail point carries (1 - r) of the tail mass.
  const long long j = l - v_max();
  return tail_mass * (1.0 - tail_rate) * std::pow(tail_rate, static_cast<double>(j - 1));
}

double DiscretePmf::tail_beyond(long long l) const {
  if (l < 1) return 1.0;
  if (l >= v_max()) {
    if (tail_mass <= 0.0) return 0.0;
    return tail_mass * std::pow(tail_rate, static_cast<double>(l - v_max()));
  }
  double s = tail_mass;
  for (long long i = v_max(); i > l; --i) s += probs[static_cast<std::size_t>(i - 1)];
  return s;
}

void DiscretePmf::validate() const {
  if (probs.empty() && tail_mass <= 0.0) throw std::invalid_argument("DiscretePmf: empty support");
  double total = tail_mass;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("DiscretePmf: negative or non-finite entry");
    total += p;
  }
  if (!(tail_mass >= 0.0)) throw std::invalid_argument("DiscretePmf: negative tail mass");
  if (tail_mass > 0.0 && !(tail_rate >= 0.0 && tail_rate < 1.0))
    throw std::invalid_argument("DiscretePmf: tail rate must lie in [0, 1)");
  if (std::abs(total - 1.0) > kMassTol)
    throw std::invalid_argument("DiscretePmf: mass " + std::to_string(total) + " != 1 within 1e-12");
}

double GaussianMixtureDensity::at(double y) const {
  const double inv_sigma = 1.0 / sigma;
  double s = 0.0;
  for (std::size_t h = 0; h < weights.size(); ++h) {
    const double z = (y - locations[h]) * inv_sigma;
    s += weights[h] * std::exp(-0.5 * z * z);
  }
  return s * kInvSqrt2Pi * inv_sigma;
}

void GaussianMixtureDensity::validate() const {
  if (weights.empty() || weights.size() != locations.size())
    throw std::invalid_argument("GaussianMixtureDensity: weights/locations size mismatch");
  if (!(sigma > 0.0)) throw std::invalid_argument("GaussianMixtureDensity: sigma must be > 0");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("GaussianMixtureDensity: bad weight");
    total += w;
  }
  for (double z : locations)
    if (!std::isfinite(z)) throw std::invalid_argument("GaussianMixtureDensity: non-finite location");
  if (std::abs(total - 1.0) > kMassTol)
    throw std::invalid_argument("GaussianMixtureDensity: weights sum to " + std::to_string(total));
}

bool is_discrete(const EmissionDensity& f) { return std::holds_alternative<DiscretePmf>(f); }

void validate_emission(const EmissionDensity& f) {
  std::visit([](const auto& d) { d.validate(); }, f);
}

double density_eval(const EmissionDensity& f, double y) {
  if (const auto* pmf = std::get_if<DiscretePmf>(&f)) {
    if (std::floor(y) != y || !std::isfinite(y))
      throw std::domain_error("density_eval: non-integer observation against a discrete pmf");
    return pmf->at(static_cast<long long>(y));
  }
  return std::get<GaussianMixtureDensity>(f).at(y);
}

namespace {

double l1_discrete(const DiscretePmf& f, const DiscretePmf& g) {
  const long long v = std::max(f.v_max(), g.v_max());
  double total = 0.0;
  for (long long l = 1; l <= v; ++l) total += std::abs(f.at(l) - g.at(l));
  // Both are geometric beyond v; walk the tails until what is left cannot
  // matter at the 1e-15 level.
  double rem_f = f.tail_beyond(v);
  double rem_g = g.tail_beyond(v);
  long long l = v + 1;
  while (rem_f + rem_g > 1e-15 && l < v + 4000000) {
    const double pf = f.at(l);
    const double pg = g.at(l);
    total += std::abs(pf - pg);
    rem_f -= pf;
    rem_g -= pg;
    ++l;
  }
  return total;
}

double l1_continuous(const GaussianMixtureDensity& f, const GaussianMixtureDensity& g) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double sigma_max = std::max(f.sigma, g.sigma);
  std::vector<double> breaks;
  for (const auto* mix : {&f, &g}) {
    for (double z : mix->locations) {
      lo = std::min(lo, z);
      hi = std::max(hi, z);
      breaks.push_back(z);
    }
  }
  lo -= 8.0 * sigma_max;
  hi += 8.0 * sigma_max;
  const auto integrand = [&](double y) { return std::abs(f.at(y) - g.at(y)); };
  QuadratureOptions opt;
  opt.abs_tol = 1e-6;
  return integrate_with_breaks(integrand, lo, hi, breaks, opt);
}

}  // namespace

double l1_density_distance(const EmissionDensity& f, const EmissionDensity& g) {
  if (is_discrete(f) != is_discrete(g))
    throw std::invalid_argument("l1_density_distance: mixed discrete/continuous operands");
  if (is_discrete(f)) return l1_discrete(std::get<DiscretePmf>(f), std::get<DiscretePmf>(g));
  return l1_continuous(std::get<GaussianMixtureDensity>(f), std::get<GaussianMixtureDensity>(g));
}

double emission_metric_d(const std::vector<EmissionDensity>& f,
                         const std::vector<EmissionDensity>& g) {
  if (f.size() != g.size()) throw std::invalid_argument("emission_metric_d: state count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    worst = std::max(worst, l1_density_distance(f[i], g[i]));
  return worst;
}

void EnvelopeClassSpec::validate() const {
  if (!(m > 0.0 && c > 0.0 && big_k > 0.0 && d_env > 0.0 && delta > 0.0))
    throw std::invalid_argument("EnvelopeClassSpec: all fields must be > 0");
}

DiscretePmf make_envelope_pmf(const EnvelopeClassSpec& spec, const std::string& family,
                              double rate, int v_max) {
  spec.validate();
  if (v_max < 1) throw std::invalid_argument("make_envelope_pmf: V_max must be >= 1");
  DiscretePmf pmf;
  pmf.probs.resize(static_cast<std::size_t>(v_max));
  if (family == "exp") {
    if (!(rate > 0.0)) throw std::invalid_argument("make_envelope_pmf: exp family needs rate > 0");
    // f(l) = (e^c - 1) e^{-c l} sums to 1 over l >= 1; tail past V is e^{-c V}.
    const double norm = std::expm1(rate);
    for (int l = 1; l <= v_max; ++l) pmf.probs[l - 1] = norm * std::exp(-rate * l);
    pmf.tail_mass = std::exp(-rate * v_max);
    pmf.tail_rate = std::exp(-rate);
  } else if (family == "gauss" || family == "poly") {
    double total = 0.0;
    for (int l = 1; l <= v_max; ++l) {
      const double v = family == "gauss" ? std::exp(-rate * static_cast<double>(l) * l)
                                         : std::pow(static_cast<double>(l), -rate);
      pmf.probs[l - 1] = v;
      total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("make_envelope_pmf: degenerate family");
    for (double& p : pmf.probs) p /= total;
  } else if (family == "uniform") {
    for (double& p : pmf.probs) p = 1.0 / v_max;
  } else {
    throw std::invalid_argument("make_envelope_pmf: unknown family '" + family + "'");
  }
  pmf.validate();
  const EnvelopeReport rep = check_envelope_membership(pmf, spec);
  if (!rep.pass)
    throw std::invalid_argument("make_envelope_pmf: family violates the envelope spec (" +
                                rep.reason + " at l=" + std::to_string(rep.first_violation) + ")");
  return pmf;
}

EnvelopeReport check_envelope_membership(const DiscretePmf& pmf, const EnvelopeClassSpec& spec) {
  spec.validate();
  EnvelopeReport rep;
  rep.worst_pointwise_margin = std::numeric_limits<double>::infinity();
  long long l_sup = 0;  // last strictly positive stored entry
  for (long long l = pmf.v_max(); l >= 1; --l) {
    if (pmf.probs[static_cast<std::size_t>(l - 1)] > 0.0) {
      l_sup = l;
      break;
    }
  }
  if (pmf.tail_mass > 0.0) l_sup = pmf.v_max();
  if (l_sup == 0) {
    rep.reason = "empty support";
    return rep;
  }
  // Pointwise envelope over the support range.
  for (long long l = 1; l <= l_sup; ++l) {
    const double env = spec.d_env * std::exp(-spec.c * std::pow(static_cast<double>(l), spec.m));
    const double margin = env - pmf.at(l);
    if (margin < rep.worst_pointwise_margin) rep.worst_pointwise_margin = margin;
    if (pmf.at(l) > env * (1.0 + 1e-12)) {
      rep.reason = "pointwise envelope violated";
      rep.first_violation = l;
      return rep;
    }
  }
  if (pmf.tail_mass > 0.0) {
    // A geometric continuation stays under exp(-c l^m) iff it is under at the
    // first tail point and its ratio is at most the envelope's first step-down
    // (envelope steps only flatten for m <= 1; for m > 1 they steepen forever,
    // so any geometric tail eventually crosses).
    const long long v = pmf.v_max();
    if (spec.m > 1.0 && pmf.tail_rate > 0.0) {
      rep.reason = "geometric tail eventually exceeds a super-exponential envelope";
      rep.first_violation = v + 1;
      return rep;
    }
    const double step = std::exp(
        -spec.c * (std::pow(static_cast<double>(v + 2), spec.m) - std::pow(static_cast<double>(v + 1), spec.m)));
    if (pmf.tail_rate > step * (1.0 + 1e-12)) {
      rep.reason = "tail ratio exceeds envelope decay";
      rep.first_violation = v + 1;
      return rep;
    }
    const double env_first = spec.d_env * std::exp(-spec.c * std::pow(static_cast<double>(v + 1), spec.m));
    if (pmf.at(v + 1) > env_first * (1.0 + 1e-12)) {
      rep.reason = "pointwise envelope violated";
      rep.first_violation = v + 1;
      return rep;
    }
  }
  // Log-sum growth clause. Zero mass strictly inside the support makes the
  // partial sums infinite.
  for (long long l = 1; l <= l_sup; ++l) {
    if (pmf.at(l) <= 0.0) {
      rep.reason = "zero entry inside the support range (-log f infinite)";
      rep.first_violation = l;
      return rep;
    }
  }
  if (l_sup >= 10) {
    std::vector<double> s(static_cast<std::size_t>(l_sup) + 1, 0.0);
    for (long long l = 1; l <= l_sup; ++l)
      s[static_cast<std::size_t>(l)] =
          s[static_cast<std::size_t>(l - 1)] - std::log(pmf.at(l)) / static_cast<double>(l);
    const long long fit_hi = std::max<long long>(10, (l_sup + 1) / 2);
    double c_fit = 0.0;
    for (long long n = 10; n <= fit_hi; ++n)
      c_fit = std::max(c_fit, s[static_cast<std::size_t>(n)] / std::pow(static_cast<double>(n), spec.big_k));
    for (long long n = fit_hi + 1; n <= l_sup; ++n) {
      const double ratio = s[static_cast<std::size_t>(n)] / std::pow(static_cast<double>(n), spec.big_k);
      if (ratio > 1.5 * c_fit) {
        rep.reason = "log-sum grows faster than N^K";
        rep.first_violation = n;
        return rep;
      }
    }
  }
  rep.pass = true;
  return rep;
}

void HolderSpec::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("HolderSpec: beta must be > 0");
  if (!(gamma0 > 0.0 && gamma_ij > 0.0 && gamma_ij < gamma0))
    throw std::invalid_argument("HolderSpec: requires 0 < gamma_ij < gamma0");
  if (!(m0 > 0.0 && tau0 > 0.0 && m_ij > 0.0 && tau_ij > 0.0))
    throw std::invalid_argument("HolderSpec: tail constants must be > 0");
  if (!(y_lo >= 0.0 && y_hi > y_lo)) throw std::invalid_argument("HolderSpec: bad (T3) window");
}

TailLinkReport tail_link_check(const std::vector<DiscretePmf>& fstar,
                               const EnvelopeClassSpec& spec,
                               const std::vector<long long>& n_grid) {
  spec.validate();
  TailLinkReport rep;
  const double exponent = spec.c - spec.delta;
  for (long long n : n_grid) {
    double worst = 0.0;
    for (const auto& fi : fstar) {
      for (const auto& fj : fstar) {
        double sum = 0.0;
        double rem = fi.tail_beyond(n - 1);
        long long l = n;
        while (rem > 1e-18 && l < n + 4000000) {
          const double p = fi.at(l);
          const double q = fj.at(l);
          if (p > 0.0) {
            if (q <= 0.0) {
              sum = std::numeric_limits<double>::infinity();
              break;
            }
            sum += p * square(std::log(q));
          }
          rem -= p;
          ++l;
        }
        worst = std::max(worst, sum);
      }
    }
    const double bound = std::exp(-std::pow(static_cast<double>(n), spec.m) * exponent);
    rep.grid.push_back(static_cast<double>(n));
    rep.lhs.push_back(worst);
    rep.bound.push_back(bound);
    rep.ratio.push_back(worst / bound);
  }
  // "Bounded ratio" in the assumption's sense: the ratio must not blow up
  // along the grid; flag growth beyond 3x the early-grid level.
  if (!rep.ratio.empty()) {
    double head = 0.0;
    const std::size_t split = std::max<std::size_t>(1, rep.ratio.size() / 2);
    for (std::size_t i = 0; i < split; ++i) head = std::max(head, rep.ratio[i]);
    for (std::size_t i = split; i < rep.ratio.size(); ++i)
      if (!(rep.ratio[i] <= 3.0 * head)) rep.satisfied = false;
    if (!rep.satisfied) rep.detail = "tail ratio grows along the N grid";
  }
  return rep;
}

TailLinkReport tail_link_t2_check(const std::vector<GaussianMixtureDensity>& fstar,
                                  const HolderSpec& spec, double t_min, double y_max) {
  spec.validate();
  TailLinkReport rep;
  double sigma_min = std::numeric_limits<double>::infinity();
  for (const auto& f : fstar) sigma_min = std::min(sigma_min, f.sigma);
  const double step = sigma_min / 10.0;
  for (double a = t_min; a <= y_max; a += step) {
    double worst = 0.0;
    for (double y : {a, -a}) {
      for (const auto& fi : fstar) {
        for (const auto& fj : fstar) {
          const double lhs = fi.at(y);
          const double bound = fj.at(y) * spec.m_ij * std::exp(spec.tau_ij * std::pow(std::abs(y), spec.gamma_ij));
          if (bound > 0.0) worst = std::max(worst, lhs / bound);
          else if (lhs > 0.0) worst = std::numeric_limits<double>::infinity();
        }
      }
    }
    rep.grid.push_back(a);
    rep.lhs.push_back(worst);
    rep.bound.push_back(1.0);
    rep.ratio.push_back(worst);
    if (!(worst <= 1.0 + 1e-9)) rep.satisfied = false;
  }
  if (!rep.satisfied) rep.detail = "(T2) cross-tail bound violated on the grid";
  return rep;
}

bool holder_t3_check(const GaussianMixtureDensity& f, const HolderSpec& spec) {
  spec.validate();
  const double step = f.sigma / 10.0;
  double prev = f.at(-spec.y_hi);
  for (double y = -spec.y_hi + step; y <= -spec.y_lo + 1e-12; y += step) {
    const double cur = f.at(y);
    if (cur < prev - 1e-12) return false;
    prev = cur;
  }
  prev = f.at(spec.y_lo);
  for (double y = spec.y_lo + step; y <= spec.y_hi + 1e-12; y += step) {
    const double cur = f.at(y);
    if (cur > prev + 1e-12) return false;
    prev = cur;
  }
  return true;
}

}  // namespace nphmm
