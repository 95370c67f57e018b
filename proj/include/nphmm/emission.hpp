#pragma once

#include <string>
#include <variant>
#include <vector>

namespace nphmm {

/// Pmf on {1, ..., V_max} with an explicit residual tail.
///
/// Mass beyond V_max follows a geometric continuation with ratio tail_rate:
/// f(V_max + j) = tail_mass * (1 - tail_rate) * tail_rate^(j-1), so the stored
/// tail_mass is exact and normalization never depends on the truncation point.
struct DiscretePmf {
  std::vector<double> probs;  // probs[l-1] = f(l)
  double tail_mass = 0.0;
  double tail_rate = 0.0;

  int v_max() const { return static_cast<int>(probs.size()); }
  double at(long long l) const;
  double tail_beyond(long long l) const;  // sum of f over {l+1, l+2, ...}
  void validate() const;                  // mass = 1 within 1e-12, entries >= 0
};

/// Finite Gaussian location mixture with a shared bandwidth.
struct GaussianMixtureDensity {
  std::vector<double> weights;
  std::vector<double> locations;
  double sigma = 1.0;

  double at(double y) const;
  void validate() const;  // weights sum to 1 within 1e-12, sigma > 0
};

using EmissionDensity = std::variant<DiscretePmf, GaussianMixtureDensity>;

bool is_discrete(const EmissionDensity& f);
void validate_emission(const EmissionDensity& f);

/// Evaluate f at y. Throws std::domain_error for non-integer y against a pmf.
double density_eval(const EmissionDensity& f, double y);

/// L1 distance ||f - g||_1 in [0, 2]. Discrete: exact sum including both tails.
/// Continuous: adaptive quadrature, absolute tolerance 1e-6, over a range
/// holding all but 1e-8 of both masses. Throws on mixed tags.
double l1_density_distance(const EmissionDensity& f, const EmissionDensity& g);

/// max_i ||f_i - g_i||_1, the emission metric d.
double emission_metric_d(const std::vector<EmissionDensity>& f,
                         const std::vector<EmissionDensity>& g);

/// Envelope class D(m, c, K): f(l) <= d_env exp(-c l^m) with the log-sum
/// growth clause; delta is the slack used by the tail-link checks.
struct EnvelopeClassSpec {
  double m = 1.0;
  double c = 1.0;
  double big_k = 1.0;
  double d_env = 1.0;
  double delta = 0.1;
  void validate() const;  // all positive
};

struct EnvelopeReport {
  bool pass = false;
  long long first_violation = 0;  // 0 when none
  std::string reason;
  double worst_pointwise_margin = 0.0;  // min over l of envelope(l) - f(l)
};

/// Family: "exp" f ~ exp(-rate l) (closed-form tail), "gauss" f ~ exp(-rate l^2),
/// "uniform" on {1..V_max}, "poly" f ~ l^-rate (truncated).
/// Throws if the normalized pmf violates the envelope spec at any l <= V_max.
DiscretePmf make_envelope_pmf(const EnvelopeClassSpec& spec, const std::string& family,
                              double rate, int v_max);

/// Pointwise envelope over the support range plus the fitted log-sum growth
/// check: C is fitted on N in {10..ceil(V/2)} and the rest of the grid must
/// stay below 1.5 C N^K.
EnvelopeReport check_envelope_membership(const DiscretePmf& pmf, const EnvelopeClassSpec& spec);

/// Holder class tail metadata (T1)-(T3); beta and the polynomial L are
/// recorded but not checked (no finite witness).
struct HolderSpec {
  double beta = 1.0;
  double m0 = 1.0, tau0 = 1.0, gamma0 = 2.0;    // (T1)
  double m_ij = 1.0, tau_ij = 1.0, gamma_ij = 1.0;  // (T2)
  double y_lo = 1.0, y_hi = 8.0, floor_c = 0.0;     // (T3) window
  void validate() const;  // gamma_ij < gamma0
};

struct TailLinkReport {
  bool satisfied = true;
  std::vector<double> grid;    // N values (discrete) or |y| probe points (continuous)
  std::vector<double> lhs;
  std::vector<double> bound;
  std::vector<double> ratio;   // lhs / bound
  std::string detail;
};

/// Tail-link probe: per (i,j), sum_{l >= N} f*_i(l) log^2(f*_j(l)) against
/// exp(-N^m (c - delta)); reports the worst pair per N. Report-only.
TailLinkReport tail_link_check(const std::vector<DiscretePmf>& fstar,
                               const EnvelopeClassSpec& spec,
                               const std::vector<long long>& n_grid);

/// (T2) probe: f_i(y) <= f_j(y) M_ij exp(tau_ij |y|^gamma_ij) on a grid
/// |y| in [t_min, y_max], both signs, step sigma/10.
TailLinkReport tail_link_t2_check(const std::vector<GaussianMixtureDensity>& fstar,
                                  const HolderSpec& spec, double t_min, double y_max);

/// (T3) grid check: f nondecreasing on [-y_hi, -y_lo] and nonincreasing on
/// [y_lo, y_hi], step sigma/10.
bool holder_t3_check(const GaussianMixtureDensity& f, const HolderSpec& spec);

}  // namespace nphmm
