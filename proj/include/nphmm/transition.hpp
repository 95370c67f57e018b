#pragma once

#include <vector>

namespace nphmm {

/// Row-stochastic k x k matrix, row-major storage.
struct TransitionMatrix {
  int k = 0;
  std::vector<double> p;  // p[i*k + j] = Q(i, j)

  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * k + j]; }
  double& at(int i, int j) { return p[static_cast<std::size_t>(i) * k + j]; }
  double min_entry() const;
  void validate(double row_tol = 1e-12) const;
};

TransitionMatrix identity_matrix(int k);

/// Unique stationary vector mu with mu Q = mu.
/// Dense solve for k <= 8, damped power iteration (tol 1e-13) above.
/// Throws when the chain has no unique stationary law (more than one closed
/// communicating class), which can only happen when min_entry(Q) = 0.
std::vector<double> stationary_distribution(const TransitionMatrix& q);

struct MixingReport {
  bool pass = true;
  int worst_m = 0;
  double worst_margin = 0.0;         // min over m of bound - gap
  std::vector<double> tv_gap;        // max_i TV(Q^m(i,.), mu), m = 1..m_max
  std::vector<double> bound;         // (1 - q)^m
};

/// Checks max_i TV(Q^m(i,.), mu^Q) <= (1-q)^m + 1e-12 for every m <= m_max.
MixingReport tv_mixing_check(const TransitionMatrix& q, int m_max);

}  // namespace nphmm
