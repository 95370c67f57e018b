#include "nphmm/transition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nphmm {

double TransitionMatrix::min_entry() const {
  double m = 1.0;
  for (double v : p) m = std::min(m, v);
  return m;
}

void TransitionMatrix::validate(double row_tol) const {
  if (k < 1) throw std::invalid_argument("TransitionMatrix: k must be >= 1");
  if (p.size() != static_cast<std::size_t>(k) * k)
    throw std::invalid_argument("TransitionMatrix: storage size mismatch");
  for (int i = 0; i < k; ++i) {
    double row = 0.0;
    for (int j = 0; j < k; ++j) {
      const double v = (*this)(i, j);
      if (!(v >= 0.0 && v <= 1.0) || !std::isfinite(v))
        throw std::invalid_argument("TransitionMatrix: entry outside [0, 1]");
      row += v;
    }
    if (std::abs(row - 1.0) > row_tol)
      throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " sums to " +
                                  std::to_string(row));
  }
}

TransitionMatrix identity_matrix(int k) {
  TransitionMatrix q;
  q.k = k;
  q.p.assign(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) q.at(i, i) = 1.0;
  return q;
}

namespace {

// Reachability closure over the positive-entry graph.
std::vector<std::vector<bool>> reachability(const TransitionMatrix& q) {
  const int k = q.k;
  std::vector<std::vector<bool>> reach(k, std::vector<bool>(k, false));
  for (int s = 0; s < k; ++s) {
    std::vector<int> stack{s};
    reach[s][s] = true;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < k; ++j) {
        if (q(i, j) > 0.0 && !reach[s][j]) {
          reach[s][j] = true;
          stack.push_back(j);
        }
      }
    }
  }
  return reach;
}

// Number of closed communicating classes; the stationary law is unique iff 1.
int closed_class_count(const TransitionMatrix& q) {
  const int k = q.k;
  const auto reach = reachability(q);
  std::vector<bool> essential(k, false);
  for (int i = 0; i < k; ++i) {
    essential[i] = true;
    for (int j = 0; j < k && essential[i]; ++j)
      if (reach[i][j] && !reach[j][i]) essential[i] = false;
  }
  int classes = 0;
  std::vector<bool> seen(k, false);
  for (int i = 0; i < k; ++i) {
    if (!essential[i] || seen[i]) continue;
    ++classes;
    for (int j = 0; j < k; ++j)
      if (essential[j] && reach[i][j] && reach[j][i]) seen[j] = true;
  }
  return classes;
}

std::vector<double> dense_stationary(const TransitionMatrix& q) {
  const int k = q.k;
  // Solve x (Q - I) = 0 with sum(x) = 1: columns of (Q^T - I), last row replaced by ones.
  std::vector<double> a(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> b(k, 0.0);
  for (int r = 0; r < k - 1; ++r)
    for (int j = 0; j < k; ++j) a[static_cast<std::size_t>(r) * k + j] = q(j, r) - (r == j ? 1.0 : 0.0);
  for (int j = 0; j < k; ++j) a[static_cast<std::size_t>(k - 1) * k + j] = 1.0;
  b[k - 1] = 1.0;
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(a[static_cast<std::size_t>(r) * k + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * k + col]))
        piv = r;
    if (std::abs(a[static_cast<std::size_t>(piv) * k + col]) < 1e-300)
      throw std::invalid_argument("stationary_distribution: singular system (no unique stationary law)");
    if (piv != col) {
      for (int j = 0; j < k; ++j)
        std::swap(a[static_cast<std::size_t>(piv) * k + j], a[static_cast<std::size_t>(col) * k + j]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < k; ++r) {
      const double factor = a[static_cast<std::size_t>(r) * k + col] / a[static_cast<std::size_t>(col) * k + col];
      if (factor == 0.0) continue;
      for (int j = col; j < k; ++j)
        a[static_cast<std::size_t>(r) * k + j] -= factor * a[static_cast<std::size_t>(col) * k + j];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(k, 0.0);
  for (int r = k - 1; r >= 0; --r) {
    double s = b[r];
    for (int j = r + 1; j < k; ++j) s -= a[static_cast<std::size_t>(r) * k + j] * x[j];
    x[r] = s / a[static_cast<std::size_t>(r) * k + r];
  }
  double total = 0.0;
  for (double& v : x) {
    v = std::max(v, 0.0);
    total += v;
  }
  for (double& v : x) v /= total;
  return x;
}

std::vector<double> power_stationary(const TransitionMatrix& q) {
  const int k = q.k;
  std::vector<double> x(k, 1.0 / k), next(k, 0.0);
  for (int iter = 0; iter < 1000000; ++iter) {
    // Damped step x <- x (Q + I)/2 keeps the fixed point and kills periodicity.
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += x[i] * q(i, j);
      next[j] = 0.5 * (s + x[j]);
    }
    double diff = 0.0, total = 0.0;
    for (int j = 0; j < k; ++j) total += next[j];
    for (int j = 0; j < k; ++j) {
      next[j] /= total;
      diff += std::abs(next[j] - x[j]);
    }
    x.swap(next);
    if (diff < 1e-13) return x;
  }
  throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

}  // namespace

std::vector<double> stationary_distribution(const TransitionMatrix& q) {
  q.validate();
  if (q.k == 1) return {1.0};
  if (q.min_entry() <= 0.0 && closed_class_count(q) != 1)
    throw std::invalid_argument("stationary_distribution: reducible matrix, stationary law not unique");
  return q.k <= 8 ? dense_stationary(q) : power_stationary(q);
}

MixingReport tv_mixing_check(const TransitionMatrix& q, int m_max) {
  q.validate();
  if (!(q.min_entry() > 0.0))
    throw std::invalid_argument("tv_mixing_check: requires min_entry(Q) > 0");
  const int k = q.k;
  const auto mu = stationary_distribution(q);
  const double decay = 1.0 - q.min_entry();
  MixingReport rep;
  rep.worst_margin = 2.0;
  TransitionMatrix power = q;
  for (int m = 1; m <= m_max; ++m) {
    double gap = 0.0;
    for (int i = 0; i < k; ++i) {
      double tv = 0.0;
      for (int j = 0; j < k; ++j) tv += std::abs(power(i, j) - mu[j]);
      gap = std::max(gap, 0.5 * tv);
    }
    const double bound = std::pow(decay, m);
    rep.tv_gap.push_back(gap);
    rep.bound.push_back(bound);
    const double margin = bound + 1e-12 - gap;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_m = m;
    }
    if (margin < 0.0) rep.pass = false;
    if (m < m_max) {
      TransitionMatrix next;
      next.k = k;
      next.p.assign(static_cast<std::size_t>(k) * k, 0.0);
      for (int i = 0; i < k; ++i)
        for (int l = 0; l < k; ++l) {
          const double v = power(i, l);
          if (v == 0.0) continue;
          for (int j = 0; j < k; ++j) next.at(i, j) += v * q(l, j);
        }
      power = std::move(next);
    }
  }
  return rep;
}

}  // namespace nphmm
