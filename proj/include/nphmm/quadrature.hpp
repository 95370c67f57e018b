#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace nphmm {

namespace detail {

template <class F>
double adapt_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adapt_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

struct QuadratureOptions {
  double abs_tol = 1e-8;
  int max_depth = 48;
};

/// Adaptive Simpson integration of f over [a, b] to an absolute tolerance.
template <class F>
double integrate(const F& f, double a, double b, QuadratureOptions opt = {}) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adapt_simpson(f, a, b, fa, fm, fb, whole, opt.abs_tol, opt.max_depth);
}

/// Same, but the interval is pre-split at the given interior breakpoints
/// (kinks, mixture component centers); tolerance is shared across panels by width.
template <class F>
double integrate_with_breaks(const F& f, double a, double b, std::vector<double> breaks,
                             QuadratureOptions opt = {}) {
  if (!(b > a)) return 0.0;
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > a) || !(x < b); }),
               breaks.end());
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  const double span = b - a;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    QuadratureOptions panel = opt;
    panel.abs_tol = opt.abs_tol * (breaks[i + 1] - breaks[i]) / span;
    total += integrate(f, breaks[i], breaks[i + 1], panel);
  }
  return total;
}

}  // namespace nphmm
