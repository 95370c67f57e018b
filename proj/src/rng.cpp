#include "nphmm/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nphmm {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed)
    : RandomStream(seed, std::to_string(seed)) {}

RandomStream::RandomStream(std::uint64_t seed, std::string lineage)
    : seed_(seed), lineage_(std::move(lineage)), eng_(seed) {}

RandomStream RandomStream::substream(std::uint64_t id) const {
  return RandomStream(mix_seed(seed_, id), lineage_ + "/" + std::to_string(id));
}

std::uint64_t RandomStream::next_u64() { return eng_(); }

double RandomStream::uniform() {
  // 53-bit mantissa, shifted to the open interval.
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double r = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * r;
  have_spare_ = true;
  return u * r;
}

double RandomStream::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0) throw std::domain_error("gamma: shape and scale must be > 0");
  if (shape < 1.0) {
    // Boost shape by one, then scale back (Marsaglia-Tsang remark).
    const double g = gamma(shape + 1.0, 1.0);
    return scale * g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

double RandomStream::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double RandomStream::inverse_gamma(double shape, double scale) {
  return scale / gamma(shape, 1.0);
}

int RandomStream::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw std::domain_error("categorical: weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw std::domain_error("categorical: all weights are zero");
  double u = uniform() * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

long long RandomStream::uniform_int(long long n) {
  if (n <= 0) throw std::domain_error("uniform_int: n must be >= 1");
  const long long v = static_cast<long long>(uniform() * static_cast<double>(n));
  return v >= n ? n - 1 : v;
}

std::vector<double> RandomStream::dirichlet(const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i], 1.0);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

RandomStream stream_from_lineage(const std::string& lineage) {
  if (lineage.empty()) throw std::invalid_argument("empty seed lineage");
  std::size_t pos = 0;
  auto next_token = [&]() {
    const std::size_t sep = lineage.find('/', pos);
    const std::string tok = lineage.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
    pos = sep == std::string::npos ? lineage.size() : sep + 1;
    return std::stoull(tok);
  };
  RandomStream rs(next_token());
  while (pos < lineage.size()) rs = rs.substream(next_token());
  return rs;
}

}  // namespace nphmm
