#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nphmm {

// SplitMix64 step; used to derive substream seeds so that the same
// (seed, path) pair replays identically on any platform.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Seeded random stream with explicit substream derivation.
///
/// All samplers are implemented locally (polar normal, Marsaglia-Tsang gamma)
/// rather than through std::*_distribution, so a seed lineage string is enough
/// to reproduce any draw bit-for-bit regardless of the standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);
  RandomStream(std::uint64_t seed, std::string lineage);

  // Derived stream; lineage becomes "<parent>/<id>".
  RandomStream substream(std::uint64_t id) const;

  const std::string& lineage() const { return lineage_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();  // strictly inside (0, 1)
  double normal();
  double gamma(double shape, double scale = 1.0);
  double beta(double a, double b);
  double inverse_gamma(double shape, double scale);
  // Index into an unnormalized nonnegative weight vector.
  int categorical(const std::vector<double>& weights);
  long long uniform_int(long long n);  // uniform on {0, ..., n-1}
  std::vector<double> dirichlet(const std::vector<double>& alpha);

 private:
  std::uint64_t seed_ = 0;
  std::string lineage_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Rebuild the stream a lineage string denotes ("<seed>/<id>/<id>...").
RandomStream stream_from_lineage(const std::string& lineage);

}  // namespace nphmm
