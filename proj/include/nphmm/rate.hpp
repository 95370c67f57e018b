#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nphmm/sampler.hpp"

namespace nphmm {

enum class TruthFamily { discrete_geometric, continuous_translation };

/// Ground-truth generator. Discrete: per-state pmfs f_i(l) proportional to
/// exp(-geom_rates[i] * l) on {1..v_max} with the exact geometric continuation
/// beyond. Continuous: translation model Y_t = locations[X_t] + N(0, sigma^2).
struct TruthSpec {
  TruthFamily family = TruthFamily::discrete_geometric;
  TransitionMatrix Q;
  std::vector<double> geom_rates;
  int v_max = 30;
  std::vector<double> locations;
  double noise_sigma = 1.0;

  HmmParams build() const;
  void validate() const;
};

TruthSpec default_discrete_truth();
TruthSpec default_continuous_truth();

struct ExperimentConfig {
  TruthSpec truth;
  GibbsConfig gibbs;  // per-cell seed is derived from `seed`, not gibbs.seed
  std::vector<long long> n_grid;
  int replicates = 1;
  int ell = 2;
  RateSchedule rate;
  double m_mult = 1.0;
  std::uint64_t seed = 1;
  DistanceOptions dist;

  void validate() const;
};

struct RateRecord {
  long long n = 0;
  int replicate = 0;
  double median_d = 0.0;
  double q90_d = 0.0;
  double exceedance_at_m = 0.0;
  double wall_time_s = 0.0;
  std::string seed_lineage;
  std::string error;  // empty on success; failures never abort the grid
};

/// Seconds-returning clock; injectable so replays can be byte-stable.
using WallClock = std::function<double()>;

/// One grid cell, re-runnable in isolation. n_index/replicate address the
/// cell; its RNG substream is derived from (config.seed, n_index, replicate).
RateRecord run_rate_cell(const ExperimentConfig& config, std::size_t n_index, int replicate,
                         const WallClock& clock = nullptr);

/// Full grid in deterministic (n, replicate) order: |n_grid| x replicates
/// rows. Per-cell errors land in the record's error field.
std::vector<RateRecord> run_rate_experiment(const ExperimentConfig& config,
                                            const WallClock& clock = nullptr);

void write_rate_csv(const std::vector<RateRecord>& records, std::ostream& out);
void write_rate_csv(const std::vector<RateRecord>& records, const std::string& path);
std::vector<RateRecord> read_rate_csv(const std::string& path);
extern const char* const kRateCsvHeader;

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;  // bootstrap 2.5% / 97.5% over replicates
  double ci_hi = 0.0;
  int n_points = 0;    // distinct n values entering the fit
};

/// Least squares of log(statistic) on log(n) over per-n medians, with a
/// 1000-resample bootstrap over replicates. statistic is "median_D" or
/// "q90_D"; rows with errors are excluded. Throws on fewer than 3 distinct n.
SlopeFit fit_rate_slope(const std::vector<RateRecord>& records, const std::string& statistic,
                        std::uint64_t boot_seed = 1, int boot_resamples = 1000);

}  // namespace nphmm
