#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "nphmm/rate.hpp"

using namespace nphmm;

namespace {

ExperimentConfig tiny_discrete_experiment() {
  ExperimentConfig cfg;
  cfg.truth = default_discrete_truth();
  cfg.gibbs.model = GibbsModel::discrete_dp;
  cfg.gibbs.k = cfg.truth.Q.k;
  cfg.gibbs.q_prior.variant = QPriorVariant::q3_truncated;
  cfg.gibbs.q_prior.floor_q = 0.05;
  cfg.gibbs.dp.dense_cap = 50;
  cfg.gibbs.iterations = 24;
  cfg.gibbs.burn_in = 8;
  cfg.gibbs.thin = 4;
  cfg.n_grid = {40, 60};
  cfg.replicates = 2;
  cfg.ell = 2;
  cfg.seed = 33;
  cfg.dist.lattice_trim = 1e-6;
  return cfg;
}

std::vector<RateRecord> planted_records(double exponent, int replicates = 4) {
  std::vector<RateRecord> recs;
  for (long long n : {100LL, 200LL, 400LL, 800LL}) {
    for (int r = 0; r < replicates; ++r) {
      RateRecord rec;
      rec.n = n;
      rec.replicate = r;
      rec.median_d = std::pow(static_cast<double>(n), exponent);
      rec.q90_d = 2.0 * rec.median_d;
      rec.seed_lineage = "x";
      recs.push_back(rec);
    }
  }
  return recs;
}

}  // namespace

TEST_SUITE("rate") {

TEST_CASE("truth specs build valid parameters") {
  const TruthSpec d = default_discrete_truth();
  d.validate();
  const HmmParams theta = d.build();
  theta.validate();
  REQUIRE(std::holds_alternative<DiscretePmf>(theta.emissions[0]));
  const auto& f = std::get<DiscretePmf>(theta.emissions[0]);
  CHECK(f.tail_mass > 0.0);  // exact geometric continuation
  CHECK(f.at(1) / f.at(2) == doctest::Approx(std::exp(d.geom_rates[0])).epsilon(1e-12));

  const TruthSpec c = default_continuous_truth();
  c.validate();
  const HmmParams theta_c = c.build();
  theta_c.validate();
  REQUIRE(std::holds_alternative<GaussianMixtureDensity>(theta_c.emissions[0]));
  CHECK(std::get<GaussianMixtureDensity>(theta_c.emissions[0]).sigma == c.noise_sigma);

  TruthSpec bad = d;
  bad.geom_rates = {1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = tiny_discrete_experiment();
  cfg.validate();
  cfg.n_grid = {60, 40};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_discrete_experiment();
  cfg.n_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_discrete_experiment();
  cfg.gibbs.model = GibbsModel::continuous_dpm;  // disagrees with discrete truth
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_discrete_experiment();
  cfg.replicates = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("grid runs are deterministic and cells are addressable") {
  const ExperimentConfig cfg = tiny_discrete_experiment();
  const WallClock clock = [] { return 0.0; };
  const auto rows = run_rate_experiment(cfg, clock);
  REQUIRE(rows.size() == 4);  // 2 n values x 2 replicates
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rec = rows[i];
    CHECK(rec.error.empty());
    CHECK(rec.n == cfg.n_grid[i / 2]);
    CHECK(rec.replicate == static_cast<int>(i % 2));
    CHECK(rec.median_d >= 0.0);
    CHECK(rec.q90_d >= rec.median_d);
    CHECK(rec.wall_time_s == 0.0);
    CHECK_FALSE(rec.seed_lineage.empty());
  }
  // cells can be re-run in isolation
  const RateRecord cell = run_rate_cell(cfg, 1, 1, clock);
  CHECK(cell.median_d == rows[3].median_d);
  CHECK(cell.q90_d == rows[3].q90_d);
  CHECK(cell.seed_lineage == rows[3].seed_lineage);
  CHECK_THROWS_AS(run_rate_cell(cfg, 2, 0, clock), std::invalid_argument);
  CHECK_THROWS_AS(run_rate_cell(cfg, 0, 2, clock), std::invalid_argument);

  // distinct cells use distinct substreams
  CHECK(rows[0].median_d != rows[1].median_d);
}

TEST_CASE("csv output is byte-stable under an injected clock") {
  const ExperimentConfig cfg = tiny_discrete_experiment();
  const WallClock clock = [] { return 42.0; };
  std::ostringstream a, b;
  write_rate_csv(run_rate_experiment(cfg, clock), a);
  write_rate_csv(run_rate_experiment(cfg, clock), b);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, a.str().find('\n')) == std::string(kRateCsvHeader));
}

TEST_CASE("csv header and round-trip") {
  CHECK(std::string(kRateCsvHeader) ==
        "n,replicate,median_D,q90_D,exceedance_at_M,wall_time_s,seed_lineage,errors");
  std::vector<RateRecord> recs = planted_records(-0.5, 2);
  recs[1].error = "boom, with commas\nand newline";
  recs[2].exceedance_at_m = 0.125;
  recs[3].wall_time_s = 1.5e-3;
  const std::string path = "rate_roundtrip_test.csv";
  write_rate_csv(recs, path);
  const auto back = read_rate_csv(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].n == recs[i].n);
    CHECK(back[i].replicate == recs[i].replicate);
    CHECK(back[i].median_d == recs[i].median_d);  // %.17g survives the trip
    CHECK(back[i].q90_d == recs[i].q90_d);
    CHECK(back[i].exceedance_at_m == recs[i].exceedance_at_m);
    CHECK(back[i].wall_time_s == recs[i].wall_time_s);
    CHECK(back[i].seed_lineage == recs[i].seed_lineage);
  }
  CHECK(back[1].error == "boom; with commas;and newline");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_rate_csv("does_not_exist.csv"), std::runtime_error);
}

TEST_CASE("slope fit recovers a planted rate exactly") {
  const SlopeFit half = fit_rate_slope(planted_records(-0.5), "median_D");
  CHECK(half.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(half.ci_lo == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(half.ci_hi == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(half.n_points == 4);

  const SlopeFit one = fit_rate_slope(planted_records(-1.0), "q90_D");
  CHECK(one.slope == doctest::Approx(-1.0).epsilon(1e-12));

  const SlopeFit flat = fit_rate_slope(planted_records(0.0), "median_D");
  CHECK(flat.slope == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("slope fit skips error rows and guards its inputs") {
  auto recs = planted_records(-0.5);
  for (auto& rec : recs)
    if (rec.n == 400) {
      rec.error = "failed";
      rec.median_d = 1e9;
    }
  const SlopeFit fit = fit_rate_slope(recs, "median_D");
  CHECK(fit.n_points == 3);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));

  std::vector<RateRecord> two(recs.begin(), recs.begin() + 8);  // n in {100, 200}
  CHECK_THROWS_AS(fit_rate_slope(two, "median_D"), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate_slope(recs, "mean_D"), std::invalid_argument);
}

TEST_CASE("medians shrink along a short n grid") {
  ExperimentConfig cfg = tiny_discrete_experiment();
  cfg.n_grid = {50, 200, 800};
  cfg.replicates = 1;
  cfg.gibbs.iterations = 200;
  cfg.gibbs.burn_in = 50;
  cfg.gibbs.thin = 2;
  cfg.seed = 71;
  const WallClock clock = [] { return 0.0; };
  const auto rows = run_rate_experiment(cfg, clock);
  REQUIRE(rows.size() == 3);
  for (const auto& rec : rows) CHECK(rec.error.empty());
  CHECK(rows[0].median_d > rows[2].median_d);
}

}  // TEST_SUITE
