#include "nphmm/rate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nphmm {

const char* const kRateCsvHeader =
    "n,replicate,median_D,q90_D,exceedance_at_M,wall_time_s,seed_lineage,errors";

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// CSV cells are comma- and newline-free by construction.
std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void TruthSpec::validate() const {
  Q.validate();
  const int k = Q.k;
  if (family == TruthFamily::discrete_geometric) {
    if (static_cast<int>(geom_rates.size()) != k)
      throw std::invalid_argument("TruthSpec: one geometric rate per state required");
    for (double c : geom_rates)
      if (!(c > 0.0)) throw std::invalid_argument("TruthSpec: rates must be positive");
    if (v_max < 1) throw std::invalid_argument("TruthSpec: v_max must be >= 1");
  } else {
    if (static_cast<int>(locations.size()) != k)
      throw std::invalid_argument("TruthSpec: one location per state required");
    if (!(noise_sigma > 0.0)) throw std::invalid_argument("TruthSpec: noise sigma must be positive");
  }
}

HmmParams TruthSpec::build() const {
  validate();
  HmmParams theta;
  theta.Q = Q;
  if (family == TruthFamily::discrete_geometric) {
    for (double c : geom_rates) {
      EnvelopeClassSpec env;
      env.m = 1.0;
      env.c = c;
      env.d_env = std::expm1(c) * (1.0 + 1e-9);
      theta.emissions.emplace_back(make_envelope_pmf(env, "exp", c, v_max));
    }
  } else {
    for (double m : locations) {
      GaussianMixtureDensity g;
      g.weights = {1.0};
      g.locations = {m};
      g.sigma = noise_sigma;
      theta.emissions.emplace_back(g);
    }
  }
  theta.validate();
  return theta;
}

TruthSpec default_discrete_truth() {
  TruthSpec t;
  t.family = TruthFamily::discrete_geometric;
  t.Q.k = 2;
  t.Q.p = {0.7, 0.3, 0.4, 0.6};
  t.geom_rates = {1.0, 0.5};
  t.v_max = 30;
  return t;
}

TruthSpec default_continuous_truth() {
  TruthSpec t;
  t.family = TruthFamily::continuous_translation;
  t.Q.k = 2;
  t.Q.p = {0.7, 0.3, 0.4, 0.6};
  t.locations = {-2.0, 2.0};
  t.noise_sigma = 1.0;
  return t;
}

void ExperimentConfig::validate() const {
  truth.validate();
  gibbs.validate();
  const bool disc_truth = truth.family == TruthFamily::discrete_geometric;
  const bool disc_model = gibbs.model == GibbsModel::discrete_dp;
  if (disc_truth != disc_model)
    throw std::invalid_argument("ExperimentConfig: truth family and Gibbs model disagree");
  if (truth.Q.k != gibbs.k)
    throw std::invalid_argument("ExperimentConfig: truth and Gibbs state counts disagree");
  if (n_grid.empty()) throw std::invalid_argument("ExperimentConfig: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw std::invalid_argument("ExperimentConfig: sample sizes must be >= 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw std::invalid_argument("ExperimentConfig: n grid must be strictly increasing");
  }
  if (replicates < 1) throw std::invalid_argument("ExperimentConfig: replicates must be >= 1");
  if (ell < 1) throw std::invalid_argument("ExperimentConfig: ell must be >= 1");
  if (!(m_mult > 0.0)) throw std::invalid_argument("ExperimentConfig: M must be positive");
  rate.validate_grid(n_grid);
}

RateRecord run_rate_cell(const ExperimentConfig& config, std::size_t n_index, int replicate,
                         const WallClock& clock) {
  config.validate();
  if (n_index >= config.n_grid.size())
    throw std::invalid_argument("run_rate_cell: n_index out of range");
  if (replicate < 0 || replicate >= config.replicates)
    throw std::invalid_argument("run_rate_cell: replicate out of range");
  const long long n = config.n_grid[n_index];
  RateRecord rec;
  rec.n = n;
  rec.replicate = replicate;
  RandomStream root(config.seed);
  const auto cell = root.substream(n_index).substream(static_cast<std::uint64_t>(replicate));
  rec.seed_lineage = cell.lineage();
  const double start = clock ? clock() : now_seconds();
  try {
    auto data_rng = cell.substream(0);
    const HmmParams truth = config.truth.build();
    const auto sim = simulate(truth, static_cast<int>(n), data_rng);
    GibbsConfig g = config.gibbs;
    g.seed = cell.substream(1).seed();
    const auto sample = run_chain(g, sim.second);
    const auto summary = posterior_distance_summary(sample, truth, config.ell, config.m_mult,
                                                    config.rate, n, config.dist, nullptr);
    rec.median_d = summary.median;
    rec.q90_d = summary.q90;
    rec.exceedance_at_m = summary.exceedance;
  } catch (const std::exception& e) {
    rec.error = sanitize_cell(e.what());
  }
  rec.wall_time_s = (clock ? clock() : now_seconds()) - start;
  return rec;
}

std::vector<RateRecord> run_rate_experiment(const ExperimentConfig& config,
                                            const WallClock& clock) {
  config.validate();
  std::vector<RateRecord> records;
  records.reserve(config.n_grid.size() * static_cast<std::size_t>(config.replicates));
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni)
    for (int r = 0; r < config.replicates; ++r) records.push_back(run_rate_cell(config, ni, r, clock));
  return records;
}

void write_rate_csv(const std::vector<RateRecord>& records, std::ostream& out) {
  out << kRateCsvHeader << "\n";
  for (const auto& rec : records) {
    out << rec.n << ',' << rec.replicate << ',' << format_double(rec.median_d) << ','
        << format_double(rec.q90_d) << ',' << format_double(rec.exceedance_at_m) << ','
        << format_double(rec.wall_time_s) << ',' << sanitize_cell(rec.seed_lineage) << ','
        << sanitize_cell(rec.error) << "\n";
  }
}

void write_rate_csv(const std::vector<RateRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rate_csv: cannot open " + path);
  write_rate_csv(records, out);
}

std::vector<RateRecord> read_rate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_rate_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_rate_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRateCsvHeader)
    throw std::runtime_error("read_rate_csv: unexpected header '" + line + "'");
  std::vector<RateRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (cells.size() != 8)
      throw std::runtime_error("read_rate_csv: expected 8 cells, got " +
                               std::to_string(cells.size()));
    RateRecord rec;
    rec.n = std::stoll(cells[0]);
    rec.replicate = std::stoi(cells[1]);
    rec.median_d = std::stod(cells[2]);
    rec.q90_d = std::stod(cells[3]);
    rec.exceedance_at_m = std::stod(cells[4]);
    rec.wall_time_s = std::stod(cells[5]);
    rec.seed_lineage = cells[6];
    rec.error = cells[7];
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace

SlopeFit fit_rate_slope(const std::vector<RateRecord>& records, const std::string& statistic,
                        std::uint64_t boot_seed, int boot_resamples) {
  const bool use_median = statistic == "median_D";
  if (!use_median && statistic != "q90_D")
    throw std::invalid_argument("fit_rate_slope: statistic must be median_D or q90_D");
  std::map<long long, std::vector<double>> by_n;
  for (const auto& rec : records) {
    if (!rec.error.empty()) continue;
    by_n[rec.n].push_back(use_median ? rec.median_d : rec.q90_d);
  }
  if (by_n.size() < 3)
    throw std::invalid_argument("fit_rate_slope: need at least 3 distinct n values");
  std::vector<long long> ns;
  std::vector<std::vector<double>> vals;
  std::vector<double> log_n, log_stat;
  for (const auto& [n, v] : by_n) {
    ns.push_back(n);
    vals.push_back(v);
    const double med = sample_quantile(v, 0.5);
    if (!(med > 0.0))
      throw std::invalid_argument("fit_rate_slope: nonpositive statistic at n=" +
                                  std::to_string(n));
    log_n.push_back(std::log(static_cast<double>(n)));
    log_stat.push_back(std::log(med));
  }
  const auto fit = least_squares(log_n, log_stat);
  SlopeFit out;
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.n_points = static_cast<int>(ns.size());

  RandomStream boot(boot_seed);
  std::vector<double> slopes;
  slopes.reserve(boot_resamples);
  std::vector<double> ly(ns.size());
  for (int r = 0; r < boot_resamples; ++r) {
    bool ok = true;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const auto& v = vals[i];
      std::vector<double> draw(v.size());
      for (std::size_t s = 0; s < v.size(); ++s)
        draw[s] = v[boot.uniform_int(static_cast<long long>(v.size()))];
      const double med = sample_quantile(draw, 0.5);
      if (!(med > 0.0)) {
        ok = false;
        break;
      }
      ly[i] = std::log(med);
    }
    if (!ok) continue;
    slopes.push_back(least_squares(log_n, ly).slope);
  }
  if (slopes.empty()) {
    out.ci_lo = out.ci_hi = fit.slope;
  } else {
    out.ci_lo = sample_quantile(slopes, 0.025);
    out.ci_hi = sample_quantile(slopes, 0.975);
  }
  return out;
}

}  // namespace nphmm
