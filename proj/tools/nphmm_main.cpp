#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nphmm/json_io.hpp"

namespace {

using nphmm::Json;

std::vector<double> load_observations(const std::string& path) {
  const Json j = nphmm::load_json_file(path);
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.contains("obs")) return j.at("obs").get<std::vector<double>>();
  throw std::runtime_error("data file must be an array or hold an 'obs' array");
}

nphmm::DivMethod parse_method(const std::string& name) {
  if (name == "auto") return nphmm::DivMethod::automatic;
  if (name == "exact") return nphmm::DivMethod::exact_enumeration;
  if (name == "quadrature") return nphmm::DivMethod::quadrature;
  if (name == "mc") return nphmm::DivMethod::monte_carlo;
  if (name == "chain_rule") return nphmm::DivMethod::chain_rule;
  throw std::runtime_error("unknown method '" + name + "'");
}

int cmd_distance(const std::string& a_path, const std::string& b_path, int ell,
                 const std::string& op, const std::string& method, std::uint64_t seed) {
  const auto a = nphmm::params_from_json(nphmm::load_json_file(a_path));
  const auto b = nphmm::params_from_json(nphmm::load_json_file(b_path));
  nphmm::RandomStream rng(seed);
  Json out;
  if (op == "d_ell") {
    out = nphmm::divergence_report_to_json(
        nphmm::d_ell(a, b, ell, parse_method(method), &rng, {}));
  } else if (op == "lipschitz") {
    const auto rep = nphmm::d_ell_lipschitz_bound(a, b, ell, &rng, {});
    out["d_ell"] = rep.d_ell_value;
    out["bound"] = rep.bound;
    out["margin"] = rep.margin;
    out["mu_term"] = rep.mu_term;
    out["q_term"] = rep.q_term;
    out["emission_term"] = rep.emission_term;
    out["ok"] = rep.ok;
  } else if (op == "kl") {
    out = nphmm::divergence_report_to_json(
        nphmm::kl_path(a, b, ell, parse_method(method), &rng, {}));
  } else if (op == "variance") {
    const auto rep = nphmm::llr_variance(a, b, ell, parse_method(method), &rng, {});
    out["variance"] = rep.variance;
    out["s1"] = rep.s1;
    out["s2"] = rep.s2;
    out["mc_se"] = rep.mc_se;
    out["n_draws"] = rep.n_draws;
    out["infinite"] = rep.infinite;
    out["method"] = nphmm::div_method_name(rep.method);
  } else if (op == "c_k") {
    out["c_k"] = nphmm::c_k_constant(a.k(), a.Q.min_entry());
  } else {
    throw std::runtime_error("unknown op '" + op + "'");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_check(const std::string& suite, long long trials, std::uint64_t seed) {
  const auto rep = nphmm::run_check_suite(suite, trials, seed);
  std::cout << nphmm::bound_report_to_json(rep).dump(2) << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_sample(const std::string& config_path, const std::string& data_path,
               const std::string& out_path) {
  const Json cfg_json = nphmm::load_json_file(config_path);
  const auto config = nphmm::gibbs_config_from_json(cfg_json);
  const auto obs = load_observations(data_path);
  const auto sample = nphmm::run_chain(config, obs);
  nphmm::save_json_file(nphmm::posterior_sample_to_json(sample, cfg_json), out_path);
  std::cout << "wrote " << sample.draws.size() << " draws to " << out_path << "\n";
  return 0;
}

int cmd_rate(const std::string& config_path, const std::string& out_path) {
  const auto config =
      nphmm::experiment_config_from_json(nphmm::load_json_file(config_path));
  const auto records = nphmm::run_rate_experiment(config);
  nphmm::write_rate_csv(records, out_path);
  long long failed = 0;
  for (const auto& rec : records) failed += rec.error.empty() ? 0 : 1;
  std::cout << "wrote " << records.size() << " rows to " << out_path;
  if (failed > 0) std::cout << " (" << failed << " cells failed)";
  std::cout << "\n";
  return 0;
}

int cmd_slope(const std::string& in_path, const std::string& stat, std::uint64_t seed) {
  const auto records = nphmm::read_rate_csv(in_path);
  const auto fit = nphmm::fit_rate_slope(records, stat, seed);
  std::cout << nphmm::slope_fit_to_json(fit).dump(2) << "\n";
  return 0;
}

int cmd_prior_mass(const std::string& config_path) {
  const Json j = nphmm::load_json_file(config_path);
  const std::string family = j.at("family").get<std::string>();
  double eps_tilde, u_n;
  if (j.contains("eps_tilde")) {
    eps_tilde = j.at("eps_tilde").get<double>();
    u_n = j.value("u_n", 1.0);
  } else {
    const auto rate = nphmm::rate_schedule_from_json(j.at("rate"));
    const long long n = j.at("n").get<long long>();
    eps_tilde = rate.eps_tilde(n);
    u_n = rate.u(n);
  }
  const long long n_mc = j.value("n_mc", 200ll);
  nphmm::RandomStream rng(j.value("seed", 1ull));

  std::vector<nphmm::EmissionDensity> fstar;
  if (j.contains("fstar")) {
    for (const auto& e : j.at("fstar")) fstar.push_back(nphmm::emission_from_json(e));
  } else {
    const auto truth = nphmm::truth_spec_from_json(j.at("truth")).build();
    fstar = truth.emissions;
  }

  nphmm::PriorMassEstimate est;
  if (family == "discrete") {
    const auto spec = j.contains("dp") ? nphmm::dp_spec_from_json(j.at("dp"))
                                       : nphmm::DpDiscreteSpec{};
    std::vector<nphmm::DiscretePmf> pmfs;
    for (const auto& f : fstar) pmfs.push_back(std::get<nphmm::DiscretePmf>(f));
    est = nphmm::prior_mass_kl_neighborhood(spec, pmfs, eps_tilde, u_n, n_mc, rng);
  } else if (family == "continuous") {
    const auto spec = j.contains("dpm") ? nphmm::dpm_spec_from_json(j.at("dpm"))
                                        : nphmm::DpmGaussianSpec{};
    std::vector<nphmm::GaussianMixtureDensity> mixes;
    for (const auto& f : fstar) mixes.push_back(std::get<nphmm::GaussianMixtureDensity>(f));
    est = nphmm::prior_mass_kl_neighborhood(spec, mixes, eps_tilde, u_n, n_mc, rng);
  } else {
    throw std::runtime_error("probe family must be 'discrete' or 'continuous'");
  }
  std::cout << nphmm::prior_mass_to_json(est).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric-HMM distances, lemma checks, samplers, and rate experiments"};
  app.require_subcommand(1);

  std::string a_path, b_path, op = "d_ell", method = "auto";
  int ell = 1;
  std::uint64_t seed = 1;
  auto* dist = app.add_subcommand("distance", "Distances and divergences between two parameter files");
  dist->add_option("--a", a_path, "JSON file with the first HmmParams")->required();
  dist->add_option("--b", b_path, "JSON file with the second HmmParams")->required();
  dist->add_option("--ell", ell, "Window / path length");
  dist->add_option("--op", op, "d_ell | lipschitz | kl | variance | c_k");
  dist->add_option("--method", method, "auto | exact | quadrature | mc | chain_rule");
  dist->add_option("--seed", seed, "RNG seed for Monte Carlo methods");

  std::string suite;
  long long trials = 200;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check", "Fuzzed lemma-bound suites");
  check->add_option("--suite", suite, "forgetting | ratio | kl | variance | mixing")->required();
  check->add_option("--trials", trials, "Fuzz trials");
  check->add_option("--seed", check_seed, "Master RNG seed");

  std::string cfg_path, data_path, out_path;
  auto* sample = app.add_subcommand("sample", "Run the Gibbs chain on a data file");
  sample->add_option("--config", cfg_path, "GibbsConfig JSON")->required();
  sample->add_option("--data", data_path, "Observations JSON")->required();
  sample->add_option("--out", out_path, "Output samples.json")->required();

  std::string rate_cfg, rate_out;
  auto* rate = app.add_subcommand("rate", "Posterior-concentration experiment grid");
  rate->add_option("--config", rate_cfg, "ExperimentConfig JSON")->required();
  rate->add_option("--out", rate_out, "Output CSV path")->required();

  std::string slope_in, slope_stat = "median_D";
  std::uint64_t slope_seed = 1;
  auto* slope = app.add_subcommand("slope", "Fit a log-log rate slope from a CSV");
  slope->add_option("--in", slope_in, "Input rates CSV")->required();
  slope->add_option("--stat", slope_stat, "median_D | q90_D");
  slope->add_option("--seed", slope_seed, "Bootstrap seed");

  std::string probe_cfg;
  auto* probe = app.add_subcommand("prior-mass", "KL-neighborhood prior-mass probe");
  probe->add_option("--config", probe_cfg, "Probe JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dist->parsed()) return cmd_distance(a_path, b_path, ell, op, method, seed);
    if (check->parsed()) return cmd_check(suite, trials, check_seed);
    if (sample->parsed()) return cmd_sample(cfg_path, data_path, out_path);
    if (rate->parsed()) return cmd_rate(rate_cfg, rate_out);
    if (slope->parsed()) return cmd_slope(slope_in, slope_stat, slope_seed);
    if (probe->parsed()) return cmd_prior_mass(probe_cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
