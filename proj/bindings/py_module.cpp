#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nphmm/json_io.hpp"

namespace py = pybind11;

namespace {

// JSON strings keep the Python surface thin; callers json.loads the results.
nphmm::HmmParams parse_params(const std::string& json_str) {
  return nphmm::params_from_json(nphmm::Json::parse(json_str));
}

std::string d_ell_py(const std::string& a_json, const std::string& b_json, int ell,
                     const std::string& method, std::uint64_t seed) {
  const auto a = parse_params(a_json);
  const auto b = parse_params(b_json);
  nphmm::DivMethod m = nphmm::DivMethod::automatic;
  if (method == "exact")
    m = nphmm::DivMethod::exact_enumeration;
  else if (method == "quadrature")
    m = nphmm::DivMethod::quadrature;
  else if (method == "mc")
    m = nphmm::DivMethod::monte_carlo;
  else if (method != "auto")
    throw std::invalid_argument("method must be auto|exact|quadrature|mc");
  nphmm::RandomStream rng(seed);
  return nphmm::divergence_report_to_json(nphmm::d_ell(a, b, ell, m, &rng, {})).dump();
}

std::string kl_path_py(const std::string& star_json, const std::string& theta_json, int n,
                       std::uint64_t seed) {
  nphmm::RandomStream rng(seed);
  return nphmm::divergence_report_to_json(
             nphmm::kl_path(parse_params(star_json), parse_params(theta_json), n,
                            nphmm::DivMethod::automatic, &rng, {}))
      .dump();
}

double log_likelihood_py(const std::string& params_json, const std::vector<double>& obs) {
  const auto theta = parse_params(params_json);
  return nphmm::forward_filter(theta, nphmm::stationary_distribution(theta.Q), obs).log_lik;
}

py::tuple simulate_py(const std::string& params_json, int n, std::uint64_t seed) {
  const auto theta = parse_params(params_json);
  nphmm::RandomStream rng(seed);
  const auto [states, obs] = nphmm::simulate(theta, n, rng);
  return py::make_tuple(states, obs);
}

std::string check_suite_py(const std::string& suite, long long trials, std::uint64_t seed) {
  return nphmm::bound_report_to_json(nphmm::run_check_suite(suite, trials, seed)).dump();
}

std::string run_chain_py(const std::string& config_json, const std::vector<double>& obs) {
  const auto cfg_json = nphmm::Json::parse(config_json);
  const auto config = nphmm::gibbs_config_from_json(cfg_json);
  const auto sample = nphmm::run_chain(config, obs);
  return nphmm::posterior_sample_to_json(sample, cfg_json).dump();
}

std::string fit_slope_py(const std::string& csv_path, const std::string& statistic,
                         std::uint64_t seed) {
  return nphmm::slope_fit_to_json(
             nphmm::fit_rate_slope(nphmm::read_rate_csv(csv_path), statistic, seed))
      .dump();
}

}  // namespace

PYBIND11_MODULE(nphmm, m) {
  m.doc() = "Finite-state HMMs with nonparametric Bayesian priors: distances, "
            "lemma checks, Gibbs sampling, rate experiments";
  m.def("rho", &nphmm::rho, py::arg("q"), py::arg("k"),
        "Forgetting coefficient (1-kq)/(1-(k-1)q)");
  m.def("c_k_constant", &nphmm::c_k_constant, py::arg("k"), py::arg("q_star"));
  m.def("log_likelihood", &log_likelihood_py, py::arg("params_json"), py::arg("obs"),
        "Stationary-start log-likelihood via the scaled forward filter");
  m.def("simulate", &simulate_py, py::arg("params_json"), py::arg("n"), py::arg("seed") = 1,
        "Simulate (states, observations) from a parameter JSON");
  m.def("d_ell", &d_ell_py, py::arg("a_json"), py::arg("b_json"), py::arg("ell") = 1,
        py::arg("method") = "auto", py::arg("seed") = 1,
        "L1 distance between joint ell-window densities; returns a JSON report");
  m.def("kl_path", &kl_path_py, py::arg("theta_star_json"), py::arg("theta_json"), py::arg("n"),
        py::arg("seed") = 1, "KL divergence of joint path densities; JSON report");
  m.def("check_suite", &check_suite_py, py::arg("suite"), py::arg("trials") = 200,
        py::arg("seed") = 1, "Run a lemma-bound fuzz suite; JSON BoundReport");
  m.def("run_chain", &run_chain_py, py::arg("config_json"), py::arg("obs"),
        "Run the Gibbs chain; returns the samples JSON document");
  m.def("fit_rate_slope", &fit_slope_py, py::arg("csv_path"), py::arg("statistic") = "median_D",
        py::arg("seed") = 1, "Fit a log-log slope from a rates CSV; JSON result");
}
