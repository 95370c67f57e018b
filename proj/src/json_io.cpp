#include "nphmm/json_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nphmm {

namespace {

std::vector<double> doubles_from(const Json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string("json: ") + what + " must be an array");
  return j.get<std::vector<double>>();
}

}  // namespace

Json emission_to_json(const EmissionDensity& f) {
  Json j;
  if (is_discrete(f)) {
    const auto& pmf = std::get<DiscretePmf>(f);
    j["type"] = "discrete";
    j["probs"] = pmf.probs;
    j["tail_mass"] = pmf.tail_mass;
    j["tail_rate"] = pmf.tail_rate;
  } else {
    const auto& mix = std::get<GaussianMixtureDensity>(f);
    j["type"] = "gmix";
    j["weights"] = mix.weights;
    j["locations"] = mix.locations;
    j["sigma"] = mix.sigma;
  }
  return j;
}

EmissionDensity emission_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "discrete") {
    DiscretePmf pmf;
    pmf.probs = doubles_from(j.at("probs"), "probs");
    pmf.tail_mass = j.value("tail_mass", 0.0);
    pmf.tail_rate = j.value("tail_rate", 0.0);
    pmf.validate();
    return pmf;
  }
  if (type == "gmix") {
    GaussianMixtureDensity mix;
    mix.weights = doubles_from(j.at("weights"), "weights");
    mix.locations = doubles_from(j.at("locations"), "locations");
    mix.sigma = j.at("sigma").get<double>();
    mix.validate();
    return mix;
  }
  throw std::invalid_argument("json: unknown emission type '" + type + "'");
}

Json params_to_json(const HmmParams& theta) {
  Json j;
  j["k"] = theta.k();
  j["Q"] = theta.Q.p;
  Json ems = Json::array();
  for (const auto& f : theta.emissions) ems.push_back(emission_to_json(f));
  j["emissions"] = ems;
  return j;
}

HmmParams params_from_json(const Json& j) {
  HmmParams theta;
  const int k = j.at("k").get<int>();
  theta.Q.k = k;
  theta.Q.p = doubles_from(j.at("Q"), "Q");
  for (const auto& e : j.at("emissions")) theta.emissions.push_back(emission_from_json(e));
  theta.validate();
  return theta;
}

Json q_prior_to_json(const QPriorSpec& spec) {
  Json j;
  j["variant"] = q_prior_variant_name(spec.variant);
  j["alpha"] = spec.alpha;
  j["beta"] = spec.beta;
  j["floor_q"] = spec.floor_q;
  j["rejection_budget"] = spec.rejection_budget;
  return j;
}

QPriorSpec q_prior_from_json(const Json& j) {
  QPriorSpec spec;
  const std::string v = j.at("variant").get<std::string>();
  if (v == "q1" || v == "q1-exponential")
    spec.variant = QPriorVariant::q1_exponential;
  else if (v == "q2" || v == "q2-double-exponential")
    spec.variant = QPriorVariant::q2_double_exponential;
  else if (v == "q3" || v == "q3-truncated")
    spec.variant = QPriorVariant::q3_truncated;
  else
    throw std::invalid_argument("json: unknown prior variant '" + v + "'");
  if (j.contains("alpha")) spec.alpha = doubles_from(j.at("alpha"), "alpha");
  if (j.contains("beta")) spec.beta = doubles_from(j.at("beta"), "beta");
  spec.floor_q = j.value("floor_q", spec.floor_q);
  spec.rejection_budget = j.value("rejection_budget", spec.rejection_budget);
  return spec;
}

Json dp_spec_to_json(const DpDiscreteSpec& spec) {
  Json j;
  j["c0"] = spec.c0;
  j["alpha_g"] = spec.alpha_g;
  j["trunc_h"] = spec.trunc_h;
  j["trunc_eps"] = spec.trunc_eps;
  j["dense_cap"] = spec.dense_cap;
  return j;
}

DpDiscreteSpec dp_spec_from_json(const Json& j) {
  DpDiscreteSpec spec;
  spec.c0 = j.value("c0", spec.c0);
  spec.alpha_g = j.value("alpha_g", spec.alpha_g);
  spec.trunc_h = j.value("trunc_h", spec.trunc_h);
  spec.trunc_eps = j.value("trunc_eps", spec.trunc_eps);
  spec.dense_cap = j.value("dense_cap", spec.dense_cap);
  spec.validate();
  return spec;
}

Json dpm_spec_to_json(const DpmGaussianSpec& spec) {
  Json j;
  j["base_scale"] = spec.base_scale;
  j["concentration"] = spec.concentration;
  j["sigma_shape"] = spec.sigma_shape;
  j["sigma_scale"] = spec.sigma_scale;
  j["trunc_h"] = spec.trunc_h;
  j["trunc_eps"] = spec.trunc_eps;
  return j;
}

DpmGaussianSpec dpm_spec_from_json(const Json& j) {
  DpmGaussianSpec spec;
  spec.base_scale = j.value("base_scale", spec.base_scale);
  spec.concentration = j.value("concentration", spec.concentration);
  spec.sigma_shape = j.value("sigma_shape", spec.sigma_shape);
  spec.sigma_scale = j.value("sigma_scale", spec.sigma_scale);
  spec.trunc_h = j.value("trunc_h", spec.trunc_h);
  spec.trunc_eps = j.value("trunc_eps", spec.trunc_eps);
  spec.validate();
  return spec;
}

Json rate_schedule_to_json(const RateSchedule& r) {
  Json j;
  j["exponent"] = r.exponent;
  j["t0"] = r.t0;
  j["t"] = r.t;
  j["polylog_u"] = r.polylog_u;
  j["m_mult"] = r.m_mult;
  j["q_floor"] = r.q_floor;
  return j;
}

RateSchedule rate_schedule_from_json(const Json& j) {
  RateSchedule r;
  r.exponent = j.value("exponent", r.exponent);
  r.t0 = j.value("t0", r.t0);
  r.t = j.value("t", r.t);
  r.polylog_u = j.value("polylog_u", r.polylog_u);
  r.m_mult = j.value("m_mult", r.m_mult);
  r.q_floor = j.value("q_floor", r.q_floor);
  return r;
}

Json gibbs_config_to_json(const GibbsConfig& c) {
  Json j;
  j["model"] = c.model == GibbsModel::discrete_dp ? "discrete_dp" : "continuous_dpm";
  j["k"] = c.k;
  j["q_prior"] = q_prior_to_json(c.q_prior);
  j["dp"] = dp_spec_to_json(c.dp);
  j["dpm"] = dpm_spec_to_json(c.dpm);
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["mh_step"] = c.mh_step;
  return j;
}

GibbsConfig gibbs_config_from_json(const Json& j) {
  GibbsConfig c;
  const std::string model = j.at("model").get<std::string>();
  if (model == "discrete_dp")
    c.model = GibbsModel::discrete_dp;
  else if (model == "continuous_dpm")
    c.model = GibbsModel::continuous_dpm;
  else
    throw std::invalid_argument("json: unknown model '" + model + "'");
  c.k = j.at("k").get<int>();
  if (j.contains("q_prior")) c.q_prior = q_prior_from_json(j.at("q_prior"));
  if (j.contains("dp")) c.dp = dp_spec_from_json(j.at("dp"));
  if (j.contains("dpm")) c.dpm = dpm_spec_from_json(j.at("dpm"));
  c.iterations = j.value("iterations", c.iterations);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  c.mh_step = j.value("mh_step", c.mh_step);
  c.validate();
  return c;
}

Json truth_spec_to_json(const TruthSpec& t) {
  Json j;
  j["family"] =
      t.family == TruthFamily::discrete_geometric ? "discrete_geometric" : "continuous_translation";
  j["k"] = t.Q.k;
  j["Q"] = t.Q.p;
  if (t.family == TruthFamily::discrete_geometric) {
    j["geom_rates"] = t.geom_rates;
    j["v_max"] = t.v_max;
  } else {
    j["locations"] = t.locations;
    j["noise_sigma"] = t.noise_sigma;
  }
  return j;
}

TruthSpec truth_spec_from_json(const Json& j) {
  const std::string fam = j.at("family").get<std::string>();
  TruthSpec t = fam == "discrete_geometric" ? default_discrete_truth()
              : fam == "continuous_translation"
                  ? default_continuous_truth()
                  : throw std::invalid_argument("json: unknown truth family '" + fam + "'");
  if (j.contains("Q")) {
    t.Q.k = j.at("k").get<int>();
    t.Q.p = doubles_from(j.at("Q"), "Q");
  }
  if (j.contains("geom_rates")) t.geom_rates = doubles_from(j.at("geom_rates"), "geom_rates");
  t.v_max = j.value("v_max", t.v_max);
  if (j.contains("locations")) t.locations = doubles_from(j.at("locations"), "locations");
  t.noise_sigma = j.value("noise_sigma", t.noise_sigma);
  t.validate();
  return t;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["truth"] = truth_spec_to_json(c.truth);
  j["gibbs"] = gibbs_config_to_json(c.gibbs);
  j["n_grid"] = c.n_grid;
  j["replicates"] = c.replicates;
  j["ell"] = c.ell;
  j["rate"] = rate_schedule_to_json(c.rate);
  j["M"] = c.m_mult;
  j["seed"] = c.seed;
  j["lattice_trim"] = c.dist.lattice_trim;
  j["grid_step_sigmas"] = c.dist.grid_step_sigmas;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  c.truth = truth_spec_from_json(j.at("truth"));
  c.gibbs = gibbs_config_from_json(j.at("gibbs"));
  c.n_grid = j.at("n_grid").get<std::vector<long long>>();
  c.replicates = j.value("replicates", c.replicates);
  c.ell = j.value("ell", c.ell);
  if (j.contains("rate")) c.rate = rate_schedule_from_json(j.at("rate"));
  c.m_mult = j.value("M", c.m_mult);
  c.seed = j.value("seed", c.seed);
  c.dist.lattice_trim = j.value("lattice_trim", c.dist.lattice_trim);
  c.dist.grid_step_sigmas = j.value("grid_step_sigmas", c.dist.grid_step_sigmas);
  c.validate();
  return c;
}

Json divergence_report_to_json(const DivergenceReport& rep) {
  Json j;
  j["value"] = rep.value;
  j["method"] = div_method_name(rep.method);
  j["mc_se"] = rep.mc_se;
  j["err_bound"] = rep.err_bound;
  j["n_draws"] = rep.n_draws;
  j["n"] = rep.n;
  j["infinite"] = rep.infinite;
  return j;
}

Json bound_report_to_json(const BoundReport& rep) {
  Json j;
  j["name"] = rep.name;
  j["worst_margin"] = rep.worst_margin;
  if (std::isfinite(rep.rho)) j["rho"] = rep.rho;
  j["witness"] = rep.witness;
  j["trials"] = rep.trials;
  j["pass"] = rep.pass;
  Json extras = Json::object();
  for (const auto& [key, val] : rep.extras) extras[key] = val;
  j["extras"] = extras;
  return j;
}

Json prior_mass_to_json(const PriorMassEstimate& est) {
  Json j;
  j["hits"] = est.hits;
  j["n_mc"] = est.n_mc;
  j["fraction"] = est.fraction;
  j["log_estimate"] = est.log_estimate;
  j["se_log"] = est.se_log;
  j["lower_bound_only"] = est.lower_bound_only;
  j["s_boundary"] = est.s_boundary;
  j["display"] = est.display;
  return j;
}

Json geweke_to_json(const GewekeResult& res) {
  Json j;
  j["cycles"] = res.cycles;
  j["pass"] = res.pass;
  Json fns = Json::array();
  for (std::size_t i = 0; i < res.names.size(); ++i) {
    Json f;
    f["name"] = res.names[i];
    f["z"] = res.z[i];
    f["mean_marginal"] = res.mean_marginal[i];
    f["se_marginal"] = res.se_marginal[i];
    f["mean_successive"] = res.mean_successive[i];
    f["se_successive"] = res.se_successive[i];
    fns.push_back(f);
  }
  j["functions"] = fns;
  return j;
}

Json slope_fit_to_json(const SlopeFit& fit) {
  Json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["n_points"] = fit.n_points;
  return j;
}

Json distance_summary_to_json(const DistanceSummary& s) {
  Json j;
  j["median"] = s.median;
  j["q90"] = s.q90;
  j["exceedance"] = s.exceedance;
  j["threshold"] = s.threshold;
  j["worst_err_bound"] = s.worst_err_bound;
  return j;
}

std::string config_hash(const Json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json posterior_sample_to_json(const PosteriorSample& sample, const Json& config_json) {
  Json j;
  j["config_hash"] = config_hash(config_json);
  j["seed_lineage"] = sample.seed_lineage;
  Json acc = Json::object();
  for (const auto& [name, rate] : sample.acceptance_rates) acc[name] = rate;
  j["acceptance_rates"] = acc;
  j["log_liks"] = sample.log_liks;
  Json draws = Json::array();
  for (const auto& d : sample.draws) draws.push_back(params_to_json(d));
  j["draws"] = draws;
  return j;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

void save_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace nphmm
