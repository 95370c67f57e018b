#pragma once

#include <string>

#include <json.hpp>

#include "nphmm/distance.hpp"
#include "nphmm/priors.hpp"
#include "nphmm/rate.hpp"
#include "nphmm/sampler.hpp"
#include "nphmm/theory.hpp"

namespace nphmm {

using Json = nlohmann::json;

// HmmParams: {"k": int, "Q": [row-major], "emissions": [tagged]} with
// emission tags {"type":"discrete","probs":[...],"tail_mass":x,"tail_rate":r}
// and {"type":"gmix","weights":[...],"locations":[...],"sigma":s}.
Json emission_to_json(const EmissionDensity& f);
EmissionDensity emission_from_json(const Json& j);
Json params_to_json(const HmmParams& theta);
HmmParams params_from_json(const Json& j);

Json q_prior_to_json(const QPriorSpec& spec);
QPriorSpec q_prior_from_json(const Json& j);
Json dp_spec_to_json(const DpDiscreteSpec& spec);
DpDiscreteSpec dp_spec_from_json(const Json& j);
Json dpm_spec_to_json(const DpmGaussianSpec& spec);
DpmGaussianSpec dpm_spec_from_json(const Json& j);
Json rate_schedule_to_json(const RateSchedule& r);
RateSchedule rate_schedule_from_json(const Json& j);

Json gibbs_config_to_json(const GibbsConfig& c);
GibbsConfig gibbs_config_from_json(const Json& j);
Json truth_spec_to_json(const TruthSpec& t);
TruthSpec truth_spec_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

Json divergence_report_to_json(const DivergenceReport& rep);
Json bound_report_to_json(const BoundReport& rep);
Json prior_mass_to_json(const PriorMassEstimate& est);
Json geweke_to_json(const GewekeResult& res);
Json slope_fit_to_json(const SlopeFit& fit);
Json distance_summary_to_json(const DistanceSummary& s);

// FNV-1a over the canonical dump; ties sample files to the exact config.
std::string config_hash(const Json& j);

// samples.json: config hash + seed lineage + acceptance rates + draws.
Json posterior_sample_to_json(const PosteriorSample& sample, const Json& config_json);

Json load_json_file(const std::string& path);
void save_json_file(const Json& j, const std::string& path);

}  // namespace nphmm
