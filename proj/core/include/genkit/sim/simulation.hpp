#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genkit/data/dataset.hpp"

namespace genkit::sim {

enum class VarType { continuous, binary };
enum class OutcomeModelId { A, B1, B2, C1, C2, D1, D2 };

VarType var_type_from_string(const std::string& s);
std::string var_type_to_string(VarType t);
OutcomeModelId outcome_model_from_string(const std::string& s);
std::string outcome_model_to_string(OutcomeModelId id);

// One simulated world: covariate types, latent correlation, generating
// outcome model, sample sizes and seeding. Models with a squared moderator
// require that moderator to be continuous.
struct ScenarioConfig {
    VarType z_type = VarType::continuous;
    VarType v_type = VarType::continuous;
    double latent_correlation = 0.0;
    OutcomeModelId outcome_model = OutcomeModelId::A;
    int n_rct = 400;
    int n_target = 5000;
    int n_iterations = 2000;
    std::uint64_t base_seed = 0;

    void validate() const;
};

enum class SensMethod { outcome_model, weighted_outcome_model };
enum class AnalysisSpec { correct, misspecified };

struct MethodSpec {
    SensMethod method = SensMethod::outcome_model;
    AnalysisSpec analysis = AnalysisSpec::correct;
};

std::string sens_method_to_string(SensMethod m);
std::string analysis_spec_to_string(AnalysisSpec s);
SensMethod sens_method_from_string(const std::string& s);
AnalysisSpec analysis_spec_from_string(const std::string& s);

// One generated RCT + target pair, plus the per-iteration truth: the mean
// of the true individual effects over the generated target sample and the
// target-sample means of the V-side moderator terms (which the analysis
// cannot estimate and receives as oracle sensitivity inputs).
struct GeneratedIteration {
    data::StackedDataset dataset;
    data::RoleMap roles;
    double true_tate = 0.0;
    double target_v_mean = 0.0;
    double target_v_sq_mean = 0.0;
    double target_zv_mean = 0.0;
};

GeneratedIteration generate_iteration(const ScenarioConfig& config,
                                      int iteration_index);

// Population TATE implied by the latent-normal construction (limit of
// true_tate as the target sample grows).
double closed_form_tate(const ScenarioConfig& config);

// Copy of the dataset with one extra covariate column.
data::StackedDataset with_derived_column(const data::StackedDataset& data,
                                         const std::string& name,
                                         const Eigen::VectorXd& values);

// One sensitivity-analysis estimate of the TATE on a generated iteration,
// evaluated at the oracle sensitivity-parameter values.
double run_sensitivity_estimate(const GeneratedIteration& iteration,
                                const ScenarioConfig& config,
                                const MethodSpec& method);

struct BiasCurveRow {
    double correlation = 0.0;
    MethodSpec spec;
    double mean_bias = 0.0;
    double mc_se = 0.0;  // SD of per-iteration error / sqrt(n_ok)
    int n_ok = 0;
    int n_failed = 0;
};
using BiasCurve = std::vector<BiasCurveRow>;

// Runs the scenario's iterations (in parallel when n_threads > 1; output
// independent of the thread count) and aggregates the per-iteration error
// estimate - true_tate for each method spec. Iterations where any method
// fails are excluded everywhere; more than 1% failures is an error.
BiasCurve run_scenario(const ScenarioConfig& config,
                       const std::vector<MethodSpec>& method_specs,
                       int n_threads = 1);

struct MirrorCheckRow {
    double correlation = 0.0;
    MethodSpec spec;
    double bias_positive = 0.0;
    double bias_negative = 0.0;
    double combined_se = 0.0;
    bool mirrored = false;  // |bias_pos + bias_neg| <= 3 * combined_se
};

struct MirrorReport {
    std::vector<MirrorCheckRow> rows;
    bool all_mirrored = true;
};

// Compares two scenarios that differ only in the sign of the third
// moderator term (B1 vs B2, C1 vs C2, D1 vs D2): the mean biases should be
// negatives of each other within Monte Carlo error.
MirrorReport mirror_check(const ScenarioConfig& positive,
                          const ScenarioConfig& negative,
                          const std::vector<MethodSpec>& method_specs,
                          int n_threads = 1);

// Scenario file contents: base config, the correlations to sweep and the
// method specs to run.
struct ScenarioFile {
    ScenarioConfig base;
    std::vector<double> correlations;
    std::vector<MethodSpec> method_specs;
};

ScenarioFile scenario_from_config(const data::KeyValueConfig& config);

} // namespace genkit::sim
