#include "genkit/sim/simulation.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "genkit/errors.hpp"
#include "genkit/estimators/estimators.hpp"
#include "genkit/numerics/gaussian.hpp"
#include "genkit/numerics/rng.hpp"
#include "genkit/sensitivity/sensitivity.hpp"

namespace genkit::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Phi^-1(0.75): dichotomization threshold; also the latent target mean for
// binary variables so the target prevalence is one half while the RCT
// prevalence is one quarter.
constexpr double kBinaryThreshold = 0.6744897501960817;

// Stream purposes, so generation order is schedule independent.
enum Purpose : std::uint64_t {
    kRctCovariates = 0,
    kRctTreatment = 1,
    kRctNoise = 2,
    kTargetCovariates = 3,
};

} // namespace

VarType var_type_from_string(const std::string& s) {
    if (s == "continuous") return VarType::continuous;
    if (s == "binary") return VarType::binary;
    throw ConfigError("unknown variable type '" + s + "' (continuous|binary)");
}

std::string var_type_to_string(VarType t) {
    return t == VarType::continuous ? "continuous" : "binary";
}

OutcomeModelId outcome_model_from_string(const std::string& s) {
    if (s == "A") return OutcomeModelId::A;
    if (s == "B1") return OutcomeModelId::B1;
    if (s == "B2") return OutcomeModelId::B2;
    if (s == "C1") return OutcomeModelId::C1;
    if (s == "C2") return OutcomeModelId::C2;
    if (s == "D1") return OutcomeModelId::D1;
    if (s == "D2") return OutcomeModelId::D2;
    throw ConfigError("unknown outcome model '" + s + "' (A|B1|B2|C1|C2|D1|D2)");
}

std::string outcome_model_to_string(OutcomeModelId id) {
    switch (id) {
        case OutcomeModelId::A: return "A";
        case OutcomeModelId::B1: return "B1";
        case OutcomeModelId::B2: return "B2";
        case OutcomeModelId::C1: return "C1";
        case OutcomeModelId::C2: return "C2";
        case OutcomeModelId::D1: return "D1";
        case OutcomeModelId::D2: return "D2";
    }
    return "?";
}

std::string sens_method_to_string(SensMethod m) {
    return m == SensMethod::outcome_model ? "outcome-model" : "weighted-outcome-model";
}

std::string analysis_spec_to_string(AnalysisSpec s) {
    return s == AnalysisSpec::correct ? "correct" : "misspecified";
}

SensMethod sens_method_from_string(const std::string& s) {
    if (s == "outcome-model") return SensMethod::outcome_model;
    if (s == "weighted-outcome-model") return SensMethod::weighted_outcome_model;
    throw ConfigError("unknown method '" + s +
                      "' (outcome-model|weighted-outcome-model)");
}

AnalysisSpec analysis_spec_from_string(const std::string& s) {
    if (s == "correct") return AnalysisSpec::correct;
    if (s == "misspecified") return AnalysisSpec::misspecified;
    throw ConfigError("unknown analysis spec '" + s + "' (correct|misspecified)");
}

namespace {

// Third moderator term of the generating model; 0 for model A.
enum class ThirdTerm { none, z_sq, v_sq, zv };

ThirdTerm third_term(OutcomeModelId id) {
    switch (id) {
        case OutcomeModelId::A: return ThirdTerm::none;
        case OutcomeModelId::B1:
        case OutcomeModelId::B2: return ThirdTerm::z_sq;
        case OutcomeModelId::C1:
        case OutcomeModelId::C2: return ThirdTerm::v_sq;
        case OutcomeModelId::D1:
        case OutcomeModelId::D2: return ThirdTerm::zv;
    }
    return ThirdTerm::none;
}

double third_sign(OutcomeModelId id) {
    switch (id) {
        case OutcomeModelId::B2:
        case OutcomeModelId::C2:
        case OutcomeModelId::D2: return -1.0;
        default: return 1.0;
    }
}

double third_value(ThirdTerm term, double z, double v) {
    switch (term) {
        case ThirdTerm::none: return 0.0;
        case ThirdTerm::z_sq: return z * z;
        case ThirdTerm::v_sq: return v * v;
        case ThirdTerm::zv: return z * v;
    }
    return 0.0;
}

} // namespace

void ScenarioConfig::validate() const {
    if (!(std::fabs(latent_correlation) < 1.0)) {
        throw ConfigError("scenario: |latent correlation| must be < 1");
    }
    if (n_rct < 20 || n_target < 20) {
        throw ConfigError("scenario: sample sizes too small");
    }
    if (n_iterations < 1) {
        throw ConfigError("scenario: n_iterations must be >= 1");
    }
    const ThirdTerm term = third_term(outcome_model);
    if (term == ThirdTerm::z_sq && z_type != VarType::continuous) {
        throw ConfigError("scenario: models B1/B2 need a continuous Z (Z^2 = Z "
                          "for a binary Z)");
    }
    if (term == ThirdTerm::v_sq && v_type != VarType::continuous) {
        throw ConfigError("scenario: models C1/C2 need a continuous V");
    }
}

GeneratedIteration generate_iteration(const ScenarioConfig& config,
                                      int iteration_index) {
    config.validate();
    const double rho = config.latent_correlation;
    const auto n_rct = static_cast<Eigen::Index>(config.n_rct);
    const auto n_target = static_cast<Eigen::Index>(config.n_target);
    const auto iter = static_cast<std::uint64_t>(iteration_index);

    numerics::RngStream rct_cov(config.base_seed, iter, kRctCovariates);
    Eigen::VectorXd x_rct(n_rct);
    for (Eigen::Index i = 0; i < n_rct; ++i) x_rct(i) = rct_cov.normal();
    const Eigen::MatrixXd latent_rct =
        numerics::mvn_sample(Eigen::Vector2d::Zero(), rho, n_rct, rct_cov);

    const double target_z_mean_latent =
        config.z_type == VarType::binary ? kBinaryThreshold : 0.5;
    const double target_v_mean_latent =
        config.v_type == VarType::binary ? kBinaryThreshold : 0.5;
    numerics::RngStream target_cov(config.base_seed, iter, kTargetCovariates);
    Eigen::VectorXd x_target(n_target);
    for (Eigen::Index i = 0; i < n_target; ++i) x_target(i) = target_cov.normal();
    const Eigen::MatrixXd latent_target = numerics::mvn_sample(
        Eigen::Vector2d(target_z_mean_latent, target_v_mean_latent), rho, n_target,
        target_cov);

    auto transform = [](double latent, VarType type) {
        return type == VarType::binary ? (latent > kBinaryThreshold ? 1.0 : 0.0)
                                       : latent;
    };

    numerics::RngStream t_stream(config.base_seed, iter, kRctTreatment);
    numerics::RngStream noise(config.base_seed, iter, kRctNoise);
    const ThirdTerm term = third_term(config.outcome_model);
    const double sign = third_sign(config.outcome_model);

    GeneratedIteration out;
    out.roles = {{"x", data::Role::X}, {"z", data::Role::Z}, {"v", data::Role::V}};
    auto& ds = out.dataset;
    const Eigen::Index n = n_rct + n_target;
    ds.covariate_names = {"x", "z", "v"};
    ds.covariates.resize(n, 3);
    ds.sample_indicator.resize(n);
    ds.treatment.resize(n);
    ds.outcome.resize(n);

    for (Eigen::Index i = 0; i < n_rct; ++i) {
        const double z = transform(latent_rct(i, 0), config.z_type);
        const double v = transform(latent_rct(i, 1), config.v_type);
        const double t = t_stream.bernoulli(0.5) ? 1.0 : 0.0;
        const double effect = 1.0 + z + v + sign * third_value(term, z, v);
        // Y = X + T + Z + V + ZT + VT (+/- third.T) + eps, eps ~ N(0, 4).
        const double y = x_rct(i) + z + v + t * effect + 2.0 * noise.normal();
        ds.covariates(i, 0) = x_rct(i);
        ds.covariates(i, 1) = z;
        ds.covariates(i, 2) = v;
        ds.sample_indicator(i) = 1;
        ds.treatment(i) = static_cast<int>(t);
        ds.outcome(i) = y;
    }

    double effect_sum = 0.0, v_sum = 0.0, v_sq_sum = 0.0, zv_sum = 0.0;
    for (Eigen::Index i = 0; i < n_target; ++i) {
        const double z = transform(latent_target(i, 0), config.z_type);
        const double v = transform(latent_target(i, 1), config.v_type);
        effect_sum += 1.0 + z + v + sign * third_value(term, z, v);
        v_sum += v;
        v_sq_sum += v * v;
        zv_sum += z * v;
        const Eigen::Index row = n_rct + i;
        ds.covariates(row, 0) = x_target(i);
        ds.covariates(row, 1) = z;
        ds.covariates(row, 2) = kNaN;  // V unobserved in the target sample
        ds.sample_indicator(row) = 0;
        ds.treatment(row) = -1;
        ds.outcome(row) = kNaN;
    }
    const double inv_n = 1.0 / static_cast<double>(n_target);
    out.true_tate = effect_sum * inv_n;
    out.target_v_mean = v_sum * inv_n;
    out.target_v_sq_mean = v_sq_sum * inv_n;
    out.target_zv_mean = zv_sum * inv_n;
    return out;
}

double closed_form_tate(const ScenarioConfig& config) {
    const double rho = config.latent_correlation;
    const double e_z = 0.5;  // prevalence 0.5 when binary, mean 0.5 when continuous
    const double e_v = 0.5;
    double e_third = 0.0;
    switch (third_term(config.outcome_model)) {
        case ThirdTerm::none:
            break;
        case ThirdTerm::z_sq:
            e_third = 1.0 + 0.25;  // Var + mean^2 of N(0.5, 1)
            break;
        case ThirdTerm::v_sq:
            e_third = 1.0 + 0.25;
            break;
        case ThirdTerm::zv: {
            const bool zb = config.z_type == VarType::binary;
            const bool vb = config.v_type == VarType::binary;
            if (!zb && !vb) {
                e_third = rho + 0.25;
            } else if (zb && vb) {
                // Orthant probability of a standard bivariate normal.
                e_third = 0.25 + std::asin(rho) / (2.0 * M_PI);
            } else {
                // E[cont * 1{latent > c}] with latent mean c:
                // mean*1/2 + rho*phi(0).
                e_third = 0.25 + rho * numerics::normal_pdf(0.0);
            }
            break;
        }
    }
    return 1.0 + e_z + e_v + third_sign(config.outcome_model) * e_third;
}

data::StackedDataset with_derived_column(const data::StackedDataset& data,
                                         const std::string& name,
                                         const Eigen::VectorXd& values) {
    if (values.size() != data.n_rows()) {
        throw ValidationError("derived column '" + name + "': wrong length");
    }
    if (data.has_covariate(name)) {
        throw ValidationError("derived column '" + name + "' already exists");
    }
    data::StackedDataset out = data;
    out.covariate_names.push_back(name);
    out.covariates.conservativeResize(Eigen::NoChange, out.covariates.cols() + 1);
    out.covariates.col(out.covariates.cols() - 1) = values;
    return out;
}

double run_sensitivity_estimate(const GeneratedIteration& iteration,
                                const ScenarioConfig& config,
                                const MethodSpec& method) {
    const data::StackedDataset* data = &iteration.dataset;
    data::StackedDataset augmented;
    data::RoleMap roles = iteration.roles;

    estimators::OutcomeModelSpec spec;
    spec.main_effects = {"x", "z", "v"};
    spec.moderators = {"z", "v"};
    std::map<std::string, double> fixed_means;

    const ThirdTerm term = third_term(config.outcome_model);
    if (method.analysis == AnalysisSpec::correct && term != ThirdTerm::none) {
        const Eigen::Index zj = iteration.dataset.covariate_index("z");
        const Eigen::Index vj = iteration.dataset.covariate_index("v");
        Eigen::VectorXd derived(iteration.dataset.n_rows());
        std::string name;
        switch (term) {
            case ThirdTerm::z_sq:
                name = "z_sq";
                derived = iteration.dataset.covariates.col(zj).cwiseAbs2();
                roles[name] = data::Role::Z;
                break;
            case ThirdTerm::v_sq:
                name = "v_sq";
                derived = iteration.dataset.covariates.col(vj).cwiseAbs2();
                roles[name] = data::Role::V;
                fixed_means[name] = iteration.target_v_sq_mean;
                break;
            case ThirdTerm::zv:
                name = "zv";
                derived = iteration.dataset.covariates.col(zj).cwiseProduct(
                    iteration.dataset.covariates.col(vj));
                roles[name] = data::Role::V;
                fixed_means[name] = iteration.target_zv_mean;
                break;
            default:
                break;
        }
        augmented = with_derived_column(iteration.dataset, name, derived);
        data = &augmented;
        spec.moderators.push_back(name);
    }

    sensitivity::VSensitivityOptions options;
    options.grid = {iteration.target_v_mean, iteration.target_v_mean, 1};
    options.model = spec;
    options.v_column = "v";
    options.fixed_v_target_means = std::move(fixed_means);
    // The grid point is the true target mean; never fail on range checks.
    options.allow_extrapolation = true;
    options.spline_for_continuous = true;
    options.spline_knots = 9;
    options.weighting_columns = {"z"};

    const auto result =
        method.method == SensMethod::outcome_model
            ? sensitivity::sens_v_outcome_model(*data, roles, options)
            : sensitivity::sens_v_weighted_outcome_model(*data, roles, options);
    return result.grid.front().tate;
}

BiasCurve run_scenario(const ScenarioConfig& config,
                       const std::vector<MethodSpec>& method_specs,
                       int n_threads) {
    config.validate();
    if (method_specs.empty()) {
        throw ConfigError("run_scenario: no method specs");
    }
    const int n = config.n_iterations;

    struct IterationSlot {
        std::vector<double> errors;
        bool failed = false;
    };
    std::vector<IterationSlot> slots(static_cast<std::size_t>(n));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) break;
            auto& slot = slots[static_cast<std::size_t>(i)];
            try {
                const auto iteration = generate_iteration(config, i);
                for (const auto& spec : method_specs) {
                    const double estimate =
                        run_sensitivity_estimate(iteration, config, spec);
                    slot.errors.push_back(estimate - iteration.true_tate);
                }
            } catch (const EstimationError&) {
                slot.failed = true;
            }
        }
    };

    const int threads = std::max(1, std::min(n_threads, n));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    int n_failed = 0;
    std::vector<std::vector<double>> errors(method_specs.size());
    for (const auto& slot : slots) {
        if (slot.failed) {
            ++n_failed;
            continue;
        }
        for (std::size_t m = 0; m < method_specs.size(); ++m) {
            errors[m].push_back(slot.errors[m]);
        }
    }
    if (static_cast<double>(n_failed) > 0.01 * static_cast<double>(n)) {
        throw EstimationError("scenario: " + std::to_string(n_failed) + " of " +
                              std::to_string(n) + " iterations failed (over 1%)");
    }

    BiasCurve curve;
    for (std::size_t m = 0; m < method_specs.size(); ++m) {
        BiasCurveRow row;
        row.correlation = config.latent_correlation;
        row.spec = method_specs[m];
        row.n_ok = static_cast<int>(errors[m].size());
        row.n_failed = n_failed;
        double sum = 0.0;
        for (const double e : errors[m]) sum += e;
        row.mean_bias = sum / static_cast<double>(row.n_ok);
        double ss = 0.0;
        for (const double e : errors[m]) {
            ss += (e - row.mean_bias) * (e - row.mean_bias);
        }
        const double sd =
            row.n_ok > 1 ? std::sqrt(ss / static_cast<double>(row.n_ok - 1)) : 0.0;
        row.mc_se = sd / std::sqrt(static_cast<double>(row.n_ok));
        curve.push_back(row);
    }
    return curve;
}

MirrorReport mirror_check(const ScenarioConfig& positive,
                          const ScenarioConfig& negative,
                          const std::vector<MethodSpec>& method_specs,
                          int n_threads) {
    ScenarioConfig check = negative;
    check.outcome_model = positive.outcome_model;
    // The two configs must agree except for the third-moderator sign.
    if (third_term(positive.outcome_model) != third_term(negative.outcome_model)) {
        throw ConfigError("mirror_check: scenarios use different third moderators");
    }
    const auto pos_curve = run_scenario(positive, method_specs, n_threads);
    const auto neg_curve = run_scenario(negative, method_specs, n_threads);

    MirrorReport report;
    for (std::size_t m = 0; m < method_specs.size(); ++m) {
        MirrorCheckRow row;
        row.correlation = positive.latent_correlation;
        row.spec = method_specs[m];
        row.bias_positive = pos_curve[m].mean_bias;
        row.bias_negative = neg_curve[m].mean_bias;
        row.combined_se = std::sqrt(pos_curve[m].mc_se * pos_curve[m].mc_se +
                                    neg_curve[m].mc_se * neg_curve[m].mc_se);
        row.mirrored = std::fabs(row.bias_positive + row.bias_negative) <=
                       3.0 * row.combined_se;
        report.all_mirrored = report.all_mirrored && row.mirrored;
        report.rows.push_back(row);
    }
    return report;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string token;
    for (const char c : text) {
        if (c == ',') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else if (c != ' ' && c != '\t') {
            token.push_back(c);
        }
    }
    if (!token.empty()) out.push_back(token);
    return out;
}

} // namespace

ScenarioFile scenario_from_config(const data::KeyValueConfig& config) {
    ScenarioFile file;
    file.base.z_type = var_type_from_string(config.at("z_type"));
    file.base.v_type = var_type_from_string(config.at("v_type"));
    file.base.outcome_model = outcome_model_from_string(config.at("outcome_model"));

    auto parse_int = [&](const std::string& key, int fallback) {
        if (!config.has(key)) return fallback;
        try {
            return std::stoi(config.at(key));
        } catch (const std::exception&) {
            throw ConfigError("scenario: key '" + key + "' is not an integer");
        }
    };
    file.base.n_rct = parse_int("n_rct", 400);
    file.base.n_target = parse_int("n_target", 5000);
    file.base.n_iterations = parse_int("n_iterations", 2000);

    const std::string correlations =
        config.has("correlations") ? config.at("correlations")
                                   : config.get_or("correlation", "0");
    for (const auto& token : split_list(correlations)) {
        try {
            file.correlations.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw ConfigError("scenario: correlation '" + token + "' is not numeric");
        }
    }
    if (file.correlations.empty()) {
        throw ConfigError("scenario: no correlations given");
    }

    std::vector<SensMethod> methods;
    for (const auto& token :
         split_list(config.get_or("methods", "outcome-model,weighted-outcome-model"))) {
        methods.push_back(sens_method_from_string(token));
    }
    std::vector<AnalysisSpec> analyses;
    const std::string default_specs =
        third_term(file.base.outcome_model) == ThirdTerm::none ? "correct"
                                                               : "correct,misspecified";
    for (const auto& token : split_list(config.get_or("analysis_specs", default_specs))) {
        analyses.push_back(analysis_spec_from_string(token));
    }
    for (const auto method : methods) {
        for (const auto analysis : analyses) {
            file.method_specs.push_back({method, analysis});
        }
    }

    // Validate the base config once per correlation later; check types now.
    ScenarioConfig probe = file.base;
    probe.latent_correlation = file.correlations.front();
    probe.validate();
    return file;
}

} // namespace genkit::sim
