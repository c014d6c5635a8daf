#include "genkit/sensitivity/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "genkit/errors.hpp"
#include "genkit/numerics/gaussian.hpp"

namespace genkit::sensitivity {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using estimators::interaction_term;
using estimators::OutcomeModelSpec;

} // namespace

GridSpec GridSpec::parse(const std::string& text) {
    GridSpec spec;
    const auto first = text.find(':');
    const auto second = text.find(':', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) {
        throw ConfigError("grid '" + text + "': expected lo:hi:n");
    }
    try {
        spec.lo = std::stod(text.substr(0, first));
        spec.hi = std::stod(text.substr(first + 1, second - first - 1));
        spec.n = std::stoi(text.substr(second + 1));
    } catch (const std::exception&) {
        throw ConfigError("grid '" + text + "': expected lo:hi:n with numeric fields");
    }
    if (spec.n < 1) {
        throw ConfigError("grid '" + text + "': need at least one point");
    }
    if (spec.hi < spec.lo) {
        throw ConfigError("grid '" + text + "': hi < lo");
    }
    return spec;
}

std::vector<double> GridSpec::points() const {
    if (n < 1) {
        throw ConfigError("grid: need at least one point");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    if (n == 1) {
        out.push_back(lo);
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        out.push_back(lo + step * i);
    }
    return out;
}

namespace {

std::string resolve_v_column(const data::RoleMap& roles,
                             const VSensitivityOptions& options) {
    if (!options.v_column.empty()) {
        const auto it = roles.find(options.v_column);
        if (it == roles.end() || it->second != data::Role::V) {
            throw ValidationError("sensitivity: column '" + options.v_column +
                                  "' does not have role V");
        }
        return options.v_column;
    }
    std::vector<std::string> v_columns;
    for (const auto& [column, role] : roles) {
        if (role == data::Role::V) v_columns.push_back(column);
    }
    if (v_columns.empty()) {
        throw ValidationError("sensitivity: no V-role column in the role map");
    }
    if (v_columns.size() > 1) {
        throw ValidationError(
            "sensitivity: several V-role columns; pick one with v_column");
    }
    return v_columns.front();
}

double target_column_mean(const data::StackedDataset& data,
                          const std::string& column) {
    const Eigen::Index j = data.covariate_index(column);
    double sum = 0.0;
    Eigen::Index n = 0;
    for (const auto i : data.target_rows()) {
        const double x = data.covariates(i, j);
        if (std::isnan(x)) {
            throw ValidationError("column '" + column +
                                  "' is not observed in the target sample");
        }
        sum += x;
        ++n;
    }
    return sum / static_cast<double>(n);
}

double rct_column_mean(const data::StackedDataset& data, const std::string& column) {
    const Eigen::Index j = data.covariate_index(column);
    double sum = 0.0;
    Eigen::Index n = 0;
    for (const auto i : data.rct_rows()) {
        sum += data.covariates(i, j);
        ++n;
    }
    return sum / static_cast<double>(n);
}

std::pair<double, double> rct_column_range(const data::StackedDataset& data,
                                           const std::string& column) {
    const Eigen::Index j = data.covariate_index(column);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto i : data.rct_rows()) {
        lo = std::min(lo, data.covariates(i, j));
        hi = std::max(hi, data.covariates(i, j));
    }
    return {lo, hi};
}

// Target means for each moderator in the fit, with the swept V column's
// slot reported back so the grid loop can overwrite it.
struct ModeratorMeans {
    std::vector<std::pair<std::string, double>> means;
    std::size_t v_slot = 0;
};

ModeratorMeans prepare_moderator_means(const data::StackedDataset& data,
                                       const data::RoleMap& roles,
                                       const OutcomeModelSpec& spec,
                                       const std::string& v_column,
                                       const VSensitivityOptions& options) {
    ModeratorMeans out;
    bool v_found = false;
    for (const auto& column : spec.moderators) {
        if (column == v_column) {
            out.v_slot = out.means.size();
            out.means.emplace_back(column, kNaN);  // filled per grid point
            v_found = true;
            continue;
        }
        const auto role_it = roles.find(column);
        const bool v_role = role_it != roles.end() && role_it->second == data::Role::V;
        if (v_role) {
            const auto fixed = options.fixed_v_target_means.find(column);
            if (fixed == options.fixed_v_target_means.end()) {
                throw ValidationError(
                    "moderator '" + column + "' has role V and is not the swept "
                    "column; supply its posited target mean in fixed_v_target_means "
                    "(no-three-way-interaction assumption)");
            }
            out.means.emplace_back(column, fixed->second);
        } else {
            out.means.emplace_back(column, target_column_mean(data, column));
        }
    }
    if (!v_found) {
        throw ValidationError("model moderators do not include the V column '" +
                              v_column + "'");
    }
    return out;
}

void check_v_grid_overlap(const data::StackedDataset& data,
                          const std::string& v_column,
                          const std::vector<double>& grid,
                          const VSensitivityOptions& options,
                          std::vector<std::string>& warnings) {
    const auto [lo, hi] = rct_column_range(data, v_column);
    const double grid_lo = *std::min_element(grid.begin(), grid.end());
    const double grid_hi = *std::max_element(grid.begin(), grid.end());
    if (grid_lo >= lo && grid_hi <= hi) return;
    std::ostringstream msg;
    msg << "grid for E[" << v_column << "|S=0] spans [" << grid_lo << ", " << grid_hi
        << "] outside the RCT range [" << lo << ", " << hi << "]";
    if (!options.allow_extrapolation) {
        throw ValidationError(msg.str() +
                              "; pass allow_extrapolation to override");
    }
    warnings.push_back(msg.str() + " (extrapolation explicitly allowed)");
}

void warn_on_z_overlap(const data::StackedDataset& data,
                       const data::RoleMap& roles, const OutcomeModelSpec& spec,
                       std::vector<std::string>& warnings) {
    std::vector<std::string> z_columns;
    for (const auto& column : spec.moderators) {
        const auto it = roles.find(column);
        if (it != roles.end() && it->second == data::Role::Z) {
            z_columns.push_back(column);
        }
    }
    for (const auto& flag : estimators::check_overlap(data, z_columns)) {
        if (flag.flagged) {
            warnings.push_back("positivity: moderator '" + flag.column + "': " +
                               flag.detail);
        }
    }
}

SensitivityResult sweep_outcome_model(const data::StackedDataset& data,
                                      const data::RoleMap& roles,
                                      const VSensitivityOptions& options,
                                      const numerics::ModelFit& fit,
                                      const OutcomeModelSpec& spec,
                                      const std::string& v_column,
                                      const std::string& method_name,
                                      std::vector<std::string> warnings) {
    auto means = prepare_moderator_means(data, roles, spec, v_column, options);
    check_v_grid_overlap(data, v_column, options.grid.points(), options, warnings);
    warn_on_z_overlap(data, roles, spec, warnings);

    means.means.erase(means.means.begin() +
                      static_cast<std::ptrdiff_t>(means.v_slot));
    auto result =
        sens_v_curve_from_fit(fit, means.means, v_column, options.grid,
                              options.ci_level);
    result.method = method_name;
    result.warnings.insert(result.warnings.begin(), warnings.begin(), warnings.end());
    return result;
}

} // namespace

SensitivityResult sens_v_curve_from_fit(
    const numerics::ModelFit& fit,
    const std::vector<std::pair<std::string, double>>& fixed_moderator_means,
    const std::string& v_column, const GridSpec& grid, double ci_level) {
    std::vector<std::pair<std::string, double>> means = fixed_moderator_means;
    means.emplace_back(v_column, kNaN);
    const std::size_t v_slot = means.size() - 1;

    SensitivityResult result;
    result.method = "outcome-model";
    result.param_names = {"target_mean_" + v_column};
    result.ci_level = ci_level;

    const double z = numerics::normal_quantile(0.5 + ci_level / 2.0);
    for (const double vbar : grid.points()) {
        means[v_slot].second = vbar;
        const auto c = estimators::treatment_effect_contrast(fit, means);
        const double half = z * std::sqrt(std::max(0.0, c.variance));
        result.grid.push_back({vbar, kNaN, c.point, c.point - half, c.point + half});
    }
    return result;
}

SensitivityResult sens_v_outcome_model(const data::StackedDataset& data,
                                       const data::RoleMap& roles,
                                       const VSensitivityOptions& options) {
    const std::string v_column = resolve_v_column(roles, options);
    const OutcomeModelSpec spec =
        options.model ? *options.model : OutcomeModelSpec::defaults(roles, true);
    const auto built = estimators::build_outcome_design(data, spec);
    const auto fit = numerics::fit_ols(built.design, built.response);
    return sweep_outcome_model(data, roles, options, fit, spec, v_column,
                               "outcome-model", fit.warnings);
}

estimators::WeightVector full_weighting_weights(const data::StackedDataset& data,
                                                const std::string& z_column,
                                                const std::string& v_column,
                                                double p_v1_given_z1,
                                                double p_v1_given_z0) {
    for (const double p : {p_v1_given_z1, p_v1_given_z0}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("full weighting: posited P(V=1|S=0,Z) outside [0,1]");
        }
    }
    const Eigen::Index zj = data.covariate_index(z_column);
    const Eigen::Index vj = data.covariate_index(v_column);

    // Cell counts: S-odds by Z from the stacked data, V prevalence by Z in
    // the RCT.
    double n_s0[2] = {0, 0}, n_s1[2] = {0, 0};
    double n_rct_v1[2] = {0, 0};
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        const int zi = data.covariates(i, zj) == 1.0 ? 1 : 0;
        if (data.sample_indicator(i) == 0) {
            n_s0[zi] += 1.0;
        } else {
            n_s1[zi] += 1.0;
            if (data.covariates(i, vj) == 1.0) n_rct_v1[zi] += 1.0;
        }
    }
    double odds_s0[2], p_v1_rct[2];
    for (int zi = 0; zi < 2; ++zi) {
        if (n_s1[zi] == 0.0) {
            throw EstimationError("full weighting: no RCT rows with " + z_column +
                                  "=" + std::to_string(zi));
        }
        odds_s0[zi] = n_s0[zi] / n_s1[zi];
        p_v1_rct[zi] = n_rct_v1[zi] / n_s1[zi];
        if (p_v1_rct[zi] == 0.0 || p_v1_rct[zi] == 1.0) {
            throw EstimationError("full weighting: empty (" + v_column + "," +
                                  z_column + ") cell in the RCT at " + z_column + "=" +
                                  std::to_string(zi) +
                                  "; the V-ratio denominator is inestimable");
        }
    }
    const double p_target[2] = {p_v1_given_z0, p_v1_given_z1};

    const auto rct = data.rct_rows();
    estimators::WeightVector weights;
    weights.formula = estimators::WeightVector::Formula::full_v_weight;
    weights.balanced_columns = {z_column, v_column};
    weights.weights.resize(static_cast<Eigen::Index>(rct.size()));
    for (std::size_t k = 0; k < rct.size(); ++k) {
        const int zi = data.covariates(rct[k], zj) == 1.0 ? 1 : 0;
        const int vi = data.covariates(rct[k], vj) == 1.0 ? 1 : 0;
        const double ratio = vi == 1 ? p_target[zi] / p_v1_rct[zi]
                                     : (1.0 - p_target[zi]) / (1.0 - p_v1_rct[zi]);
        weights.weights(static_cast<Eigen::Index>(k)) = odds_s0[zi] * ratio;
    }
    return weights;
}

SensitivityResult sens_v_full_weighting(const data::StackedDataset& data,
                                        const data::RoleMap& roles,
                                        const VSensitivityOptions& options) {
    const std::string v_column = resolve_v_column(roles, options);
    std::vector<std::string> z_columns;
    for (const auto& [column, role] : roles) {
        if (role == data::Role::Z) z_columns.push_back(column);
    }
    if (z_columns.size() != 1) {
        throw ValidationError(
            "full weighting requires exactly one Z-role column, found " +
            std::to_string(z_columns.size()));
    }
    const std::string z_column = z_columns.front();
    for (const auto& column : {z_column, v_column}) {
        if (!estimators::is_binary_column(data, column)) {
            throw ValidationError("full weighting is limited to binary moderators; '" +
                                  column + "' is not binary");
        }
    }
    if (!options.grid2) {
        throw ValidationError(
            "full weighting sweeps two probabilities; grid2 for P(V=1|S=0,Z=0) "
            "is missing");
    }

    SensitivityResult result;
    result.method = "full-weighting";
    result.param_names = {"p_v1_given_z1", "p_v1_given_z0"};
    result.ci_level = options.ci_level;

    bool warned = false;
    for (const double p1 : options.grid.points()) {
        for (const double p0 : options.grid2->points()) {
            const auto weights =
                full_weighting_weights(data, z_column, v_column, p1, p0);
            const auto estimate =
                estimators::estimate_tate_weighted(data, weights, options.ci_level);
            if (!warned && !estimate.warnings.empty()) {
                result.warnings.insert(result.warnings.end(),
                                       estimate.warnings.begin(),
                                       estimate.warnings.end());
                warned = true;
            }
            result.grid.push_back(
                {p1, p0, estimate.point, estimate.ci_lower, estimate.ci_upper});
        }
    }
    return result;
}

namespace {

std::vector<std::string> default_weighting_columns(const data::RoleMap& roles,
                                                   bool include_x) {
    std::vector<std::string> columns;
    for (const auto& [column, role] : roles) {
        if (role == data::Role::Z || (include_x && role == data::Role::X)) {
            columns.push_back(column);
        }
    }
    return columns;
}

void warn_on_residual_imbalance(const data::StackedDataset& data,
                                const std::vector<std::string>& columns,
                                const estimators::WeightVector& weights,
                                double threshold,
                                std::vector<std::string>& warnings) {
    const auto balance = estimators::balance_report(data, columns, &weights);
    for (const auto& entry : balance.entries) {
        if (entry.smd_defined && std::fabs(entry.smd_after) > threshold) {
            std::ostringstream msg;
            msg << "residual imbalance: |SMD| for '" << entry.column
                << "' is " << std::fabs(entry.smd_after) << " after weighting (above "
                << threshold << ")";
            warnings.push_back(msg.str());
        }
    }
}

} // namespace

SensitivityResult sens_v_weighted_outcome_model(const data::StackedDataset& data,
                                                const data::RoleMap& roles,
                                                const VSensitivityOptions& options) {
    const std::string v_column = resolve_v_column(roles, options);
    const std::vector<std::string> weighting_columns =
        options.weighting_columns.empty() ? default_weighting_columns(roles, false)
                                          : options.weighting_columns;
    if (weighting_columns.empty()) {
        throw ValidationError("weighted outcome model: no weighting columns");
    }

    estimators::WeightOptions weight_options;
    weight_options.spline_for_continuous = options.spline_for_continuous;
    weight_options.spline_knots = options.spline_knots;
    const auto weights =
        estimators::membership_weights(data, roles, weighting_columns, weight_options);

    std::vector<std::string> warnings = weights.warnings;
    warn_on_residual_imbalance(data, weighting_columns, weights,
                               options.balance_warning_smd, warnings);

    const OutcomeModelSpec spec =
        options.model ? *options.model : OutcomeModelSpec::defaults(roles, true);
    const auto built = estimators::build_outcome_design(data, spec);
    const auto fit = numerics::fit_wls(built.design, built.response, weights.weights,
                                       numerics::CovarianceKind::sandwich);
    warnings.insert(warnings.end(), fit.warnings.begin(), fit.warnings.end());
    return sweep_outcome_model(data, roles, options, fit, spec, v_column,
                               "weighted-outcome-model", std::move(warnings));
}

namespace {

struct ZAdjustedTate {
    double point = 0.0;
    double variance = 0.0;
};

// Z-adjusted TATE and its variance from one interaction fit; optionally
// anchored at the unadjusted difference in means instead.
ZAdjustedTate z_adjusted_tate(const data::StackedDataset& data,
                              const data::RoleMap& roles,
                              const OutcomeModelSpec& spec,
                              const numerics::ModelFit& fit,
                              SateSource sate_source, double ci_level) {
    (void)ci_level;
    std::vector<std::pair<std::string, double>> target_means;
    for (const auto& column : spec.moderators) {
        target_means.emplace_back(column, target_column_mean(data, column));
    }
    if (sate_source == SateSource::interaction_model) {
        const auto c = estimators::treatment_effect_contrast(fit, target_means);
        return {c.point, c.variance};
    }

    // Difference-in-means anchor: SATE_dm + sum beta_zt (z0bar - z1bar),
    // variance with the two pieces treated as independent.
    estimators::SateOptions sate_options;
    const auto sate = estimators::estimate_sate(data, sate_options);
    std::vector<std::pair<std::string, double>> gaps;
    for (const auto& [column, mean0] : target_means) {
        gaps.emplace_back(column, mean0 - rct_column_mean(data, column));
    }
    Eigen::VectorXd contrast = Eigen::VectorXd::Zero(fit.coefficients.size());
    for (const auto& [column, gap] : gaps) {
        contrast(fit.term_index(interaction_term(column))) = gap;
    }
    const double shift = contrast.dot(fit.coefficients);
    const double shift_var = contrast.dot(fit.covariance * contrast);
    return {sate.point + shift,
            sate.std_error * sate.std_error + shift_var};
}

SensitivityResult sweep_u_grid(const USensitivityOptions& options,
                               const std::string& method_name, double base_point,
                               double base_se, bool with_ci,
                               std::vector<std::string> warnings) {
    SensitivityResult result;
    result.method = method_name;
    result.param_names = {"beta_ut", "delta_u"};
    result.ci_level = options.ci_level;
    result.warnings = std::move(warnings);

    const double z = numerics::normal_quantile(0.5 + options.ci_level / 2.0);
    const double half = with_ci ? z * base_se : kNaN;
    for (const double beta_ut : options.beta_ut_grid.points()) {
        for (const double delta_u : options.delta_u_grid.points()) {
            const double point = base_point + beta_ut * delta_u;
            result.grid.push_back({beta_ut, delta_u, point,
                                   with_ci ? point - half : kNaN,
                                   with_ci ? point + half : kNaN});
        }
    }
    return result;
}

} // namespace

SensitivityResult sens_u_bias_formula(const data::StackedDataset& data,
                                      const data::RoleMap& roles,
                                      const USensitivityOptions& options) {
    const OutcomeModelSpec spec =
        options.model ? *options.model : OutcomeModelSpec::defaults(roles, false);
    if (spec.moderators.empty()) {
        throw ValidationError("U-case bias formula: no Z-role moderators in the model");
    }
    const auto built = estimators::build_outcome_design(data, spec);
    const auto fit = numerics::fit_ols(built.design, built.response);
    const auto base =
        z_adjusted_tate(data, roles, spec, fit, options.sate_source, options.ci_level);

    std::vector<std::string> warnings = fit.warnings;
    warn_on_z_overlap(data, roles, spec, warnings);
    return sweep_u_grid(options, "bias-formula", base.point,
                        std::sqrt(std::max(0.0, base.variance)), true,
                        std::move(warnings));
}

SensitivityResult sens_u_weighting_plus_bias(const data::StackedDataset& data,
                                             const data::RoleMap& roles,
                                             const USensitivityOptions& options) {
    const std::vector<std::string> weighting_columns =
        default_weighting_columns(roles, true);
    if (weighting_columns.empty()) {
        throw ValidationError("weighting-plus-bias: no X or Z columns to weight on");
    }
    estimators::WeightOptions weight_options;
    weight_options.spline_for_continuous = options.spline_for_continuous;
    weight_options.spline_knots = options.spline_knots;
    const auto weights =
        estimators::membership_weights(data, roles, weighting_columns, weight_options);

    auto xz_estimate = estimators::estimate_tate_weighted(data, weights, options.ci_level);
    xz_estimate.estimand = estimators::Estimand::xzate;

    std::vector<std::string> warnings = weights.warnings;
    warn_on_residual_imbalance(data, weighting_columns, weights,
                               options.balance_warning_smd, warnings);

    if (!options.residual_z_gap_correction) {
        return sweep_u_grid(options, "weighting-plus-bias", xz_estimate.point,
                            xz_estimate.std_error, true, std::move(warnings));
    }

    // Residual-gap correction: beta_zt from the xz-weighted interaction fit,
    // applied to the gap between the target mean and the weighted RCT mean
    // of each moderator. Point estimates only.
    const OutcomeModelSpec spec =
        options.model ? *options.model : OutcomeModelSpec::defaults(roles, false);
    if (spec.moderators.empty()) {
        throw ValidationError("residual-gap correction: no Z-role moderators");
    }
    const auto built = estimators::build_outcome_design(data, spec);
    const auto fit = numerics::fit_wls(built.design, built.response, weights.weights,
                                       numerics::CovarianceKind::sandwich);
    warnings.insert(warnings.end(), fit.warnings.begin(), fit.warnings.end());

    const auto rct = data.rct_rows();
    double correction = 0.0;
    for (const auto& column : spec.moderators) {
        const Eigen::Index j = data.covariate_index(column);
        double wsum = 0.0, wmean = 0.0;
        for (std::size_t k = 0; k < rct.size(); ++k) {
            const double w = weights.weights(static_cast<Eigen::Index>(k));
            wsum += w;
            wmean += w * data.covariates(rct[k], j);
        }
        wmean /= wsum;
        correction +=
            fit.coefficient(interaction_term(column)) *
            (target_column_mean(data, column) - wmean);
    }
    warnings.push_back(
        "residual Z-gap correction applied; intervals are omitted for this variant");
    return sweep_u_grid(options, "weighting-plus-bias", xz_estimate.point + correction,
                        kNaN, false, std::move(warnings));
}

} // namespace genkit::sensitivity
