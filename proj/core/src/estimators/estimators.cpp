#include "genkit/estimators/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "genkit/errors.hpp"
#include "genkit/numerics/gaussian.hpp"
#include "genkit/numerics/spline.hpp"

namespace genkit::estimators {

std::string estimand_to_string(Estimand e) {
    switch (e) {
        case Estimand::sate: return "SATE";
        case Estimand::tate: return "TATE";
        case Estimand::xzate: return "xzATE";
    }
    return "?";
}

std::string method_to_string(Method m) {
    switch (m) {
        case Method::difference_in_means: return "difference-in-means";
        case Method::outcome_model: return "outcome-model";
        case Method::weighting: return "weighting";
    }
    return "?";
}

std::string weight_formula_to_string(WeightVector::Formula f) {
    switch (f) {
        case WeightVector::Formula::odds_given_z: return "odds-given-Z";
        case WeightVector::Formula::odds_given_xz: return "odds-given-XZ";
        case WeightVector::Formula::full_v_weight: return "full-V-weight";
    }
    return "?";
}

double normal_ci_halfwidth(double std_error, double ci_level) {
    if (!(ci_level > 0.0 && ci_level < 1.0)) {
        throw ValidationError("ci_level must lie in (0,1)");
    }
    return numerics::normal_quantile(0.5 + ci_level / 2.0) * std_error;
}

EffectEstimate make_normal_estimate(Estimand estimand, Method method,
                                    double point, double std_error,
                                    double ci_level) {
    EffectEstimate est;
    est.estimand = estimand;
    est.method = method;
    est.point = point;
    est.std_error = std_error;
    est.ci_level = ci_level;
    const double half = normal_ci_halfwidth(std_error, ci_level);
    est.ci_lower = point - half;
    est.ci_upper = point + half;
    return est;
}

WeightVector WeightVector::unit(Eigen::Index n_rct) {
    WeightVector w;
    w.weights = Eigen::VectorXd::Ones(n_rct);
    w.formula = Formula::odds_given_z;
    return w;
}

double BalanceReport::max_abs_smd_after() const {
    double worst = 0.0;
    for (const auto& entry : entries) {
        if (entry.smd_defined) {
            worst = std::max(worst, std::fabs(entry.smd_after));
        }
    }
    return worst;
}

bool is_binary_column(const data::StackedDataset& data, const std::string& column) {
    const Eigen::Index j = data.covariate_index(column);
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        const double x = data.covariates(i, j);
        if (std::isnan(x)) continue;
        if (x != 0.0 && x != 1.0) return false;
    }
    return true;
}

std::vector<OverlapFlag> check_overlap(const data::StackedDataset& data,
                                       const std::vector<std::string>& columns,
                                       double trim_allowance) {
    std::vector<OverlapFlag> flags;
    const auto rct = data.rct_rows();
    const auto target = data.target_rows();
    for (const auto& column : columns) {
        const Eigen::Index j = data.covariate_index(column);
        OverlapFlag flag;
        flag.column = column;
        if (is_binary_column(data, column)) {
            bool rct_has[2] = {false, false};
            bool target_has[2] = {false, false};
            for (const auto i : rct) rct_has[data.covariates(i, j) == 1.0] = true;
            for (const auto i : target) {
                const double x = data.covariates(i, j);
                if (!std::isnan(x)) target_has[x == 1.0] = true;
            }
            for (int level = 0; level < 2; ++level) {
                if (target_has[level] && !rct_has[level]) {
                    flag.flagged = true;
                    flag.detail = "level " + std::to_string(level) +
                                  " present in the target sample but absent from the RCT";
                }
            }
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto i : rct) {
                lo = std::min(lo, data.covariates(i, j));
                hi = std::max(hi, data.covariates(i, j));
            }
            Eigen::Index outside = 0, observed = 0;
            for (const auto i : target) {
                const double x = data.covariates(i, j);
                if (std::isnan(x)) continue;
                ++observed;
                if (x < lo || x > hi) ++outside;
            }
            if (observed > 0) {
                const double fraction =
                    static_cast<double>(outside) / static_cast<double>(observed);
                if (fraction > trim_allowance) {
                    std::ostringstream detail;
                    detail << "fraction " << fraction
                           << " of target values outside the RCT range [" << lo << ", "
                           << hi << "]";
                    flag.flagged = true;
                    flag.detail = detail.str();
                }
            }
        }
        flags.push_back(std::move(flag));
    }
    return flags;
}

namespace {

struct ArmStats {
    Eigen::Index n = 0;
    double mean = 0.0;
    double variance = 0.0;  // sample variance
};

ArmStats arm_outcome_stats(const data::StackedDataset& data, int arm) {
    ArmStats stats;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        if (data.sample_indicator(i) == 1 && data.treatment(i) == arm) {
            ++stats.n;
            sum += data.outcome(i);
        }
    }
    if (stats.n == 0) return stats;
    stats.mean = sum / static_cast<double>(stats.n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        if (data.sample_indicator(i) == 1 && data.treatment(i) == arm) {
            const double d = data.outcome(i) - stats.mean;
            ss += d * d;
        }
    }
    stats.variance = stats.n > 1 ? ss / static_cast<double>(stats.n - 1) : 0.0;
    return stats;
}

} // namespace

EffectEstimate estimate_sate(const data::StackedDataset& data,
                             const SateOptions& options) {
    const ArmStats treated = arm_outcome_stats(data, 1);
    const ArmStats control = arm_outcome_stats(data, 0);
    if (treated.n == 0 || control.n == 0) {
        throw EstimationError("SATE requires RCT rows in both treatment arms");
    }

    if (options.adjust_for) {
        OutcomeModelSpec spec;
        for (const auto& [column, role] : *options.adjust_for) {
            (void)role;
            spec.main_effects.push_back(column);
        }
        const auto built = build_outcome_design(data, spec);
        const auto fit = numerics::fit_ols(built.design, built.response);
        const auto t_idx = fit.term_index(kTreatmentTerm);
        return make_normal_estimate(Estimand::sate, Method::outcome_model,
                                    fit.coefficients(t_idx), fit.std_error(t_idx),
                                    options.ci_level);
    }

    const double point = treated.mean - control.mean;
    const double se = std::sqrt(treated.variance / static_cast<double>(treated.n) +
                                control.variance / static_cast<double>(control.n));
    return make_normal_estimate(Estimand::sate, Method::difference_in_means, point,
                                se, options.ci_level);
}

TateOutcomeResult estimate_tate_outcome_model(const data::StackedDataset& data,
                                              const data::RoleMap& roles,
                                              const TateOptions& options) {
    // An empty moderator list is allowed: under a no-moderation model the
    // TATE estimate is the treatment coefficient itself.
    const OutcomeModelSpec spec =
        options.model ? *options.model : OutcomeModelSpec::defaults(roles, false);

    // Every moderator must be observed in the target sample.
    const auto target = data.target_rows();
    std::vector<std::pair<std::string, double>> target_means;
    std::vector<double> target_ses;
    for (const auto& column : spec.moderators) {
        const Eigen::Index j = data.covariate_index(column);
        double sum = 0.0;
        for (const auto i : target) {
            const double x = data.covariates(i, j);
            if (std::isnan(x)) {
                throw ValidationError(
                    "moderator '" + column +
                    "' is not observed in the target sample; use the V-case "
                    "sensitivity analysis instead");
            }
            sum += x;
        }
        const double mean = sum / static_cast<double>(target.size());
        double ss = 0.0;
        for (const auto i : target) {
            const double d = data.covariates(i, j) - mean;
            ss += d * d;
        }
        const double sd = target.size() > 1
                              ? std::sqrt(ss / static_cast<double>(target.size() - 1))
                              : 0.0;
        target_means.emplace_back(column, mean);
        target_ses.push_back(sd / std::sqrt(static_cast<double>(target.size())));
    }

    std::vector<std::string> warnings;
    const auto overlap = check_overlap(data, spec.moderators);
    for (const auto& flag : overlap) {
        if (!flag.flagged) continue;
        const std::string message =
            "positivity: moderator '" + flag.column + "': " + flag.detail;
        if (options.allow_nonoverlap) {
            warnings.push_back(message + " (override requested)");
        } else {
            throw ValidationError(message +
                                  "; adjust the model or allow non-overlap explicitly");
        }
    }

    const auto built = build_outcome_design(data, spec);
    const auto fit = numerics::fit_ols(built.design, built.response);
    const auto contrast = treatment_effect_contrast(fit, target_means);

    TateOutcomeResult result;
    result.fit = fit;
    result.moderator_target_means = target_means;
    result.estimate = make_normal_estimate(Estimand::tate, Method::outcome_model,
                                           contrast.point,
                                           std::sqrt(std::max(0.0, contrast.variance)),
                                           options.ci_level);

    if (options.incorporate_target_mean_uncertainty) {
        const std::size_t k = target_means.size();
        if (k > 12) {
            throw ValidationError(
                "target-mean uncertainty enumeration limited to 12 moderators");
        }
        const double z = numerics::normal_quantile(0.5 + options.ci_level / 2.0);
        double lower = result.estimate.ci_lower;
        double upper = result.estimate.ci_upper;
        std::vector<std::pair<std::string, double>> corner(target_means);
        for (std::size_t mask = 0; mask < (1ull << k); ++mask) {
            for (std::size_t m = 0; m < k; ++m) {
                const double shift = ((mask >> m) & 1) ? z : -z;
                corner[m].second = target_means[m].second + shift * target_ses[m];
            }
            const auto c = treatment_effect_contrast(fit, corner);
            const double half = z * std::sqrt(std::max(0.0, c.variance));
            lower = std::min(lower, c.point - half);
            upper = std::max(upper, c.point + half);
        }
        result.estimate.ci_lower = lower;
        result.estimate.ci_upper = upper;
        result.estimate.warnings.push_back(
            "interval widened over the confidence limits of the target moderator means");
    }
    result.estimate.warnings.insert(result.estimate.warnings.end(), warnings.begin(),
                                    warnings.end());
    return result;
}

WeightVector membership_weights(const data::StackedDataset& data,
                                const data::RoleMap& roles,
                                const std::vector<std::string>& columns,
                                const WeightOptions& options) {
    // An empty column list gives the intercept-only model: every RCT row
    // receives the marginal odds n0/n1.
    const Eigen::Index n = data.n_rows();
    bool any_x_role = false;

    numerics::DesignMatrix design;
    design.intercept_included = true;
    std::vector<Eigen::VectorXd> blocks;
    std::vector<std::string> names;
    names.push_back("(intercept)");
    blocks.push_back(Eigen::VectorXd::Ones(n));

    for (const auto& column : columns) {
        const auto role_it = roles.find(column);
        if (role_it != roles.end() && role_it->second == data::Role::V) {
            throw ValidationError("membership_weights: column '" + column +
                                  "' has role V (observed in the RCT only) and cannot "
                                  "enter the sample-membership model");
        }
        if (role_it != roles.end() && role_it->second == data::Role::X) {
            any_x_role = true;
        }
        const Eigen::Index j = data.covariate_index(column);
        Eigen::VectorXd values = data.covariates.col(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(values(i))) {
                throw ValidationError("membership_weights: column '" + column +
                                      "' is missing on stacked row " +
                                      std::to_string(i + 1));
            }
        }
        if (!is_binary_column(data, column) && options.spline_for_continuous) {
            const auto basis = numerics::natural_spline_basis(
                values, options.spline_knots, column + "_ns");
            for (Eigen::Index b = 0; b < basis.n_cols(); ++b) {
                names.push_back(basis.column_names[static_cast<std::size_t>(b)]);
                blocks.push_back(basis.values.col(b));
            }
        } else {
            names.push_back(column);
            blocks.push_back(std::move(values));
        }
    }

    design.values.resize(n, static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        design.values.col(static_cast<Eigen::Index>(b)) = blocks[b];
    }
    design.column_names = names;

    // S=0 (target sample) is the modeled event, so the linear predictor is
    // the log-odds of target membership and the weight is exp(eta).
    Eigen::VectorXd response(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        response(i) = data.sample_indicator(i) == 0 ? 1.0 : 0.0;
    }
    const auto fit = numerics::fit_logistic(design, response, options.logistic);
    if (!fit.converged) {
        throw EstimationError("membership model did not converge after " +
                              std::to_string(options.logistic.max_iterations) +
                              " iterations");
    }

    WeightVector result;
    result.balanced_columns = columns;
    result.formula = any_x_role ? WeightVector::Formula::odds_given_xz
                                : WeightVector::Formula::odds_given_z;
    result.warnings = fit.warnings;

    const auto rct = data.rct_rows();
    result.weights.resize(static_cast<Eigen::Index>(rct.size()));
    std::vector<Eigen::Index> near_violations;
    for (std::size_t k = 0; k < rct.size(); ++k) {
        const double eta = design.values.row(rct[k]).dot(fit.coefficients);
        result.weights(static_cast<Eigen::Index>(k)) = std::exp(eta);
        // P(S=1 | x) = expit(-eta)
        if (numerics::expit(-eta) < options.min_rct_membership_probability) {
            near_violations.push_back(rct[k]);
        }
    }
    if (!near_violations.empty()) {
        std::ostringstream msg;
        msg << "near-violation of positivity: fitted RCT membership probability below "
            << options.min_rct_membership_probability << " on rows";
        const std::size_t shown = std::min<std::size_t>(near_violations.size(), 10);
        for (std::size_t k = 0; k < shown; ++k) {
            msg << ' ' << (near_violations[k] + 1);
        }
        if (near_violations.size() > shown) {
            msg << " (+" << near_violations.size() - shown << " more)";
        }
        result.warnings.push_back(msg.str());
    }
    return result;
}

EffectEstimate estimate_tate_weighted(const data::StackedDataset& data,
                                      const WeightVector& weights,
                                      double ci_level) {
    const auto rct = data.rct_rows();
    if (weights.weights.size() != static_cast<Eigen::Index>(rct.size())) {
        throw ValidationError("estimate_tate_weighted: weight length does not match "
                              "the RCT row count");
    }
    double treated_total = 0.0, control_total = 0.0;
    for (std::size_t k = 0; k < rct.size(); ++k) {
        const double w = weights.weights(static_cast<Eigen::Index>(k));
        if (data.treatment(rct[k]) == 1) {
            treated_total += w;
        } else {
            control_total += w;
        }
    }
    if (treated_total <= 0.0 || control_total <= 0.0) {
        throw EstimationError(
            "degenerate weights: a treatment arm received zero total weight");
    }

    // Weighted regression of the outcome on treatment: the coefficient of T
    // is exactly the Hajek weighted-mean difference.
    numerics::DesignMatrix design;
    design.intercept_included = true;
    design.column_names = {kInterceptTerm, kTreatmentTerm};
    const auto n = static_cast<Eigen::Index>(rct.size());
    design.values.resize(n, 2);
    Eigen::VectorXd response(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.values(i, 0) = 1.0;
        design.values(i, 1) = static_cast<double>(data.treatment(rct[static_cast<std::size_t>(i)]));
        response(i) = data.outcome(rct[static_cast<std::size_t>(i)]);
    }
    const auto fit = numerics::fit_wls(design, response, weights.weights,
                                       numerics::CovarianceKind::sandwich);
    const auto t_idx = fit.term_index(kTreatmentTerm);
    auto estimate = make_normal_estimate(Estimand::tate, Method::weighting,
                                         fit.coefficients(t_idx),
                                         fit.std_error(t_idx), ci_level);
    estimate.warnings = weights.warnings;
    return estimate;
}

BalanceReport balance_report(const data::StackedDataset& data,
                             const std::vector<std::string>& columns,
                             const WeightVector* weights) {
    const auto rct = data.rct_rows();
    const auto target = data.target_rows();
    const WeightVector unit = WeightVector::unit(static_cast<Eigen::Index>(rct.size()));
    const WeightVector& w = weights ? *weights : unit;
    if (w.weights.size() != static_cast<Eigen::Index>(rct.size())) {
        throw ValidationError("balance_report: weight length does not match RCT rows");
    }

    const auto overlap = check_overlap(data, columns);
    BalanceReport report;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const Eigen::Index j = data.covariate_index(columns[c]);
        BalanceEntry entry;
        entry.column = columns[c];

        double target_sum = 0.0;
        Eigen::Index target_n = 0;
        for (const auto i : target) {
            const double x = data.covariates(i, j);
            if (std::isnan(x)) {
                throw ValidationError("balance_report: column '" + columns[c] +
                                      "' is not observed in the target sample");
            }
            target_sum += x;
            ++target_n;
        }
        const double target_mean = target_sum / static_cast<double>(target_n);

        double rct_mean = 0.0;
        for (const auto i : rct) rct_mean += data.covariates(i, j);
        rct_mean /= static_cast<double>(rct.size());
        double rct_ss = 0.0;
        for (const auto i : rct) {
            const double d = data.covariates(i, j) - rct_mean;
            rct_ss += d * d;
        }
        const double rct_sd =
            rct.size() > 1 ? std::sqrt(rct_ss / static_cast<double>(rct.size() - 1)) : 0.0;

        double wsum = 0.0, wmean = 0.0;
        for (std::size_t k = 0; k < rct.size(); ++k) {
            const double wk = w.weights(static_cast<Eigen::Index>(k));
            wsum += wk;
            wmean += wk * data.covariates(rct[k], j);
        }
        if (wsum <= 0.0) {
            throw EstimationError("balance_report: nonpositive weight total");
        }
        wmean /= wsum;

        if (rct_sd > 0.0) {
            entry.smd_before = (target_mean - rct_mean) / rct_sd;
            entry.smd_after = (target_mean - wmean) / rct_sd;
        } else {
            entry.smd_defined = false;
            report.warnings.push_back("column '" + columns[c] +
                                      "' has zero RCT standard deviation; SMD undefined");
        }
        entry.overlap_flag = overlap[c].flagged;
        entry.overlap_detail = overlap[c].detail;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace genkit::estimators
