#include "genkit/estimators/model_spec.hpp"

#include <cmath>

#include "genkit/errors.hpp"

namespace genkit::estimators {

OutcomeModelSpec OutcomeModelSpec::defaults(const data::RoleMap& roles,
                                            bool include_v) {
    OutcomeModelSpec spec;
    for (const auto& [column, role] : roles) {
        const bool v_role = role == data::Role::V;
        if (v_role && !include_v) continue;
        spec.main_effects.push_back(column);
        if (role == data::Role::Z || v_role) {
            spec.moderators.push_back(column);
        }
    }
    return spec;
}

std::string interaction_term(const std::string& column) {
    return std::string(kTreatmentTerm) + ":" + column;
}

OutcomeDesign build_outcome_design(const data::StackedDataset& data,
                                   const OutcomeModelSpec& spec) {
    OutcomeDesign out;
    out.rows = data.rct_rows();
    const auto n = static_cast<Eigen::Index>(out.rows.size());
    const auto p = static_cast<Eigen::Index>(2 + spec.main_effects.size() +
                                             spec.moderators.size());

    out.design.values.resize(n, p);
    out.design.intercept_included = true;
    out.design.column_names.clear();
    out.design.column_names.push_back(kInterceptTerm);
    out.design.column_names.push_back(kTreatmentTerm);
    for (const auto& column : spec.main_effects) {
        out.design.column_names.push_back(column);
    }
    for (const auto& column : spec.moderators) {
        out.design.column_names.push_back(interaction_term(column));
    }
    out.response.resize(n);

    std::vector<Eigen::Index> main_idx, mod_idx;
    for (const auto& column : spec.main_effects) {
        main_idx.push_back(data.covariate_index(column));
    }
    for (const auto& column : spec.moderators) {
        mod_idx.push_back(data.covariate_index(column));
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index row = out.rows[static_cast<std::size_t>(i)];
        const double t = static_cast<double>(data.treatment(row));
        out.design.values(i, 0) = 1.0;
        out.design.values(i, 1) = t;
        Eigen::Index j = 2;
        for (const Eigen::Index c : main_idx) {
            const double x = data.covariates(row, c);
            if (std::isnan(x)) {
                throw ValidationError("outcome model: covariate '" +
                                      data.covariate_names[static_cast<std::size_t>(c)] +
                                      "' missing on an RCT row");
            }
            out.design.values(i, j++) = x;
        }
        for (const Eigen::Index c : mod_idx) {
            const double x = data.covariates(row, c);
            if (std::isnan(x)) {
                throw ValidationError("outcome model: moderator '" +
                                      data.covariate_names[static_cast<std::size_t>(c)] +
                                      "' missing on an RCT row");
            }
            out.design.values(i, j++) = t * x;
        }
        out.response(i) = data.outcome(row);
    }
    return out;
}

ContrastResult treatment_effect_contrast(
    const numerics::ModelFit& fit,
    const std::vector<std::pair<std::string, double>>& moderator_means) {
    const auto p = fit.coefficients.size();
    Eigen::VectorXd contrast = Eigen::VectorXd::Zero(p);
    const auto t_idx = fit.term_index(kTreatmentTerm);
    if (t_idx < 0) {
        throw ValidationError("fit has no treatment term '" +
                              std::string(kTreatmentTerm) + "'");
    }
    contrast(t_idx) = 1.0;
    for (const auto& [column, mean] : moderator_means) {
        const auto idx = fit.term_index(interaction_term(column));
        if (idx < 0) {
            throw ValidationError("fit has no interaction term for moderator '" +
                                  column + "'");
        }
        contrast(idx) = mean;
    }
    ContrastResult result;
    result.point = contrast.dot(fit.coefficients);
    result.variance = contrast.dot(fit.covariance * contrast);
    return result;
}

} // namespace genkit::estimators
