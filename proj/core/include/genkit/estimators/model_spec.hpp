#pragma once

#include <string>
#include <utility>
#include <vector>

#include "genkit/data/dataset.hpp"
#include "genkit/numerics/regression.hpp"

namespace genkit::estimators {

// Term layout of the interaction outcome model fit to the RCT rows:
// intercept, treatment, main effects, then one treatment interaction per
// moderator. Moderators are not added as main effects implicitly.
struct OutcomeModelSpec {
    std::vector<std::string> main_effects;
    std::vector<std::string> moderators;

    // Main effects for every X and Z (and V) column; interactions for every
    // Z (and V) column.
    static OutcomeModelSpec defaults(const data::RoleMap& roles, bool include_v);
};

inline constexpr const char* kInterceptTerm = "(intercept)";
inline constexpr const char* kTreatmentTerm = "t";

std::string interaction_term(const std::string& column);

struct OutcomeDesign {
    numerics::DesignMatrix design;
    Eigen::VectorXd response;
    std::vector<Eigen::Index> rows;  // dataset row of each design row
};

// Design over the RCT rows. Throws when a column is unknown or a V-role
// column would be required outside the RCT.
OutcomeDesign build_outcome_design(const data::StackedDataset& data,
                                   const OutcomeModelSpec& spec);

// Point and variance of beta_t + sum_m mean_m * beta_{t:m}, the treatment
// effect at the given moderator means, from the fit's joint covariance.
struct ContrastResult {
    double point = 0.0;
    double variance = 0.0;
};

ContrastResult treatment_effect_contrast(
    const numerics::ModelFit& fit,
    const std::vector<std::pair<std::string, double>>& moderator_means);

} // namespace genkit::estimators
