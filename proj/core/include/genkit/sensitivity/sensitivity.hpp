#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genkit/data/dataset.hpp"
#include "genkit/estimators/estimators.hpp"

namespace genkit::sensitivity {

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    int n = 101;

    // Parses "lo:hi:n".
    static GridSpec parse(const std::string& text);
    std::vector<double> points() const;
};

struct SensitivityPoint {
    double param1 = 0.0;
    double param2 = 0.0;  // NaN for one-parameter methods
    double tate = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;  // CI entries NaN when the method yields points only
};

struct SensitivityResult {
    std::string method;
    std::vector<std::string> param_names;  // one or two entries
    std::vector<SensitivityPoint> grid;    // param1-major, ascending
    double ci_level = 0.95;
    std::vector<std::string> warnings;
};

// Options for the V case: a moderator observed in the RCT but not in the
// target sample.
struct VSensitivityOptions {
    GridSpec grid;                    // target mean of V, or P(V=1|S=0,Z=1)
    std::optional<GridSpec> grid2;    // P(V=1|S=0,Z=0) (full weighting only)
    std::vector<std::string> weighting_columns;  // weighted outcome model;
                                                 // default: all Z columns
    bool allow_extrapolation = false;
    bool spline_for_continuous = true;
    int spline_knots = 9;
    double ci_level = 0.95;
    std::optional<estimators::OutcomeModelSpec> model;
    // Which V-role column the grid sweeps; defaults to the single V column.
    std::string v_column;
    // Posited target means for any V-role moderator other than v_column.
    // Required for such terms: effects moderated jointly by observed and
    // unobserved variables are outside the no-three-way-interaction
    // assumption unless their target mean is supplied explicitly.
    std::map<std::string, double> fixed_v_target_means;
    // Residual imbalance above this |SMD| after weighting adds a warning.
    double balance_warning_smd = 0.1;
};

// TATE curve over the posited target mean of V from the interaction
// outcome model: beta_t + beta_zt E[Z|S=0] + beta_vt vbar0, delta-method band.
SensitivityResult sens_v_outcome_model(const data::StackedDataset& data,
                                       const data::RoleMap& roles,
                                       const VSensitivityOptions& options);

// Same sweep from an already-fitted interaction model: the swept column's
// target mean runs over the grid while the other moderator means stay
// fixed. Useful when only published coefficients are available.
SensitivityResult sens_v_curve_from_fit(
    const numerics::ModelFit& fit,
    const std::vector<std::pair<std::string, double>>& fixed_moderator_means,
    const std::string& v_column, const GridSpec& grid, double ci_level = 0.95);

// Full weighting for one binary Z and one binary V: reweights the RCT by
// the product of the S-odds given Z and the posited-vs-observed V ratio,
// over the grid of (P(V=1|S=0,Z=1), P(V=1|S=0,Z=0)).
SensitivityResult sens_v_full_weighting(const data::StackedDataset& data,
                                        const data::RoleMap& roles,
                                        const VSensitivityOptions& options);

// The four-cell weight vector at one grid pair; exposed for diagnostics.
estimators::WeightVector full_weighting_weights(const data::StackedDataset& data,
                                                const std::string& z_column,
                                                const std::string& v_column,
                                                double p_v1_given_z1,
                                                double p_v1_given_z0);

// Weighted variant: reweights the RCT toward the target on the weighting
// columns, fits the interaction model by weighted least squares with the
// sandwich covariance, then applies the outcome-model formula.
SensitivityResult sens_v_weighted_outcome_model(const data::StackedDataset& data,
                                                const data::RoleMap& roles,
                                                const VSensitivityOptions& options);

enum class SateSource {
    // SATE taken from the interaction fit (treatment effect at the RCT
    // moderator means), so the grid reduces exactly to the Z-adjusted TATE
    // at a null sensitivity parameter and the joint covariance is exact.
    interaction_model,
    // Unadjusted difference in means, treated as independent of the
    // interaction coefficients in the variance.
    difference_in_means,
};

// Options for the U case: a standardized composite moderator unobserved in
// both samples. param1 = beta_ut (effect per SD of U), param2 = the
// SD-units gap E[U|S=0] - E[U|S=1].
struct USensitivityOptions {
    GridSpec beta_ut_grid;
    GridSpec delta_u_grid;
    bool residual_z_gap_correction = false;
    bool spline_for_continuous = true;
    int spline_knots = 9;
    double ci_level = 0.95;
    std::optional<estimators::OutcomeModelSpec> model;
    SateSource sate_source = SateSource::interaction_model;
    double balance_warning_smd = 0.1;
};

// TATE = SATE + beta_zt (E[Z|S=0] - E[Z|S=1]) + beta_ut * delta_u over the
// two-parameter grid, with the sensitivity parameters treated as fixed.
SensitivityResult sens_u_bias_formula(const data::StackedDataset& data,
                                      const data::RoleMap& roles,
                                      const USensitivityOptions& options);

// TATE = xzATE [+ residual Z-gap correction] + beta_ut * delta_u, with the
// RCT weighted toward the target on all X and Z columns. The corrected
// variant yields point ranges only (CI entries NaN); the uncorrected
// variant carries the weighted sandwich interval.
SensitivityResult sens_u_weighting_plus_bias(const data::StackedDataset& data,
                                             const data::RoleMap& roles,
                                             const USensitivityOptions& options);

} // namespace genkit::sensitivity
