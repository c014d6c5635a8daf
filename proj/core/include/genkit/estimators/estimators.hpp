#pragma once

#include <optional>
#include <string>
#include <vector>

#include "genkit/data/dataset.hpp"
#include "genkit/estimators/model_spec.hpp"
#include "genkit/numerics/regression.hpp"

namespace genkit::estimators {

enum class Estimand { sate, tate, xzate };
enum class Method { difference_in_means, outcome_model, weighting };

std::string estimand_to_string(Estimand e);
std::string method_to_string(Method m);

struct EffectEstimate {
    Estimand estimand = Estimand::sate;
    Method method = Method::difference_in_means;
    double point = 0.0;
    double std_error = 0.0;
    double ci_level = 0.95;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    std::vector<std::string> warnings;
};

// Normal-theory interval around the point estimate.
EffectEstimate make_normal_estimate(Estimand estimand, Method method,
                                    double point, double std_error,
                                    double ci_level);

double normal_ci_halfwidth(double std_error, double ci_level);

// Inverse-odds membership weights for the RCT rows.
struct WeightVector {
    enum class Formula { odds_given_z, odds_given_xz, full_v_weight };

    Eigen::VectorXd weights;  // aligned with StackedDataset::rct_rows()
    std::vector<std::string> balanced_columns;
    Formula formula = Formula::odds_given_z;
    std::vector<std::string> warnings;

    static WeightVector unit(Eigen::Index n_rct);
};

std::string weight_formula_to_string(WeightVector::Formula f);

struct BalanceEntry {
    std::string column;
    double smd_before = 0.0;
    double smd_after = 0.0;
    bool smd_defined = true;   // false when the RCT SD is zero
    bool overlap_flag = false;
    std::string overlap_detail;
};

struct BalanceReport {
    std::vector<BalanceEntry> entries;
    std::vector<std::string> warnings;

    double max_abs_smd_after() const;
};

// True when every observed value of the column is 0 or 1.
bool is_binary_column(const data::StackedDataset& data, const std::string& column);

struct OverlapFlag {
    std::string column;
    bool flagged = false;
    std::string detail;
};

// Range-based positivity check per column. A continuous column is flagged
// when more than `trim_allowance` of the target-sample mass lies outside
// the RCT's observed range; a binary column when the target sample carries
// a level absent from the RCT.
std::vector<OverlapFlag> check_overlap(const data::StackedDataset& data,
                                       const std::vector<std::string>& columns,
                                       double trim_allowance = 0.05);

struct SateOptions {
    double ci_level = 0.95;
    // When set, regression-adjusts for all covariates in the role map
    // (main effects only) and reports the treatment coefficient.
    std::optional<data::RoleMap> adjust_for;
};

// Difference in mean outcome between RCT arms (Welch standard error), or
// the covariate-adjusted treatment coefficient.
EffectEstimate estimate_sate(const data::StackedDataset& data,
                             const SateOptions& options = {});

struct TateOptions {
    double ci_level = 0.95;
    bool allow_nonoverlap = false;
    // Widen the interval by evaluating the contrast at the componentwise
    // confidence limits of the target-sample moderator means.
    bool incorporate_target_mean_uncertainty = false;
    std::optional<OutcomeModelSpec> model;
};

struct TateOutcomeResult {
    EffectEstimate estimate;
    numerics::ModelFit fit;
    // Target-sample mean plugged in for each moderator, in model order.
    std::vector<std::pair<std::string, double>> moderator_target_means;
};

// Interaction outcome model on the RCT rows; TATE as the treatment effect
// contrast at the target-sample moderator means (delta-method interval).
TateOutcomeResult estimate_tate_outcome_model(const data::StackedDataset& data,
                                              const data::RoleMap& roles,
                                              const TateOptions& options = {});

struct WeightOptions {
    bool spline_for_continuous = true;
    int spline_knots = 9;
    numerics::LogisticOptions logistic;
    double min_rct_membership_probability = 1e-6;
};

// Fits the sample-membership model (S=0 as the event) on the stacked data
// and returns each RCT row's predicted odds of being in the target sample.
// Continuous columns are expanded with a natural spline basis when enabled.
WeightVector membership_weights(const data::StackedDataset& data,
                                const data::RoleMap& roles,
                                const std::vector<std::string>& columns,
                                const WeightOptions& options = {});

// Hajek weighted difference in mean outcome between RCT arms; the standard
// error comes from the sandwich covariance of the weighted regression of
// the outcome on treatment.
EffectEstimate estimate_tate_weighted(const data::StackedDataset& data,
                                      const WeightVector& weights,
                                      double ci_level = 0.95);

// Standardized mean differences target-vs-RCT before and after weighting.
// The denominator is the unweighted RCT-sample SD in both, so movement in
// the SMD reflects mean shifts only.
BalanceReport balance_report(const data::StackedDataset& data,
                             const std::vector<std::string>& columns,
                             const WeightVector* weights = nullptr);

} // namespace genkit::estimators
