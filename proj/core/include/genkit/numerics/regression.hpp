#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace genkit::numerics {

// Regressor block with named columns. Column order is the term order of
// every fit produced from it.
struct DesignMatrix {
    Eigen::MatrixXd values;                 // n x p
    std::vector<std::string> column_names;  // size p, unique
    bool intercept_included = false;

    Eigen::Index n_rows() const { return values.rows(); }
    Eigen::Index n_cols() const { return values.cols(); }

    // n >= p, names unique and matching p, no all-zero column.
    void validate() const;

    // Index of a named column; -1 when absent.
    Eigen::Index column_index(const std::string& name) const;
};

enum class CovarianceKind { model_based, sandwich };

struct ModelFit {
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;  // symmetric PSD, same order as term_names
    CovarianceKind covariance_kind = CovarianceKind::model_based;
    std::vector<std::string> term_names;
    double residual_variance = 0.0;  // linear fits only; NaN for logistic
    bool converged = true;
    int n_iterations = 0;
    std::vector<std::string> warnings;

    Eigen::Index term_index(const std::string& name) const;
    double coefficient(const std::string& name) const;
    double std_error(Eigen::Index i) const;
};

// Weighted least squares via column-pivoted QR on sqrt(w)-scaled rows.
//
// Weights are read as frequency weights: residual_variance is
// sum(w e^2) / (sum(w) - p), which makes the fit (coefficients and
// model-based covariance) agree exactly with OLS on a row-duplicated
// dataset when the weights are positive integers. The sandwich covariance
// is the HC1 form (X'WX)^-1 X'W diag(e^2) WX (X'WX)^-1 * n/(n-p) with n
// the number of rows carrying positive weight.
ModelFit fit_wls(const DesignMatrix& design, const Eigen::VectorXd& response,
                 const Eigen::VectorXd& weights,
                 CovarianceKind covariance_kind = CovarianceKind::model_based);

// OLS: fit_wls with unit weights.
ModelFit fit_ols(const DesignMatrix& design, const Eigen::VectorXd& response,
                 CovarianceKind covariance_kind = CovarianceKind::model_based);

struct LogisticOptions {
    double tolerance = 1e-8;  // on the max absolute score entry
    int max_iterations = 50;
    // Coefficient magnitude beyond which quasi-complete separation is
    // suspected and a warning attached to the fit.
    double separation_guard = 30.0;
};

// Binomial-logit fit by iteratively reweighted least squares with
// step-halving. Covariance is the inverse observed information. Response
// entries must be 0 or 1 and both classes present. Non-convergence is
// reported through `converged`, not thrown.
ModelFit fit_logistic(const DesignMatrix& design,
                      const Eigen::VectorXd& response,
                      const LogisticOptions& options = {});

// Binomial log-likelihood at the given coefficients, computed stably for
// large |linear predictor|.
double logistic_log_likelihood(const DesignMatrix& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients);

// Numerically stable logistic function.
double expit(double x);

} // namespace genkit::numerics
