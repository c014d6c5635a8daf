#include "genkit/numerics/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "genkit/errors.hpp"

namespace genkit::numerics {

void DesignMatrix::validate() const {
    const auto n = values.rows();
    const auto p = values.cols();
    if (static_cast<Eigen::Index>(column_names.size()) != p) {
        throw ValidationError("design matrix: column_names size does not match column count");
    }
    if (n < p) {
        throw ValidationError("design matrix: fewer rows than columns (n=" +
                              std::to_string(n) + ", p=" + std::to_string(p) + ")");
    }
    std::set<std::string> seen;
    for (const auto& name : column_names) {
        if (!seen.insert(name).second) {
            throw ValidationError("design matrix: duplicate column name '" + name + "'");
        }
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (values.col(j).cwiseAbs().maxCoeff() == 0.0) {
            throw ValidationError("design matrix: column '" + column_names[j] + "' is all zero");
        }
    }
}

Eigen::Index DesignMatrix::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < column_names.size(); ++j) {
        if (column_names[j] == name) return static_cast<Eigen::Index>(j);
    }
    return -1;
}

Eigen::Index ModelFit::term_index(const std::string& name) const {
    for (std::size_t j = 0; j < term_names.size(); ++j) {
        if (term_names[j] == name) return static_cast<Eigen::Index>(j);
    }
    return -1;
}

double ModelFit::coefficient(const std::string& name) const {
    const auto idx = term_index(name);
    if (idx < 0) {
        throw ValidationError("model fit: no term named '" + name + "'");
    }
    return coefficients(idx);
}

double ModelFit::std_error(Eigen::Index i) const {
    return std::sqrt(std::max(0.0, covariance(i, i)));
}

namespace {

// Columns not spanned by the pivoted leading rank columns of the QR.
std::string collinear_column_message(
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
    const std::vector<std::string>& names) {
    const Eigen::Index rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "singular design: rank " << rank << " < " << names.size()
        << " columns; collinear columns:";
    for (Eigen::Index k = rank; k < perm.size(); ++k) {
        msg << " '" << names[static_cast<std::size_t>(perm(k))] << "'";
    }
    return msg.str();
}

} // namespace

ModelFit fit_wls(const DesignMatrix& design, const Eigen::VectorXd& response,
                 const Eigen::VectorXd& weights, CovarianceKind covariance_kind) {
    design.validate();
    const Eigen::Index n = design.n_rows();
    const Eigen::Index p = design.n_cols();
    if (response.size() != n) {
        throw ValidationError("fit_wls: response length does not match design rows");
    }
    if (weights.size() != n) {
        throw ValidationError("fit_wls: weights length does not match design rows");
    }
    Eigen::Index n_positive = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(weights(i)) || weights(i) < 0.0) {
            throw ValidationError("fit_wls: weight at row " + std::to_string(i) +
                                  " is negative or not finite");
        }
        if (weights(i) > 0.0) ++n_positive;
    }
    if (n_positive < p) {
        throw ValidationError("fit_wls: fewer rows with positive weight (" +
                              std::to_string(n_positive) + ") than columns (" +
                              std::to_string(p) + ")");
    }

    const Eigen::VectorXd sqrt_w = weights.cwiseSqrt();
    const Eigen::MatrixXd xw = sqrt_w.asDiagonal() * design.values;
    const Eigen::VectorXd yw = sqrt_w.cwiseProduct(response);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        throw SingularDesignError(collinear_column_message(qr, design.column_names));
    }

    ModelFit fit;
    fit.term_names = design.column_names;
    fit.coefficients = qr.solve(yw);
    fit.converged = true;
    fit.n_iterations = 0;

    const Eigen::VectorXd residuals = response - design.values * fit.coefficients;
    const double weight_sum = weights.sum();
    const double weighted_rss = weights.cwiseProduct(residuals.cwiseAbs2()).sum();
    const double dof = weight_sum - static_cast<double>(p);
    if (dof > 0.0) {
        fit.residual_variance = weighted_rss / dof;
    } else {
        fit.residual_variance = std::numeric_limits<double>::quiet_NaN();
        fit.warnings.push_back("residual variance undefined: weight sum <= column count");
    }

    const Eigen::MatrixXd xtwx = xw.transpose() * xw;
    const Eigen::MatrixXd bread = xtwx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

    fit.covariance_kind = covariance_kind;
    if (covariance_kind == CovarianceKind::model_based) {
        fit.covariance = fit.residual_variance * bread;
    } else {
        // HC1 with w^2 e^2 meat and n/(n-p) inflation over positive-weight rows.
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (weights(i) == 0.0) continue;
            const double we = weights(i) * residuals(i);
            meat.noalias() += (we * we) * design.values.row(i).transpose() *
                              design.values.row(i);
        }
        const double n_eff = static_cast<double>(n_positive);
        const double inflation =
            (n_eff > static_cast<double>(p)) ? n_eff / (n_eff - static_cast<double>(p)) : 1.0;
        fit.covariance = inflation * bread * meat * bread;
    }
    // Symmetrize against roundoff.
    fit.covariance = ((fit.covariance + fit.covariance.transpose()) / 2.0).eval();
    return fit;
}

ModelFit fit_ols(const DesignMatrix& design, const Eigen::VectorXd& response,
                 CovarianceKind covariance_kind) {
    return fit_wls(design, response, Eigen::VectorXd::Ones(design.n_rows()),
                   covariance_kind);
}

double expit(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

double logistic_log_likelihood(const DesignMatrix& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients) {
    const Eigen::VectorXd eta = design.values * coefficients;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // y*eta - log(1 + exp(eta)), with the softplus evaluated stably.
        const double e = eta(i);
        const double softplus = std::max(e, 0.0) + std::log1p(std::exp(-std::fabs(e)));
        ll += response(i) * e - softplus;
    }
    return ll;
}

ModelFit fit_logistic(const DesignMatrix& design, const Eigen::VectorXd& response,
                      const LogisticOptions& options) {
    design.validate();
    const Eigen::Index n = design.n_rows();
    const Eigen::Index p = design.n_cols();
    if (response.size() != n) {
        throw ValidationError("fit_logistic: response length does not match design rows");
    }
    bool any_zero = false, any_one = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (response(i) == 0.0) {
            any_zero = true;
        } else if (response(i) == 1.0) {
            any_one = true;
        } else {
            throw ValidationError("fit_logistic: response at row " + std::to_string(i) +
                                  " is not 0 or 1");
        }
    }
    if (!any_zero || !any_one) {
        throw ValidationError("fit_logistic: both response classes must be present");
    }

    ModelFit fit;
    fit.term_names = design.column_names;
    fit.coefficients = Eigen::VectorXd::Zero(p);
    fit.residual_variance = std::numeric_limits<double>::quiet_NaN();

    double loglik = logistic_log_likelihood(design, response, fit.coefficients);
    Eigen::VectorXd mu(n), irls_w(n);
    bool converged = false;
    int iter = 0;

    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd eta = design.values * fit.coefficients;
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = expit(eta(i));
            irls_w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
        }
        const Eigen::VectorXd score = design.values.transpose() * (response - mu);
        if (score.cwiseAbs().maxCoeff() < options.tolerance) {
            converged = true;
            break;
        }

        const Eigen::VectorXd sqrt_w = irls_w.cwiseSqrt();
        const Eigen::MatrixXd xw = sqrt_w.asDiagonal() * design.values;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            throw SingularDesignError(collinear_column_message(qr, design.column_names));
        }
        // Newton step: (X'WX)^-1 score.
        Eigen::VectorXd step = (xw.transpose() * xw).ldlt().solve(score);

        // Step-halving keeps the log-likelihood monotone.
        double new_loglik = 0.0;
        Eigen::VectorXd candidate;
        bool improved = false;
        for (int half = 0; half < 30; ++half) {
            candidate = fit.coefficients + step;
            new_loglik = logistic_log_likelihood(design, response, candidate);
            if (new_loglik >= loglik - 1e-12) {
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if (!improved) {
            break;  // stalled; report best iterate with converged=false
        }
        fit.coefficients = candidate;
        loglik = new_loglik;
    }
    fit.converged = converged;
    fit.n_iterations = iter;
    if (!converged) {
        fit.warnings.push_back("logistic fit did not converge in " +
                               std::to_string(options.max_iterations) + " iterations");
    }

    // Inverse observed information at the final iterate.
    const Eigen::VectorXd eta = design.values * fit.coefficients;
    for (Eigen::Index i = 0; i < n; ++i) {
        mu(i) = expit(eta(i));
        irls_w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
    }
    const Eigen::MatrixXd info =
        design.values.transpose() * irls_w.asDiagonal() * design.values;
    fit.covariance = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.covariance = ((fit.covariance + fit.covariance.transpose()) / 2.0).eval();
    fit.covariance_kind = CovarianceKind::model_based;

    if (fit.coefficients.cwiseAbs().maxCoeff() > options.separation_guard) {
        fit.warnings.push_back(
            "possible quasi-complete separation: coefficient magnitude exceeds " +
            std::to_string(options.separation_guard));
    }
    return fit;
}

} // namespace genkit::numerics
