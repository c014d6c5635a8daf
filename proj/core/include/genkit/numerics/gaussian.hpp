#pragma once

#include <Eigen/Core>

#include "genkit/numerics/rng.hpp"

namespace genkit::numerics {

// Inverse standard-normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

double normal_cdf(double x);

double normal_pdf(double x);

// n draws from a bivariate normal with unit variances, the given means and
// correlation, via the Cholesky factor of the 2x2 correlation matrix.
// Throws ValidationError when |correlation| >= 1.
Eigen::MatrixXd mvn_sample(const Eigen::Vector2d& mean, double correlation,
                           Eigen::Index n, RngStream& rng);

} // namespace genkit::numerics
