#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "genkit/numerics/regression.hpp"

namespace genkit::numerics {

// Natural cubic spline basis: cubic between the boundary knots, linear
// beyond them. Spans n_interior_knots + 1 columns (constant excluded).
struct SplineBasis {
    std::vector<double> interior_knots;          // strictly increasing
    std::pair<double, double> boundary_knots;    // bracket the interior knots

    int degrees_of_freedom() const {
        return static_cast<int>(interior_knots.size()) + 1;
    }

    // Basis matrix at the given points, columns "<prefix>1".."<prefix>k".
    DesignMatrix evaluate(const Eigen::VectorXd& x,
                          const std::string& name_prefix = "ns") const;
};

// Knots at equally spaced quantiles of x (boundaries at min/max). Throws
// ValidationError when x has fewer than n_knots + 2 distinct values or the
// quantiles collide.
SplineBasis natural_spline_knots(const Eigen::VectorXd& x, int n_knots);

// Convenience: knots from x, evaluated at x.
DesignMatrix natural_spline_basis(const Eigen::VectorXd& x, int n_knots,
                                  const std::string& name_prefix = "ns");

// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> sorted_values, double p);

} // namespace genkit::numerics
