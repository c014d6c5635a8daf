#include "genkit/numerics/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "genkit/errors.hpp"

namespace genkit::numerics {

namespace {

inline double cube_pos(double t) {
    return t > 0.0 ? t * t * t : 0.0;
}

} // namespace

double sample_quantile(std::vector<double> sorted_values, double p) {
    if (sorted_values.empty()) {
        throw ValidationError("sample_quantile: empty input");
    }
    const double h = (static_cast<double>(sorted_values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted_values.size() - 1);
    const double frac = h - std::floor(h);
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

SplineBasis natural_spline_knots(const Eigen::VectorXd& x, int n_knots) {
    if (n_knots < 1) {
        throw ValidationError("natural_spline_knots: n_knots must be >= 1");
    }
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    const std::set<double> distinct(sorted.begin(), sorted.end());
    if (static_cast<int>(distinct.size()) < n_knots + 2) {
        throw ValidationError("natural_spline_knots: need at least " +
                              std::to_string(n_knots + 2) +
                              " distinct values, got " +
                              std::to_string(distinct.size()));
    }

    SplineBasis basis;
    basis.boundary_knots = {sorted.front(), sorted.back()};
    basis.interior_knots.reserve(static_cast<std::size_t>(n_knots));
    for (int k = 1; k <= n_knots; ++k) {
        const double p = static_cast<double>(k) / (n_knots + 1.0);
        basis.interior_knots.push_back(sample_quantile(sorted, p));
    }
    double prev = basis.boundary_knots.first;
    for (const double knot : basis.interior_knots) {
        if (!(knot > prev)) {
            throw ValidationError(
                "natural_spline_knots: quantile knots are not strictly "
                "increasing (heavily tied data)");
        }
        prev = knot;
    }
    if (!(basis.boundary_knots.second > prev)) {
        throw ValidationError(
            "natural_spline_knots: last interior knot reaches the boundary");
    }
    return basis;
}

DesignMatrix SplineBasis::evaluate(const Eigen::VectorXd& x,
                                   const std::string& name_prefix) const {
    // Truncated-power natural basis with all knots xi_1..xi_K (boundaries
    // included): N_1 = x, N_{k+1} = d_k - d_{K-1}, where
    // d_k(x) = [(x - xi_k)_+^3 - (x - xi_K)_+^3] / (xi_K - xi_k).
    std::vector<double> knots;
    knots.push_back(boundary_knots.first);
    knots.insert(knots.end(), interior_knots.begin(), interior_knots.end());
    knots.push_back(boundary_knots.second);
    const auto K = knots.size();
    if (K < 2 || !std::is_sorted(knots.begin(), knots.end())) {
        throw ValidationError("spline basis: knots not strictly increasing");
    }
    const double last = knots[K - 1];

    auto d = [&](std::size_t k, double xi) {
        return (cube_pos(xi - knots[k]) - cube_pos(xi - last)) / (last - knots[k]);
    };

    DesignMatrix out;
    const Eigen::Index n = x.size();
    const auto n_cols = static_cast<Eigen::Index>(K - 1);
    out.values.resize(n, n_cols);
    out.intercept_included = false;
    for (Eigen::Index j = 0; j < n_cols; ++j) {
        out.column_names.push_back(name_prefix + std::to_string(j + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x(i);
        out.values(i, 0) = xi;
        for (std::size_t k = 0; k + 2 < K; ++k) {
            out.values(i, static_cast<Eigen::Index>(k) + 1) = d(k, xi) - d(K - 2, xi);
        }
    }
    return out;
}

DesignMatrix natural_spline_basis(const Eigen::VectorXd& x, int n_knots,
                                  const std::string& name_prefix) {
    return natural_spline_knots(x, n_knots).evaluate(x, name_prefix);
}

} // namespace genkit::numerics
