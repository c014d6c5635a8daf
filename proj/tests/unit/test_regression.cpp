#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genkit/errors.hpp"
#include "genkit/numerics/regression.hpp"
#include "genkit/numerics/rng.hpp"

using genkit::SingularDesignError;
using genkit::ValidationError;
using genkit::numerics::CovarianceKind;
using genkit::numerics::DesignMatrix;
using genkit::numerics::expit;
using genkit::numerics::fit_logistic;
using genkit::numerics::fit_ols;
using genkit::numerics::fit_wls;
using genkit::numerics::logistic_log_likelihood;
using genkit::numerics::LogisticOptions;
using genkit::numerics::RngStream;

namespace {

DesignMatrix random_design(RngStream& rng, Eigen::Index n, Eigen::Index p) {
    DesignMatrix d;
    d.values.resize(n, p);
    d.intercept_included = true;
    d.column_names.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
        d.column_names.push_back(j == 0 ? "(intercept)" : "x" + std::to_string(j));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        d.values(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < p; ++j) {
            d.values(i, j) = rng.normal();
        }
    }
    return d;
}

// Independent OLS route: normal equations by LDLT, no QR involved.
Eigen::VectorXd ols_normal_equations(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y) {
    return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

} // namespace

TEST_SUITE("wls") {

TEST_CASE("unit weights reproduce OLS on random problems") {
    RngStream rng(101, 0);
    for (int rep = 0; rep < 5; ++rep) {
        const auto design = random_design(rng, 80, 5);
        Eigen::VectorXd y(80);
        for (Eigen::Index i = 0; i < 80; ++i) y(i) = rng.normal() * 2.0 + 1.0;
        const auto fit = fit_wls(design, y, Eigen::VectorXd::Ones(80));
        const auto oracle = ols_normal_equations(design.values, y);
        CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("noise-free linear response is recovered exactly") {
    RngStream rng(102, 0);
    const auto design = random_design(rng, 50, 3);
    const Eigen::VectorXd y = 4.0 * design.values.col(1);
    const auto fit = fit_ols(design, y);
    CHECK(fit.coefficients(1) == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(std::fabs(fit.coefficients(0)) < 1e-10);
    CHECK(fit.residual_variance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("integer weights match OLS on the row-duplicated dataset") {
    // 6-row hand dataset, weights (1,1,2,2,3,3).
    DesignMatrix design;
    design.values.resize(6, 2);
    design.values << 1, 0.5, 1, 1.3, 1, -0.7, 1, 2.1, 1, 0.0, 1, 1.8;
    design.column_names = {"(intercept)", "x"};
    design.intercept_included = true;
    Eigen::VectorXd y(6);
    y << 1.0, 2.2, -0.4, 3.9, 0.3, 3.1;
    Eigen::VectorXd w(6);
    w << 1, 1, 2, 2, 3, 3;

    DesignMatrix duplicated;
    duplicated.column_names = design.column_names;
    duplicated.intercept_included = true;
    duplicated.values.resize(12, 2);
    Eigen::VectorXd y_dup(12);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < 6; ++i) {
        for (int k = 0; k < static_cast<int>(w(i)); ++k) {
            duplicated.values.row(r) = design.values.row(i);
            y_dup(r) = y(i);
            ++r;
        }
    }

    const auto weighted = fit_wls(design, y, w);
    const auto oracle = fit_ols(duplicated, y_dup);
    CHECK((weighted.coefficients - oracle.coefficients).cwiseAbs().maxCoeff() < 1e-10);
    // Frequency-weight semantics make the whole fit match, not just the point.
    CHECK(weighted.residual_variance ==
          doctest::Approx(oracle.residual_variance).epsilon(1e-12));
    CHECK((weighted.covariance - oracle.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("coefficients are invariant to weight rescaling") {
    RngStream rng(103, 0);
    const auto design = random_design(rng, 60, 4);
    Eigen::VectorXd y(60), w(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
        y(i) = rng.normal();
        w(i) = rng.uniform01() + 0.1;
    }
    const auto base = fit_wls(design, y, w);
    const auto scaled = fit_wls(design, y, 37.5 * w);
    CHECK((base.coefficients - scaled.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("negative or non-finite weights are rejected") {
    RngStream rng(104, 0);
    const auto design = random_design(rng, 10, 2);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(10).array() + 1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
    w(3) = -0.5;
    CHECK_THROWS_AS(fit_wls(design, y, w), ValidationError);
    w(3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fit_wls(design, y, w), ValidationError);
}

TEST_CASE("rank deficiency names the collinear column") {
    RngStream rng(105, 0);
    auto design = random_design(rng, 40, 3);
    design.values.conservativeResize(Eigen::NoChange, 4);
    design.values.col(3) = 2.0 * design.values.col(1);  // exact collinearity
    design.column_names.push_back("x1_copy");
    Eigen::VectorXd y(40);
    for (Eigen::Index i = 0; i < 40; ++i) y(i) = rng.normal();
    try {
        fit_ols(design, y);
        FAIL("expected SingularDesignError");
    } catch (const SingularDesignError& e) {
        const std::string message = e.what();
        const bool names_one = message.find("x1_copy") != std::string::npos ||
                               message.find("'x1'") != std::string::npos;
        CHECK(names_one);
    }
}

TEST_CASE("sandwich and model-based covariances agree under homoskedasticity") {
    RngStream rng(106, 0);
    const Eigen::Index n = 10000;
    const auto design = random_design(rng, n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = 1.0 + 0.5 * design.values(i, 1) - 0.2 * design.values(i, 2) +
               rng.normal();
    }
    const auto model = fit_ols(design, y, CovarianceKind::model_based);
    const auto sandwich = fit_ols(design, y, CovarianceKind::sandwich);
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(sandwich.covariance(j, j) ==
              doctest::Approx(model.covariance(j, j)).epsilon(0.05));
    }
}

} // TEST_SUITE

TEST_SUITE("logistic") {

TEST_CASE("saturated fit reproduces cell proportions") {
    // S=1 events: 30 of 100 at z=1, 10 of 100 at z=0.
    DesignMatrix design;
    design.values.resize(200, 2);
    design.column_names = {"(intercept)", "z"};
    design.intercept_included = true;
    Eigen::VectorXd y(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        const bool z = i < 100;
        design.values(i, 0) = 1.0;
        design.values(i, 1) = z ? 1.0 : 0.0;
        if (z) {
            y(i) = i < 30 ? 1.0 : 0.0;
        } else {
            y(i) = i < 110 ? 1.0 : 0.0;
        }
    }
    const auto fit = fit_logistic(design, y);
    REQUIRE(fit.converged);
    const double p_z1 = expit(fit.coefficients(0) + fit.coefficients(1));
    const double p_z0 = expit(fit.coefficients(0));
    CHECK(p_z1 == doctest::Approx(0.30).epsilon(1e-8));
    CHECK(p_z0 == doctest::Approx(0.10).epsilon(1e-8));
}

TEST_CASE("intercept-only fit is the log odds of the event rate") {
    DesignMatrix design;
    design.values = Eigen::MatrixXd::Ones(100, 1);
    design.column_names = {"(intercept)"};
    design.intercept_included = true;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
    y.head(40).setOnes();
    const auto fit = fit_logistic(design, y);
    REQUIRE(fit.converged);
    CHECK(fit.coefficients(0) ==
          doctest::Approx(std::log(0.4 / 0.6)).epsilon(1e-8));
}

TEST_CASE("IRLS solution is a local optimum of the log-likelihood") {
    RngStream rng(107, 0);
    const Eigen::Index n = 300;
    DesignMatrix design;
    design.values.resize(n, 3);
    design.column_names = {"(intercept)", "x1", "x2"};
    design.intercept_included = true;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.values(i, 0) = 1.0;
        design.values(i, 1) = rng.normal();
        design.values(i, 2) = rng.normal();
        const double eta = -0.3 + 0.8 * design.values(i, 1) - 0.5 * design.values(i, 2);
        y(i) = rng.bernoulli(expit(eta)) ? 1.0 : 0.0;
    }
    const auto fit = fit_logistic(design, y);
    REQUIRE(fit.converged);
    const double best = logistic_log_likelihood(design, y, fit.coefficients);

    RngStream perturb(107, 1);
    for (int rep = 0; rep < 1000; ++rep) {
        Eigen::VectorXd direction(3);
        for (Eigen::Index j = 0; j < 3; ++j) direction(j) = perturb.normal();
        direction *= 0.1 / direction.norm();
        const double other =
            logistic_log_likelihood(design, y, fit.coefficients + direction);
        REQUIRE(other <= best + 1e-12);
    }
}

TEST_CASE("score is below tolerance at a converged solution") {
    RngStream rng(108, 0);
    const Eigen::Index n = 500;
    DesignMatrix design;
    design.values.resize(n, 2);
    design.column_names = {"(intercept)", "x"};
    design.intercept_included = true;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.values(i, 0) = 1.0;
        design.values(i, 1) = rng.normal();
        y(i) = rng.bernoulli(expit(0.4 * design.values(i, 1))) ? 1.0 : 0.0;
    }
    LogisticOptions options;
    const auto fit = fit_logistic(design, y, options);
    REQUIRE(fit.converged);
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mu(i) = expit(design.values.row(i).dot(fit.coefficients));
    }
    const Eigen::VectorXd score = design.values.transpose() * (y - mu);
    CHECK(score.cwiseAbs().maxCoeff() < options.tolerance);
}

TEST_CASE("separated data attaches a warning") {
    DesignMatrix design;
    const Eigen::Index n = 40;
    design.values.resize(n, 2);
    design.column_names = {"(intercept)", "x"};
    design.intercept_included = true;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) - 19.5) / 5.0;
        design.values(i, 0) = 1.0;
        design.values(i, 1) = x;
        y(i) = x > 0 ? 1.0 : 0.0;  // complete separation
    }
    const auto fit = fit_logistic(design, y);
    bool flagged = false;
    for (const auto& warning : fit.warnings) {
        if (warning.find("separation") != std::string::npos) flagged = true;
    }
    CHECK(flagged);
}

TEST_CASE("invalid responses are rejected") {
    DesignMatrix design;
    design.values = Eigen::MatrixXd::Ones(10, 1);
    design.column_names = {"(intercept)"};
    Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
    CHECK_THROWS_AS(fit_logistic(design, y), ValidationError);  // one class
    y(0) = 0.5;
    CHECK_THROWS_AS(fit_logistic(design, y), ValidationError);  // not 0/1
}

} // TEST_SUITE
