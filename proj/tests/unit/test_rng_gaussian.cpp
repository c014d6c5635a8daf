#include <doctest.h>

#include <cmath>

#include "genkit/errors.hpp"
#include "genkit/numerics/gaussian.hpp"
#include "genkit/numerics/rng.hpp"

using genkit::ValidationError;
using genkit::numerics::mvn_sample;
using genkit::numerics::normal_cdf;
using genkit::numerics::normal_quantile;
using genkit::numerics::RngStream;

TEST_SUITE("rng") {

TEST_CASE("normal quantile matches reference values") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
    CHECK_THROWS_AS(normal_quantile(1.0), ValidationError);
}

TEST_CASE("normal quantile inverts the CDF") {
    for (const double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
}

TEST_CASE("streams are reproducible and keyed") {
    RngStream a(42, 7, 1);
    RngStream b(42, 7, 1);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    RngStream c(42, 8, 1);
    RngStream d(42, 7, 1);
    for (int i = 0; i < 100; ++i) d.next_u64();  // advance
    bool all_equal = true;
    RngStream e(42, 7, 2);
    RngStream f(42, 7, 1);
    for (int i = 0; i < 16; ++i) {
        all_equal = all_equal && (c.next_u64() == e.next_u64()) &&
                    (e.next_u64() == f.next_u64());
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("uniform01 stays inside the open interval and is centered") {
    RngStream rng(1, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance") {
    RngStream rng(3, 0);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sum_sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

namespace {

double sample_correlation(const Eigen::MatrixXd& xy) {
    const auto n = static_cast<double>(xy.rows());
    const double mx = xy.col(0).mean();
    const double my = xy.col(1).mean();
    double sxx = 0, syy = 0, sxy = 0;
    for (Eigen::Index i = 0; i < xy.rows(); ++i) {
        const double dx = xy(i, 0) - mx;
        const double dy = xy(i, 1) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    (void)n;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("mvn_sample hits the requested correlation") {
    const Eigen::Index n = 100000;

    RngStream rng0(11, 0);
    const auto independent = mvn_sample(Eigen::Vector2d(0, 0), 0.0, n, rng0);
    CHECK(std::fabs(sample_correlation(independent)) < 0.01);

    RngStream rng1(11, 1);
    const auto correlated = mvn_sample(Eigen::Vector2d(0, 0), 0.5, n, rng1);
    CHECK(sample_correlation(correlated) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(correlated.col(0).mean() == doctest::Approx(0.0).epsilon(0.02));

    RngStream rng2(11, 2);
    const auto shifted = mvn_sample(Eigen::Vector2d(2.0, -1.0), 0.3, n, rng2);
    CHECK(shifted.col(0).mean() == doctest::Approx(2.0).epsilon(0.01));
    CHECK(shifted.col(1).mean() == doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("mvn_sample is bitwise deterministic for a fixed key") {
    RngStream a(5, 9);
    RngStream b(5, 9);
    const auto first = mvn_sample(Eigen::Vector2d(1, 2), 0.25, 1000, a);
    const auto second = mvn_sample(Eigen::Vector2d(1, 2), 0.25, 1000, b);
    CHECK((first - second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mvn_sample rejects degenerate correlations") {
    RngStream rng(1, 1);
    CHECK_THROWS_AS(mvn_sample(Eigen::Vector2d(0, 0), 1.0, 10, rng), ValidationError);
    CHECK_THROWS_AS(mvn_sample(Eigen::Vector2d(0, 0), -1.5, 10, rng), ValidationError);
}

} // TEST_SUITE
