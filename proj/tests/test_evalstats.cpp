#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "naln/errors.hpp"
#include "naln/evalstats.hpp"

using namespace naln;

namespace {

// closed forms for one and two degrees of freedom
double cauchy_cdf(double t) { return 0.5 + std::atan(t) / M_PI; }
double t2_cdf(double t) { return 0.5 * (1.0 + t / std::sqrt(2.0 + t * t)); }

}  // namespace

TEST_SUITE("evalstats") {

TEST_CASE("cdf matches closed forms") {
    for (double t : {-5.0, -1.3, -0.2, 0.0, 0.4, 1.0, 2.7, 8.0, 40.0}) {
        CHECK(student_t_cdf(t, 1.0) == doctest::Approx(cauchy_cdf(t)).epsilon(1e-9));
        CHECK(student_t_cdf(t, 2.0) == doctest::Approx(t2_cdf(t)).epsilon(1e-9));
    }
    CHECK(student_t_cdf(0.0, 7.0) == 0.5);
    CHECK(student_t_cdf(1.0, 1000.0) == doctest::Approx(0.841345).epsilon(1e-3));
    CHECK_THROWS_AS(student_t_cdf(1.0, 0.0), ParameterError);
}

TEST_CASE("cdf is symmetric, monotone, and stable in the far tail") {
    for (double t : {0.3, 1.7, 6.0}) {
        CHECK(student_t_cdf(-t, 5.0) == doctest::Approx(1.0 - student_t_cdf(t, 5.0)).epsilon(1e-12));
    }
    double prev = 0.0;
    for (double t = -10.0; t <= 10.0; t += 0.5) {
        const double c = student_t_cdf(t, 3.5);
        CHECK(c > prev);
        prev = c;
    }
    // heavy tail evaluated without catastrophic cancellation
    const double p_far = 2.0 * (1.0 - student_t_cdf(1000.0, 2.0));
    const double closed = 1.0 - 1000.0 / std::sqrt(2.0 + 1000.0 * 1000.0);
    CHECK(p_far == doctest::Approx(closed).epsilon(1e-6));
    CHECK(p_far > 0.0);
}

TEST_CASE("paired test on the worked example") {
    TTestResult r = paired_ttest({1, 2, 3}, {0, 0, 0});
    CHECK(r.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK(r.t == doctest::Approx(3.4641).epsilon(1e-4));
    CHECK(r.df == 2.0);
    CHECK(r.p == doctest::Approx(1.0 - r.t / std::sqrt(2.0 + r.t * r.t)).epsilon(1e-9));
    CHECK(r.p == doctest::Approx(0.0742).epsilon(1e-2));
    CHECK(r.p == doctest::Approx(2.0 * (1.0 - student_t_cdf(r.t, 2.0))).epsilon(1e-9));
}

TEST_CASE("paired test properties") {
    std::vector<double> a = {0.81, 0.77, 0.85, 0.79, 0.83};
    std::vector<double> b = {0.66, 0.71, 0.64, 0.70, 0.69};

    SUBCASE("antisymmetry") {
        TTestResult ab = paired_ttest(a, b);
        TTestResult ba = paired_ttest(b, a);
        CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
        CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
        CHECK(ab.df == ba.df);
    }

    SUBCASE("invariance to a common additive constant") {
        TTestResult base = paired_ttest(a, b);
        std::vector<double> as(a), bs(b);
        for (double& x : as) x += 17.3;
        for (double& x : bs) x += 17.3;
        TTestResult shifted = paired_ttest(as, bs);
        CHECK(shifted.t == doctest::Approx(base.t).epsilon(1e-9));
        CHECK(shifted.p == doctest::Approx(base.p).epsilon(1e-9));
    }

    SUBCASE("p stays in (0, 1] and is 1 at t = 0") {
        TTestResult r = paired_ttest({1.0, 3.0}, {2.0, 2.0});  // differences -1, +1
        CHECK(r.t == 0.0);
        CHECK(r.p == 1.0);
        TTestResult strong = paired_ttest({10, 11, 12, 13}, {0, 0.9, 2.1, 3.0});
        CHECK(strong.p > 0.0);
        CHECK(strong.p <= 1.0);
    }

    SUBCASE("|t| grows with the mean difference at fixed spread") {
        std::vector<double> base = {4.0, 5.0, 6.0};
        double prev_t = 0.0;
        for (double shift : {0.5, 1.0, 2.0, 4.0}) {
            std::vector<double> lifted(base);
            for (std::size_t i = 0; i < lifted.size(); ++i)
                lifted[i] += shift + 0.1 * static_cast<double>(i);
            const double t = paired_ttest(lifted, base).t;
            CHECK(t > prev_t);
            prev_t = t;
        }
    }
}

TEST_CASE("paired test rejects degenerate input") {
    std::vector<double> a = {1, 2, 3};
    CHECK_THROWS_AS(paired_ttest(a, a), StatisticsError);  // zero-variance differences
    CHECK_THROWS_AS(paired_ttest({1, 2, 3}, {0.5, 1.5, 2.5}), StatisticsError);
    CHECK_THROWS_AS(paired_ttest({1, 2}, {1}), ShapeError);
    CHECK_THROWS_AS(paired_ttest({1}, {2}), ParameterError);
    CHECK_THROWS_AS(paired_ttest({1, std::numeric_limits<double>::quiet_NaN(), 3}, {0, 0, 0}),
                    DataError);
}

TEST_CASE("welch test reduces to the pooled test for balanced equal-variance groups") {
    std::vector<double> a = {0, 1, 2, 3};
    std::vector<double> b = {1, 2, 3, 4};
    TTestResult r = welch_ttest(a, b);
    // balanced groups with identical sample variance: t = dm / sqrt(2 s^2 / n)
    const double s2 = 5.0 / 3.0;
    CHECK(r.t == doctest::Approx(-1.0 / std::sqrt(2.0 * s2 / 4.0)).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(2.0 * (1.0 - student_t_cdf(std::fabs(r.t), 6.0))).epsilon(1e-9));
}

TEST_CASE("welch test handles unequal variances and rejects flat data") {
    TTestResult r = welch_ttest({1, 1}, {0, 2});  // first group has zero variance
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    TTestResult shifted = welch_ttest({3, 3}, {0, 2});
    CHECK(shifted.t == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(shifted.df == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(shifted.p == doctest::Approx(1.0 - 2.0 * std::atan(2.0) / M_PI).epsilon(1e-9));
    CHECK_THROWS_AS(welch_ttest({1, 1}, {2, 2}), StatisticsError);
    CHECK_THROWS_AS(welch_ttest({1}, {2, 3}), ParameterError);
}

TEST_CASE("summarize") {
    auto [m1, se1] = summarize({5.0});
    CHECK(m1 == 5.0);
    CHECK(se1 == 0.0);

    auto [m2, se2] = summarize({1.0, 3.0});
    CHECK(m2 == 2.0);
    CHECK(se2 == doctest::Approx(1.0).epsilon(1e-12));

    auto [mo, seo] = summarize({3.0, 1.0});
    CHECK(mo == m2);
    CHECK(seo == doctest::Approx(se2).epsilon(1e-12));

    CHECK_THROWS_AS(summarize({}), ParameterError);
}

TEST_CASE("text emitters are deterministic") {
    ConditionResults aligned{"aligned", {0.8, 0.9}};
    ConditionResults base{"base", {0.6, 0.7}};
    CHECK(results_table({aligned, base}) ==
          "condition aligned: n 2 mean 0.850000 se 0.050000\n"
          "condition base: n 2 mean 0.650000 se 0.050000\n");

    TTestResult r;
    r.t = 3.464102;
    r.df = 2.0;
    r.p = 0.074180;
    CHECK(ttest_to_text("paired aligned vs base", r) ==
          "paired aligned vs base: t 3.464102 df 2 p 0.07418\n");

    ConditionResults empty{"empty", {}};
    CHECK_THROWS_AS(results_table({empty}), ParameterError);
}

}  // TEST_SUITE
