#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbp/criteria.hpp"
#include "testweights.hpp"

using namespace rbp;

TEST_CASE("power-law integrals are positively increasing") {
    for (double p : {1.0, 0.3, 2.5}) {
        auto rep = pi_test([p](double x) { return std::pow(x, p); }, 0.5);
        CHECK(rep.verdict == PiVerdict::PositivelyIncreasing);
        CHECK(rep.witness_C <= doctest::Approx(std::pow(rep.witness_t, p)).epsilon(1e-6));
    }
}

TEST_CASE("rapidly vanishing functions are positively increasing") {
    auto rep = pi_test([](double x) { return std::exp(-1.0 / x); }, 0.5);
    CHECK(rep.verdict == PiVerdict::PositivelyIncreasing);
}

TEST_CASE("slowly varying integrals are not positively increasing") {
    // F(x) = 1/(1 - log x): F(xt)/F(x) -> 1 for every fixed t
    auto rep = pi_test([](double x) { return 1.0 / (1.0 - std::log(x)); }, 0.5);
    CHECK(rep.verdict == PiVerdict::NotPositivelyIncreasing);
    auto rep2 = pi_test([](double x) { return 1.0 / std::pow(1.0 - std::log(x), 3); }, 0.5);
    CHECK(rep2.verdict == PiVerdict::NotPositivelyIncreasing);
}

TEST_CASE("scale invariance of the verdict") {
    auto rep1 = pi_test([](double x) { return x; }, 0.5);
    auto rep2 = pi_test([](double x) { return 7.3 * x; }, 0.25);
    CHECK(rep1.verdict == rep2.verdict);
    CHECK(rep1.witness_t == rep2.witness_t);
}

TEST_CASE("contraction equivalences agree across independent scans") {
    auto pi = [](double x) { return std::sqrt(x); };
    auto slow = [](double x) { return 1.0 / (1.0 - std::log(x)); };
    CHECK(osv_condition_ii(pi, 0.5) == Tri::Holds);
    CHECK(osv_condition_iii(pi, 0.5) == Tri::Holds);
    CHECK(osv_condition_iv(pi, 0.5) == Tri::Holds);
    CHECK(osv_condition_ii(slow, 0.5) == Tri::Fails);
    CHECK(osv_condition_iii(slow, 0.5) == Tri::Fails);
    CHECK(osv_condition_iv(slow, 0.5) == Tri::Fails);
}

TEST_CASE("one-sided contraction for the step weight") {
    auto res = api_plus(testw::sgn_weight(), 0.0, 0.5);
    CHECK(res.outcome == Tri::Holds);
    CHECK(res.witness_t > 0.0);
    // the escalated witness achieves the 1/2 contraction on the grid
    auto F = integral_fn(testw::sgn_weight(), 0.0, +1);
    for (double x : res.report.x_grid)
        CHECK(F(x * res.witness_t) <= 0.5 * F(x) + 1e-14);
}

TEST_CASE("one-sided contraction fails for a slowly varying weight") {
    auto res = api_plus(testw::slow_odd_weight(), 0.0, 0.5);
    CHECK(res.outcome == Tri::Fails);
}

TEST_CASE("two-sided power bound holds for the step weight") {
    auto res = ap_suf(testw::sgn_weight(), 0.0, 0.5);
    CHECK(res.outcome == Tri::Holds);
    CHECK(res.C < 10.0);
}

TEST_CASE("product condition for the step weight holds with margin") {
    auto res = ap_nec(testw::sgn_weight(), 0.0, 0.5);
    CHECK(res.outcome == Tri::Holds);
    CHECK(res.witness_C < 0.25 - kApNecMargin);
}

TEST_CASE("product condition fails for the slowly varying odd weight") {
    // I+ = I- = 1/(1-log x): the product ratio tends to 1/4 for every t
    auto res = ap_nec(testw::slow_odd_weight(), 0.0, 0.5);
    CHECK(res.outcome == Tri::Fails);
}

TEST_CASE("quotient condition certifies the asymmetric rescaling") {
    auto w = scaling_perturbation(testw::unit_weight(), 3.0, 1.0);
    auto res = volkmer_test(w, -1.0, 0.25);
    CHECK(res.certified);
    CHECK(res.g_limit == doctest::Approx(-3.0).epsilon(1e-8));
}

TEST_CASE("quotient condition rejects g(0-) == t") {
    // odd weight: r(x)/r(-x) == -1 == t
    auto res = volkmer_test(testw::slow_odd_weight(), -1.0, 0.25);
    CHECK(!res.certified);
}

TEST_CASE("quotient condition rejects a non-smooth quotient") {
    // r oscillates relative to its reflection: no continuous extension
    auto w = make_weight(-0.5, 0.5,
                         parse_expr("piecewise(x, 0, -1 - abs(x)^0.1, 1)"), {0.0});
    auto res = volkmer_test(w, -1.0, 0.25);
    CHECK(!res.certified);
}
