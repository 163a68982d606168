#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rbp/bc.hpp"

using namespace rbp;

namespace {

Mat2 random_invertible(std::mt19937& rng) {
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (;;) {
        Mat2 M;
        M << Cplx(d(rng), d(rng)), Cplx(d(rng), d(rng)), Cplx(d(rng), d(rng)),
            Cplx(d(rng), d(rng));
        if (std::abs(M.determinant()) > 0.3) return M;
    }
}

BCMatrices transformed(const BCMatrices& bc, const Mat2& M) {
    return {M * bc.C, M * bc.D};
}

}  // namespace

TEST_CASE("validation accepts the named conditions") {
    for (const auto& bc : {dirichlet_bc(), neumann_bc(), periodic_bc(), antiperiodic_bc(),
                           robin_bc(0.7, -1.3), coupled_bc(Cplx(2.0, 1.0), 0.4)}) {
        auto v = validate_bc(bc);
        CHECK(v.ok);
    }
}

TEST_CASE("validation rejects rank-deficient and non-symmetric pairs") {
    BCMatrices low;
    low.C << 1, 0, 2, 0;
    low.D << 1, 0, 2, 0;
    CHECK(!validate_bc(low).ok);

    BCMatrices asym;  // f(a) = 0, f'(a) = f(b): CD* != DC*
    asym.C << 0, 0, 1, 0;
    asym.D << 1, 0, 0, 1;
    CHECK(!validate_bc(asym).ok);
}

TEST_CASE("canonical families of the named conditions") {
    CHECK(canonicalize(dirichlet_bc()).family == BcFamily::Dirichlet);
    CHECK(canonicalize(dirichlet_bc()).separated);

    auto nm = canonicalize(neumann_bc());
    CHECK(nm.family == BcFamily::FullRank);
    CHECK(nm.separated);
    CHECK(nm.B.norm() == doctest::Approx(0.0));

    auto rb = canonicalize(robin_bc(0.7, -1.3));
    CHECK(rb.family == BcFamily::FullRank);
    CHECK(rb.separated);
    CHECK(rb.B(0, 0).real() == doctest::Approx(0.7));
    CHECK(rb.B(1, 1).real() == doctest::Approx(-1.3));

    auto pe = canonicalize(periodic_bc());
    CHECK(pe.family == BcFamily::Coupled);
    CHECK(pe.c == Cplx(1.0, 0.0));
    CHECK(pe.d == doctest::Approx(0.0));
    CHECK(pe.unit_modulus_c);
    CHECK(!pe.separated);

    auto ap = canonicalize(antiperiodic_bc());
    CHECK(ap.family == BcFamily::Coupled);
    CHECK(ap.c == Cplx(-1.0, 0.0));
    CHECK(ap.unit_modulus_c);

    auto cp = canonicalize(coupled_bc(Cplx(2.0, 0.0), 0.5));
    CHECK(cp.family == BcFamily::Coupled);
    CHECK(cp.c.real() == doctest::Approx(2.0));
    CHECK(cp.d == doctest::Approx(0.5));
    CHECK(!cp.unit_modulus_c);
}

TEST_CASE("one-sided conditions") {
    // f(a) = 0, f'(b) + d f(b) = 0
    BCMatrices bc;
    bc.C << 0, 1, 0, 0;
    bc.D << 0, 0.9, 1, 0;
    auto cb = canonicalize(bc);
    CHECK(cb.family == BcFamily::LeftDirichletRobin);
    CHECK(cb.d == doctest::Approx(0.9));
    CHECK(cb.separated);

    // f'(a) - d f(a) = 0, f(b) = 0
    BCMatrices bc2;
    bc2.C << 1, 0, 0, 0;
    bc2.D << -0.4, 0, 0, 1;
    auto cb2 = canonicalize(bc2);
    CHECK(cb2.family == BcFamily::RobinRightDirichlet);
    CHECK(cb2.d == doctest::Approx(-0.4));
}

TEST_CASE("canonical form is stable under random row transforms") {
    std::mt19937 rng(17);
    std::vector<BCMatrices> pairs = {dirichlet_bc(),
                                     neumann_bc(),
                                     periodic_bc(0.3),
                                     antiperiodic_bc(),
                                     robin_bc(0.7, -1.3),
                                     coupled_bc(Cplx(1.5, -0.5), 0.25)};
    for (const auto& base : pairs) {
        auto ref = canonicalize(base);
        for (int i = 0; i < 20; ++i) {
            auto bc = transformed(base, random_invertible(rng));
            REQUIRE(validate_bc(bc).ok);
            auto cb = canonicalize(bc);
            CHECK(cb.family == ref.family);
            CHECK(std::abs(cb.c - ref.c) <= 1e-8);
            CHECK(cb.d == doctest::Approx(ref.d).epsilon(1e-8));
            CHECK((cb.B - ref.B).norm() <= 1e-8 * (1 + ref.B.norm()));
            CHECK(row_equivalent(bc, base));
            // the reported transform actually maps to the canonical pair
            CHECK((cb.transform * bc.C - cb.canonical_pair.C).norm() <= 1e-8);
            CHECK((cb.transform * bc.D - cb.canonical_pair.D).norm() <= 1e-8);
        }
    }
}

TEST_CASE("canonical pairs are valid and reproduce their parameters") {
    for (const auto& base :
         {periodic_bc(0.3), robin_bc(0.7, -1.3), coupled_bc(Cplx(2.0, 1.0), 0.4)}) {
        auto cb = canonicalize(base);
        CHECK(validate_bc(cb.canonical_pair).ok);
        auto again = canonicalize(cb.canonical_pair);
        CHECK(again.family == cb.family);
        CHECK(std::abs(again.c - cb.c) <= 1e-10);
        CHECK(again.d == doctest::Approx(cb.d).epsilon(1e-10));
    }
}

TEST_CASE("row equivalence distinguishes different conditions") {
    CHECK(!row_equivalent(dirichlet_bc(), neumann_bc()));
    CHECK(!row_equivalent(periodic_bc(), antiperiodic_bc()));
    std::mt19937 rng(23);
    auto bc = transformed(periodic_bc(), random_invertible(rng));
    CHECK(row_equivalent(bc, periodic_bc()));
}
