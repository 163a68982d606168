// End-to-end acceptance suite.  Each criterion prints one [PASS]/[FAIL] line;
// the exit status is the number of failed criteria.  argv[1] is the fixtures
// directory (default "fixtures").

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fd_oracle.hpp"
#include "rbp/help.hpp"
#include "rbp/io.hpp"
#include "testweights.hpp"

using namespace rbp;

namespace {

std::string g_fixtures = "fixtures";

struct Checker {
    bool ok = true;
    std::string first_failure;
    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            first_failure = what;
        }
    }
};

Rbp fixture_verdict(const std::string& name) {
    auto in = load_problem(g_fixtures + "/" + name);
    return decide_rbp(in.spec).outcome;
}

// -- 1. paper-example verdicts ------------------------------------------------

void criterion_verdicts(Checker& c) {
    struct Row {
        const char* file;
        Rbp expected;
    };
    const Row rows[] = {
        {"sgn_dirichlet.json", Rbp::HasRBP},   {"sgn_periodic.json", Rbp::HasRBP},
        {"log_dirichlet.json", Rbp::HasRBP},   {"log_periodic.json", Rbp::NoRBP},
        {"log_coupled2.json", Rbp::HasRBP},    {"wod_not_stable.json", Rbp::NoRBP},
        {"scaling_A3_B1.json", Rbp::HasRBP},   {"scaling_A5_B2.json", Rbp::HasRBP},
    };
    for (const auto& row : rows)
        c.expect(fixture_verdict(row.file) == row.expected,
                 std::string(row.file) + " != " + to_cstr(row.expected));
    // antiperiodic coupling gives the same verdict as periodic for a fixed r
    c.expect(fixture_verdict("log_antiperiodic.json") == fixture_verdict("log_periodic.json"),
             "antiperiodic verdict differs from periodic");
    auto sgn_anti = decide_rbp({testw::sgn_weight(), nullptr, antiperiodic_bc()});
    auto sgn_peri = decide_rbp({testw::sgn_weight(), nullptr, periodic_bc()});
    c.expect(sgn_anti.outcome == sgn_peri.outcome,
             "sgn antiperiodic verdict differs from periodic");
}

// -- 2. criteria equivalence --------------------------------------------------

void criterion_criteria(Checker& c) {
    // one-sided contraction, two-sided power bound and product condition must
    // agree on the odd / odd-dominated corpus
    std::vector<std::pair<std::string, WeightSpec>> corpus;
    corpus.emplace_back("sgn", testw::sgn_weight());
    corpus.emplace_back("slow_odd", testw::slow_odd_weight());
    corpus.emplace_back("log", testw::log_weight());
    corpus.emplace_back("scaling_3_1", scaling_perturbation(testw::unit_weight(), 3.0, 1.0));
    corpus.emplace_back("scaling_2_1", scaling_perturbation(testw::unit_weight(), 2.0, 1.0));
    corpus.emplace_back("scaling_5_1", scaling_perturbation(testw::unit_weight(), 5.0, 1.0));
    for (const auto& [name, w] : corpus) {
        double x_max = detail::local_window(w, 0.0);
        auto a = api_plus(w, 0.0, x_max);
        auto s = ap_suf(w, 0.0, x_max);
        auto n = ap_nec(w, 0.0, x_max);
        c.expect(a.outcome != Tri::Inconclusive, name + ": api_plus inconclusive");
        c.expect(a.outcome == s.outcome, name + ": api_plus and ap_suf disagree");
        c.expect(a.outcome == n.outcome, name + ": api_plus and ap_nec disagree");
    }
    // the three contraction characterizations agree on reference integrals
    struct Fn {
        const char* name;
        std::function<double(double)> F;
        Tri expected;
    };
    const Fn fns[] = {
        {"x^0.5", [](double x) { return std::sqrt(x); }, Tri::Holds},
        {"x^2", [](double x) { return x * x; }, Tri::Holds},
        {"exp(-1/x)", [](double x) { return std::exp(-1.0 / x); }, Tri::Holds},
        {"1/(1-log x)", [](double x) { return 1.0 / (1.0 - std::log(x)); }, Tri::Fails},
    };
    for (const auto& fn : fns) {
        c.expect(osv_condition_ii(fn.F, 0.5) == fn.expected,
                 std::string(fn.name) + ": condition (ii)");
        c.expect(osv_condition_iii(fn.F, 0.5) == fn.expected,
                 std::string(fn.name) + ": condition (iii)");
        c.expect(osv_condition_iv(fn.F, 0.5) == fn.expected,
                 std::string(fn.name) + ": condition (iv)");
    }
}

// -- 3. sandwich inequality ---------------------------------------------------

void criterion_sandwich(Checker& c) {
    // (1 - rho) Io <= I+- <= (1 + rho) Io at every grid point, where Io is the
    // odd-part integral and rho the even/odd domination factor
    for (auto base : {testw::unit_weight(), parse_weight("1+x", 0.0, 1.0, {})}) {
        for (double A : {2.0, 3.0, 5.0}) {
            auto w = scaling_perturbation(base, A, 1.0);
            auto prof = domination_profile(
                w, 0.0, detail::dyadic_eps_grid(detail::local_window(w, 0.0)));
            double rho = 0.0;
            for (double v : prof.rho) rho = std::max(rho, v);
            c.expect(std::abs(rho - (A - 1) / (A + 1)) <= 1e-6,
                     "rho mismatch for A=" + std::to_string(A));
            for (int i = 1; i <= 64; ++i) {
                double x = 0.25 * i / 64.0;
                double ip = abs_integral(w, 0.0, x);
                double im = abs_integral(w, -x, 0.0);
                double io = 0.5 * (ip + im);
                double slack_tol = 1e-10 * io;
                for (double side : {ip, im}) {
                    c.expect(side - (1 - rho) * io >= -slack_tol, "lower bound violated");
                    c.expect((1 + rho) * io - side >= -slack_tol, "upper bound violated");
                }
            }
        }
    }
}

// -- 4. spectral correctness --------------------------------------------------

void criterion_spectral(Checker& c) {
    auto w = testw::sgn_weight();
    auto p = make_problem(w);
    auto bc = dirichlet_bc();
    auto step = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };

    std::vector<double> oracle(5);
    for (int k = 1; k <= 5; ++k)
        oracle[k - 1] =
            fd_oracle::positive_eigenvalue_extrapolated(step, -1.0, 1.0, 10000, k);

    double lim = 1.1 * oracle[4] + 10.0;
    auto sp = eigenvalues(p, bc, {-lim, lim, -lim / 10, lim / 10});
    std::vector<double> pos, neg;
    for (const auto& e : sp.eigenvalues) {
        c.expect(std::abs(e.lambda.imag()) <= 1e-8, "nonreal eigenvalue reported");
        c.expect(weighted_residual(p, e.lambda, 0.0, 1.0) <= 1e-6,
                 "weighted residual above 1e-6");
        auto fm = fundamental_matrix(p, e.lambda);
        c.expect(fm.wronskian_defect <= 1e-9, "Wronskian drift above 1e-9");
        (e.lambda.real() > 0 ? pos : neg).push_back(e.lambda.real());
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.rbegin(), neg.rend());
    c.expect(pos.size() == neg.size(), "positive/negative counts differ");
    for (std::size_t i = 0; i < std::min(pos.size(), neg.size()); ++i)
        c.expect(std::abs(pos[i] + neg[i]) <= 1e-8, "symmetry defect above 1e-8");
    c.expect(pos.size() >= 5, "fewer than 5 positive eigenvalues found");
    for (int k = 0; k < 5 && k < (int)pos.size(); ++k)
        c.expect(std::abs(pos[k] - oracle[k]) <= 1e-6 * oracle[k],
                 "eigenvalue " + std::to_string(k + 1) + " misses the oracle");
}

// -- 5. Jordan chain at zero --------------------------------------------------

void criterion_jordan(Checker& c) {
    auto w = testw::sgn_weight();
    auto p = make_problem(w);
    auto sp = eigenvalues(p, periodic_bc(), {-30.0, 30.0, -3.0, 3.0});
    bool found = false;
    for (const auto& e : sp.eigenvalues)
        if (std::abs(e.lambda) < 1e-4 && e.multiplicity == 2) found = true;
    c.expect(found, "double eigenvalue at 0 not found");

    auto jc = jordan_chain_at_zero(w);
    c.expect(std::abs(jc.f0(0.3) - 1.0) == 0.0, "f0 is not the constant 1");
    double sup = 0.0;
    for (int i = 0; i <= 400; ++i) {
        double x = -1.0 + 2.0 * i / 400.0;
        sup = std::max(sup, std::abs(jc.g0(x) - x * (1 - std::abs(x)) / 2));
    }
    c.expect(sup <= 1e-10, "g0 misses x(1-|x|)/2 in sup norm");
    // l[g0] = -g0''/r = f0 = 1; g0 is piecewise quadratic, so a wide central
    // stencil inside one smooth piece carries no truncation error
    double h = 0.1;
    for (double x : {-0.7, -0.3, 0.35, 0.75}) {
        double d2 = (jc.g0(x + h) - 2 * jc.g0(x) + jc.g0(x - h)) / (h * h);
        double r = x > 0 ? 1.0 : -1.0;
        c.expect(std::abs(-d2 / r - 1.0) <= 1e-10, "l[g0] != f0 at x=" + std::to_string(x));
    }
}

// -- 6. unitary equivalence of the shifted problem ----------------------------

void criterion_shift(Checker& c) {
    auto w = testw::sgn_weight();
    Cplx cc(2.0, 0.0);
    double eps = 0.1;
    auto p1 = make_problem(w);
    auto p2 = make_problem(shift_scale_weight(w, cc, eps));
    auto bc = coupled_bc(cc, 0.0);
    auto box = default_search_box(p1, bc, 10);
    auto s1 = eigenvalues(p1, bc, box);
    auto s2 = eigenvalues(p2, bc, box);
    c.expect(s1.eigenvalues.size() >= 10, "fewer than 10 eigenvalues in the box");
    c.expect(s1.eigenvalues.size() == s2.eigenvalues.size(), "eigenvalue counts differ");
    auto by_re = [](const EigenPair& x, const EigenPair& y) {
        return x.lambda.real() < y.lambda.real();
    };
    std::sort(s1.eigenvalues.begin(), s1.eigenvalues.end(), by_re);
    std::sort(s2.eigenvalues.begin(), s2.eigenvalues.end(), by_re);
    std::size_t n = std::min(s1.eigenvalues.size(), s2.eigenvalues.size());
    for (std::size_t i = 0; i < n; ++i) {
        Cplx l1 = s1.eigenvalues[i].lambda, l2 = s2.eigenvalues[i].lambda;
        c.expect(std::abs(l1 - l2) <= 1e-8 * (1 + std::abs(l1)),
                 "shifted spectrum disagrees");
    }

    // per-cell isometry of Phi in the weighted norm: midpoint sums over the
    // same cells, with widths transported through the change of variables
    auto ws = shift_scale_weight(w, cc, eps);
    double k = std::norm(cc);
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int m = 512;
    for (int trial = 0; trial < 20; ++trial) {
        GridFn f;
        for (int i = 0; i < m; ++i) {
            f.x.push_back(-1.0 + 2.0 * (i + 0.5) / m);
            f.v.push_back(Cplx(u(rng), u(rng)));
        }
        auto g = phi_transform(f, -1.0, 1.0, cc, eps);
        double n1 = 0.0, n2 = 0.0;
        for (int i = 0; i < m; ++i) {
            double dx = 2.0 / m;
            n1 += std::norm(f.v[i]) * std::abs(w.eval(f.x[i])) * dx;
        }
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            double dx = (g.x[i] < -1.0) ? (2.0 / m) / k : 2.0 / m;
            n2 += std::norm(g.v[i]) * std::abs(ws.eval(g.x[i])) * dx;
        }
        c.expect(std::abs(n1 - n2) <= 1e-10 * n1, "Phi isometry defect above 1e-10");
    }
}

// -- 7. Gram diagnostic -------------------------------------------------------

void criterion_gram(Checker& c) {
    auto psgn = make_problem(testw::sgn_weight());
    auto t1 = gram_condition(psgn, periodic_bc(), 30, 601);
    c.expect(!t1.rank_deficient, "sgn Gram rank-deficient");
    c.expect(t1.kappa[29] / t1.kappa[9] < 1.5, "sgn kappa(G30)/kappa(G10) >= 1.5");

    auto plog = make_problem(testw::log_weight());
    auto t2 = gram_condition(plog, periodic_bc(), 30, 601);
    c.expect(t2.kappa[9] < t2.kappa[19] && t2.kappa[19] < t2.kappa[29],
             "log kappa not increasing");
    c.expect(t2.kappa[29] / t2.kappa[9] > 1.5, "log kappa(G30)/kappa(G10) <= 1.5");
}

// -- 8. HELP-type inequality --------------------------------------------------

void criterion_help(Checker& c) {
    double pi = std::acos(-1.0);
    auto w1 = parse_weight("1", 0.0, pi, {});
    auto q1 = parse_expr("-1");
    auto rep1 = help_verdict(w1, q1);
    c.expect(rep1.validity == HelpValidity::Valid, "r=1,q=-1 not Valid");
    c.expect(rep1.form.M.norm() <= 1e-9 * rep1.form.scale, "boundary form not zero");
    auto k1 = best_constant_estimate(w1, q1, 8);
    c.expect(!k1.diverged && k1.plateau, "valid fixture K_N did not plateau");

    for (auto w : {parse_weight("1", 0.0, 1.0, {}), parse_weight("2+exp(0-x)", 0.0, 2.0, {})}) {
        auto rep = help_verdict(w, nullptr);
        c.expect(rep.validity == HelpValidity::Invalid, "q=0 fixture not Invalid");
        double mass = abs_integral(w, w.a, w.b);
        c.expect(std::abs(rep.form.q0_value - mass) <= 1e-9 * mass,
                 "q=0 form value misses the total mass");
    }
    auto k0 = best_constant_estimate(parse_weight("1", 0.0, 1.0, {}), nullptr, 8);
    c.expect(k0.diverged, "q=0 K_N did not diverge");

    auto wf = parse_weight("pi/((1-x)*log((1-x)/e)^2)", 0.0, 1.0, {}, {"pi/log((1-x)/e)"});
    auto qf = parse_expr("-pi/((1-x)*log((1-x)/e)^2)");
    auto repf = help_verdict(wf, qf);
    c.expect(repf.form.holds, "final example: boundary form should vanish");
    c.expect(repf.pi_right.verdict == PiVerdict::NotPositivelyIncreasing,
             "final example: right integral should not be PI");
    c.expect(repf.validity == HelpValidity::Invalid, "final example not Invalid");
    auto kf = best_constant_estimate(wf, qf, 8);
    c.expect(kf.diverged, "final example K_N did not diverge");
}

// -- 9. invariance contracts --------------------------------------------------

void criterion_invariance(Checker& c) {
    // q and the coupling offset d are spectral data; the basis verdict and its
    // report must not depend on them
    auto w = testw::sgn_weight();
    std::string base;
    for (double d : {0.0, 1.0, -3.0}) {
        for (auto q : {ExprPtr(), parse_expr("0-sgn(x)"), parse_expr("5*x")}) {
            auto v = decide_rbp({w, q, coupled_bc(2.0, d)});
            std::string dump = to_json(v).dump();
            if (base.empty()) base = dump;
            c.expect(dump == base, "report bytes differ across q or d");
        }
    }

    std::mt19937 rng(20240518);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<BCMatrices> bcs = {dirichlet_bc(), robin_bc(0.7, -1.3), coupled_bc(2.0, 0.5),
                                   periodic_bc(), coupled_bc(Cplx(0.6, 0.8), -1.0)};
    for (const auto& bc : bcs) {
        auto ref = canonicalize(bc);
        for (int it = 0; it < 20; ++it) {
            Mat2 m;
            do {
                m << Cplx(u(rng), u(rng)), Cplx(u(rng), u(rng)), Cplx(u(rng), u(rng)),
                    Cplx(u(rng), u(rng));
            } while (std::abs(m.determinant()) < 0.1);
            BCMatrices t{m * bc.C, m * bc.D};
            auto cb = canonicalize(t);
            c.expect(cb.family == ref.family, "family changes under a row transform");
            c.expect(std::abs(cb.c - ref.c) <= 1e-8, "coupling c unstable");
            c.expect(std::abs(cb.d - ref.d) <= 1e-8, "parameter d unstable");
            c.expect((cb.B - ref.B).norm() <= 1e-8, "matrix B unstable");
        }
    }
}

int run(const char* label, double budget_s, void (*fn)(Checker&)) {
    Checker c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        fn(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= budget_s, "time budget exceeded");
    if (c.ok) {
        std::printf("[PASS] %s (%.1f s)\n", label, secs);
        return 0;
    }
    std::printf("[FAIL] %s (%.1f s): %s\n", label, secs, c.first_failure.c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_fixtures = argv[1];
    int failures = 0;
    failures += run("1. paper-example verdict suite", 10.0, criterion_verdicts);
    failures += run("2. criteria equivalence", 5.0, criterion_criteria);
    failures += run("3. sandwich inequality", 10.0, criterion_sandwich);
    failures += run("4. spectral correctness", 60.0, criterion_spectral);
    failures += run("5. Jordan chain at zero", 30.0, criterion_jordan);
    failures += run("6. unitary equivalence", 60.0, criterion_shift);
    failures += run("7. Gram diagnostic", 120.0, criterion_gram);
    failures += run("8. HELP-type inequality", 30.0, criterion_help);
    failures += run("9. invariance contracts", 10.0, criterion_invariance);
    return failures;
}
