#pragma once

// Validity of the regular HELP-type inequality
//   (int_0^b (1/r)|f'|^2 + q|f|^2)^2 <= K (int |f|^2)(int |l[f]|^2),
//   l[f] = -((1/r) f')' + q f,  r > 0,
// decided by the two-part criterion: both one-sided integrals of r positively
// increasing, and the boundary form (1/r f')(x) conj(f(x)) evaluated at b
// minus at 0 vanishing on every solution of l[f] = 0.  Plus a Galerkin
// estimate of the best constant as a divergence diagnostic.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "rbp/criteria.hpp"
#include "rbp/ode.hpp"
#include "rbp/weight.hpp"

namespace rbp {

struct HelpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- homogeneous solutions of l[f] = 0 ----------------------------------------

// First-order form: u = f, v = (1/r) f'; then u' = r v, v' = q u.  When r is
// singular at an endpoint but has a closed-form antiderivative, the system is
// integrated in the mass variable tau = int_a^x r instead: du/dtau = v,
// dv/dtau = (q/r) u, which is regular whenever q/r stays bounded.
struct HomSolutions {
    double u1a = 1.0, v1a = 0.0, u2a = 0.0, v2a = 1.0;
    double u1b = 0.0, v1b = 0.0, u2b = 0.0, v2b = 0.0;
    bool mass_parametrized = false;
};

namespace detail {

// inverse of the cumulative mass R(x) = int_a^x r by bisection
inline double mass_inverse(const WeightSpec& w, double tau) {
    double lo = w.a, hi = w.b;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1 + std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        (abs_integral(w, w.a, mid) < tau ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline bool endpoint_singular(const WeightSpec& w) {
    double eta = 1e-12 * (w.b - w.a);
    for (double x : {w.a + eta, w.b - eta}) {
        double v = w.eval(x);
        if (!std::isfinite(v) || std::abs(v) > 1e8) return true;
    }
    return false;
}

}  // namespace detail

inline HomSolutions homogeneous_solutions(const WeightSpec& w, const ExprPtr& q,
                                          double tol = 1e-11) {
    if (!w.sign_changes.empty())
        throw HelpError("homogeneous_solutions: the weight must be positive (no sign changes)");
    HomSolutions hs;
    auto qeval = [&](double x) { return q ? q->eval(x) : 0.0; };

    if (detail::endpoint_singular(w)) {
        if (!w.has_antiderivative())
            throw HelpError("endpoint-singular weight needs a closed-form antiderivative");
        hs.mass_parametrized = true;
        double tau_end = abs_integral(w, w.a, w.b);
        double eta = 1e-12 * (w.b - w.a);
        auto rhs = [&](double tau, const OdeState<4>& y, OdeState<4>& dy) {
            double x = detail::mass_inverse(w, tau);
            x = std::min(std::max(x, w.a + eta), w.b - eta);
            double ratio = qeval(x) / w.eval(x);
            if (!std::isfinite(ratio))
                throw HelpError("q/r not finite at x = " + std::to_string(x));
            for (int i = 0; i < 4; i += 2) {
                dy[i] = y[i + 1];
                dy[i + 1] = ratio * y[i];
            }
        };
        OdeState<4> y{1.0, 0.0, 0.0, 1.0};
        rk_integrate<4>(rhs, 0.0, tau_end, y, tol, {});
        hs.u1b = y[0].real();
        hs.v1b = y[1].real();
        hs.u2b = y[2].real();
        hs.v2b = y[3].real();
        return hs;
    }

    auto rhs = [&](double x, const OdeState<4>& y, OdeState<4>& dy) {
        double r = w.eval(x), qq = qeval(x);
        for (int i = 0; i < 4; i += 2) {
            dy[i] = r * y[i + 1];
            dy[i + 1] = qq * y[i];
        }
    };
    std::vector<double> stops;
    for (double s : w.cells)
        if (s > w.a && s < w.b) stops.push_back(s);
    OdeState<4> y{1.0, 0.0, 0.0, 1.0};
    rk_integrate<4>(rhs, w.a, w.b, y, tol, stops);
    hs.u1b = y[0].real();
    hs.v1b = y[1].real();
    hs.u2b = y[2].real();
    hs.v2b = y[3].real();
    return hs;
}

// -- boundary form ------------------------------------------------------------

// M[i][j] = v_i(b) u_j(b) - v_i(0) u_j(0); the form vanishes on every solution
// of l[f] = 0 exactly when all four entries vanish.
struct BoundaryFormMatrix {
    Eigen::Matrix2d M;
    double scale = 0.0;
    bool holds = false;
    double q0_value = 0.0;  // M(1,1), equals int_0^b r when q = 0
};

inline constexpr double kFormTol = 1e-9;

inline BoundaryFormMatrix bennewitz_condition2(const WeightSpec& w, const ExprPtr& q) {
    auto hs = homogeneous_solutions(w, q);
    BoundaryFormMatrix out;
    double ub[2] = {hs.u1b, hs.u2b}, vb[2] = {hs.v1b, hs.v2b};
    double ua[2] = {hs.u1a, hs.u2a}, va[2] = {hs.v1a, hs.v2a};
    double s[2];
    for (int i = 0; i < 2; ++i)
        s[i] = std::max({std::abs(ub[i]), std::abs(vb[i]), std::abs(ua[i]), std::abs(va[i])});
    out.scale = std::max({s[0] * s[0], s[0] * s[1], s[1] * s[1]});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.M(i, j) = vb[i] * ub[j] - va[i] * ua[j];
    out.holds = out.M.norm() <= kFormTol * out.scale;
    out.q0_value = out.M(1, 1);
    return out;
}

// -- verdict ------------------------------------------------------------------

enum class HelpValidity { Valid, Invalid, Inconclusive };

inline const char* to_cstr(HelpValidity v) {
    switch (v) {
        case HelpValidity::Valid: return "Valid";
        case HelpValidity::Invalid: return "Invalid";
        default: return "Inconclusive";
    }
}

struct HelpReport {
    PIReport pi_left;   // I at the left endpoint, inward
    PIReport pi_right;  // I at the right endpoint, inward
    BoundaryFormMatrix form;
    HelpValidity validity = HelpValidity::Inconclusive;
    std::string note;
};

inline HelpReport help_verdict(const WeightSpec& w, const ExprPtr& q) {
    HelpReport rep;
    double window = std::pow(2.0, std::floor(std::log2((w.b - w.a) / 2)));
    rep.pi_left = pi_test(integral_fn(w, w.a, +1), window);
    rep.pi_right = pi_test(integral_fn(w, w.b, -1), window);
    rep.form = bennewitz_condition2(w, q);

    bool pi_fail = rep.pi_left.verdict == PiVerdict::NotPositivelyIncreasing ||
                   rep.pi_right.verdict == PiVerdict::NotPositivelyIncreasing;
    bool pi_ok = rep.pi_left.verdict == PiVerdict::PositivelyIncreasing &&
                 rep.pi_right.verdict == PiVerdict::PositivelyIncreasing;
    bool form_far = rep.form.M.norm() > 1e-6 * rep.form.scale;

    if (pi_fail) {
        rep.validity = HelpValidity::Invalid;
        rep.note = "a one-sided integral of r is not positively increasing";
    } else if (form_far) {
        rep.validity = HelpValidity::Invalid;
        rep.note = "the boundary form does not vanish on the homogeneous solutions";
    } else if (pi_ok && rep.form.holds) {
        rep.validity = HelpValidity::Valid;
    } else {
        rep.note = "criteria inconclusive at the configured margins";
    }
    return rep;
}

// -- Galerkin estimate of the best constant -----------------------------------

// Trial space: v = (1/r) f' piecewise linear on N uniform cells plus the free
// value f(a); u follows by integrating u' = r v.  The three quadratic forms of
// the inequality are assembled on a composite midpoint rule (open: endpoint
// singularities of r are never sampled), and
//   K_N = max 4 D(p)^2 / (mu A(p) + B(p)/mu)^2  over p and mu > 0
// is computed by alternating the generalized eigenproblem in p with the
// closed-form optimum mu = sqrt(B/A).  K_N == D^2/(A B) at the optimum.
struct BestConstant {
    std::vector<int> n;
    std::vector<double> K;
    bool diverged = false;  // some K exceeded the cap: unbounded direction
    bool plateau = false;   // last refinement ratio below the plateau margin
};

inline constexpr double kBestConstantCap = 1e12;

namespace detail {

inline double best_constant_single(const WeightSpec& w, const ExprPtr& q, int N) {
    const int sub = 32;  // midpoint samples per cell
    int n = N + 2;       // v_0..v_N and u(a)
    double h = (w.b - w.a) / N;
    auto qeval = [&](double x) { return q ? q->eval(x) : 0.0; };

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);

    // u(x) as a running linear form in the parameters p = (v_0..v_N, u_a)
    Eigen::VectorXd u_coeff = Eigen::VectorXd::Zero(n);
    u_coeff(n - 1) = 1.0;

    for (int c = 0; c < N; ++c) {
        double x0 = w.a + c * h;
        double dv = 1.0 / h;  // v' = (v_{c+1} - v_c)/h
        for (int s = 0; s < sub; ++s) {
            double x = x0 + (s + 0.5) * h / sub;
            double wgt = h / sub;
            double r = w.eval(x), qq = qeval(x);
            if (!std::isfinite(r) || !std::isfinite(qq))
                throw HelpError("coefficient not finite inside a Galerkin cell");
            double frac = (s + 0.5) / sub;
            Eigen::VectorXd v_c = Eigen::VectorXd::Zero(n);
            v_c(c) = 1.0 - frac;
            v_c(c + 1) = frac;
            // advance u to the midpoint with half a sample step, use it, then
            // complete the step (midpoint cumulative integration of u' = r v)
            Eigen::VectorXd u_mid = u_coeff + (0.5 * wgt * r) * v_c;
            Eigen::VectorXd lf = Eigen::VectorXd::Zero(n);
            lf(c) = dv;
            lf(c + 1) = -dv;
            lf += qq * u_mid;
            D += wgt * (r * v_c * v_c.transpose() + qq * u_mid * u_mid.transpose());
            A += wgt * (u_mid * u_mid.transpose());
            B += wgt * (lf * lf.transpose());
            u_coeff = u_coeff + (wgt * r) * v_c;
        }
    }

    double sD = D.norm(), sA = A.norm(), sB = B.norm();
    double reg = 1e-14;

    // a null direction of B with D bounded away from zero means l[f] = 0 is
    // representable in the trial space with a nonzero Dirichlet form: the
    // ratio is unbounded and no finite constant exists
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(B);
        for (int i = 0; i < n; ++i) {
            if (eb.eigenvalues()(i) > 1e-10 * sB) break;
            Eigen::VectorXd p = eb.eigenvectors().col(i);
            if (std::abs(p.dot(D * p)) > 1e-10 * sD) return kBestConstantCap;
        }
    }
    auto ratio_at = [&](const Eigen::VectorXd& p) {
        double d = p.dot(D * p), a = p.dot(A * p), b = p.dot(B * p);
        if (a <= reg * sA * p.squaredNorm() || b <= reg * sB * p.squaredNorm())
            return kBestConstantCap;
        return std::min(kBestConstantCap, d * d / (a * b));
    };

    double mu = std::sqrt(std::max(sB, 1e-300) / std::max(sA, 1e-300));
    double best = 0.0;
    Eigen::VectorXd p_best;
    for (int it = 0; it < 40; ++it) {
        Eigen::MatrixXd C = mu * A + B / mu;
        C += (reg * C.norm()) * Eigen::MatrixXd::Identity(n, n);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(D, C);
        const auto& ev = es.eigenvalues();
        int idx = std::abs(ev(0)) > std::abs(ev(n - 1)) ? 0 : n - 1;
        Eigen::VectorXd p = es.eigenvectors().col(idx);
        double K = ratio_at(p);
        if (K > best) {
            best = K;
            p_best = p;
        }
        double a = p.dot(A * p), b = p.dot(B * p);
        if (!(a > 0) || !(b > 0)) break;
        double mu_new = std::sqrt(b / a);
        if (std::abs(std::log(mu_new / mu)) < 1e-10) break;
        mu = mu_new;
    }
    (void)p_best;
    return best;
}

}  // namespace detail

inline BestConstant best_constant_estimate(const WeightSpec& w, const ExprPtr& q, int N) {
    if (N < 8) throw HelpError("best_constant_estimate: N must be at least 8");
    BestConstant out;
    for (int m : {N, 2 * N, 4 * N}) {
        out.n.push_back(m);
        out.K.push_back(detail::best_constant_single(w, q, m));
    }
    double r1 = out.K[1] / std::max(out.K[0], 1e-300);
    double r2 = out.K[2] / std::max(out.K[1], 1e-300);
    out.diverged = out.K[2] >= kBestConstantCap || r1 > 2.0 || r2 > 2.0;
    out.plateau = !out.diverged && out.K[2] / std::max(out.K[0], 1e-300) < 1.2;
    return out;
}

}  // namespace rbp
