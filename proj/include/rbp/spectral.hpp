#pragma once

// Shooting solver for -f'' + q f = lambda r f on [a,b] with boundary pairs
// (C,D): fundamental matrices, characteristic determinant, argument-principle
// eigenvalue search, root functions (Jordan chains included) and the Gram
// conditioning diagnostic.  Also the interval shift map Phi and its inverse.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "rbp/bc.hpp"
#include "rbp/ode.hpp"
#include "rbp/weight.hpp"

namespace rbp {

struct SpectralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kOdeTol = 1e-11;

// -- problem assembly ---------------------------------------------------------

namespace detail {

// x-positions where a piecewise node switches branch (selector == x only)
inline void collect_var_breaks(const ExprPtr& e, std::vector<double>& out) {
    if (!e) return;
    if (e->kind == Expr::Kind::Piecewise && e->kids[0]->kind == Expr::Kind::Var)
        out.insert(out.end(), e->breaks.begin(), e->breaks.end());
    for (const auto& k : e->kids) collect_var_breaks(k, out);
}

}  // namespace detail

struct SLProblem {
    WeightSpec w;
    ExprPtr q;  // null means q = 0
    double a_eff = 0.0, b_eff = 0.0;  // integration window, clipped off
                                      // non-finite endpoint values of r or q
    std::vector<double> stops;        // interior smoothness seams

    double reval(double x) const { return w.eval(x); }
    double qeval(double x) const { return q ? q->eval(x) : 0.0; }
};

inline SLProblem make_problem(WeightSpec w, ExprPtr q = nullptr) {
    SLProblem p;
    p.q = std::move(q);
    p.w = std::move(w);
    auto bad = [&](double x) {
        return !std::isfinite(p.w.eval(x)) || !std::isfinite(p.qeval(x));
    };
    // retreat from an endpoint while the coefficients are non-finite, and keep
    // retreating while they are so large that the stepper would stall on the
    // boundary layer; integrable endpoint singularities lose only the layer
    auto huge = [&](double x) {
        return std::abs(p.w.eval(x)) + std::abs(p.qeval(x)) > 1e4;
    };
    double len = p.w.b - p.w.a;
    p.a_eff = p.w.a;
    p.b_eff = p.w.b;
    for (double eta = 1e-10 * len; (bad(p.a_eff) || huge(p.a_eff)) && eta <= 1e-6 * len;
         eta *= 10)
        p.a_eff = p.w.a + eta;
    for (double eta = 1e-10 * len; (bad(p.b_eff) || huge(p.b_eff)) && eta <= 1e-6 * len;
         eta *= 10)
        p.b_eff = p.w.b - eta;
    if (bad(p.a_eff) || bad(p.b_eff))
        throw SpectralError("coefficients not finite near the interval endpoints");
    std::vector<double> s = p.w.cells;
    detail::collect_var_breaks(p.q, s);
    std::sort(s.begin(), s.end());
    for (double v : s)
        if (v > p.a_eff && v < p.b_eff && (p.stops.empty() || v > p.stops.back()))
            p.stops.push_back(v);
    return p;
}

// -- fundamental system -------------------------------------------------------

struct FundamentalMatrix {
    Cplx lambda;
    Cplx u1b, du1b, u2b, du2b;  // u1(a)=1, u1'(a)=0 ; u2(a)=0, u2'(a)=1
    double wronskian_defect = 0.0;  // |u1 u2' - u2 u1' - 1| at b over the
                                    // peak product magnitude along the way
    OdeStats stats;
};

namespace detail {

template <std::size_t K>
struct SLRhs {
    const SLProblem& p;
    Cplx lambda;
    void operator()(double x, const OdeState<K>& y, OdeState<K>& dy) const {
        Cplx c = Cplx(p.qeval(x)) - lambda * p.reval(x);
        for (std::size_t i = 0; i + 1 < K; i += 2) {
            dy[i] = y[i + 1];
            dy[i + 1] = c * y[i];
        }
    }
};

}  // namespace detail

inline FundamentalMatrix fundamental_matrix(const SLProblem& p, Cplx lambda,
                                            double tol = kOdeTol) {
    OdeState<4> y{1.0, 0.0, 0.0, 1.0};
    FundamentalMatrix fm;
    fm.lambda = lambda;
    // the Wronskian is compared against the largest product magnitude seen
    // along the trajectory: the identity cancels two exponentially grown
    // terms, and the endpoint values alone can conspire to be O(1)
    double peak = 1.0;
    auto observer = [&](double, const OdeState<4>& s) {
        double m = std::abs(s[0]) * std::abs(s[3]) + std::abs(s[2]) * std::abs(s[1]);
        if (m > peak) peak = m;
    };
    rk_integrate<4>(detail::SLRhs<4>{p, lambda}, p.a_eff, p.b_eff, y, tol, p.stops, observer,
                    &fm.stats);
    fm.u1b = y[0];
    fm.du1b = y[1];
    fm.u2b = y[2];
    fm.du2b = y[3];
    fm.wronskian_defect = std::abs(fm.u1b * fm.du2b - fm.u2b * fm.du1b - 1.0) / peak;
    return fm;
}

// fundamental system sampled at the given interior nodes (sorted ascending)
struct FundamentalSamples {
    std::vector<double> x;
    std::vector<std::array<Cplx, 4>> y;  // (u1, u1', u2, u2') per node
};

inline FundamentalSamples fundamental_samples(const SLProblem& p, Cplx lambda,
                                              std::vector<double> nodes,
                                              double tol = kOdeTol) {
    for (double& v : nodes) v = std::min(std::max(v, p.a_eff), p.b_eff);
    std::vector<double> stops = p.stops;
    for (double v : nodes)
        if (v > p.a_eff && v < p.b_eff) stops.push_back(v);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    FundamentalSamples out;
    out.x = nodes;
    out.y.resize(nodes.size());
    std::size_t next = 0;
    auto observer = [&](double x, const OdeState<4>& y) {
        while (next < nodes.size() && nodes[next] <= x + 1e-13 * (1 + std::abs(x))) {
            out.y[next] = {y[0], y[1], y[2], y[3]};
            ++next;
        }
    };
    OdeState<4> y{1.0, 0.0, 0.0, 1.0};
    rk_integrate<4>(detail::SLRhs<4>{p, lambda}, p.a_eff, p.b_eff, y, tol, stops, observer);
    if (next != nodes.size()) throw SpectralError("sample nodes were not reached");
    return out;
}

// -- characteristic determinant -----------------------------------------------

// For f = alpha u1 + beta u2 the boundary residual
//   C (f'(a), -f'(b))^T - D (f(a), f(b))^T
// is M(lambda) (alpha, beta)^T; eigenvalues are the zeros of det M.
inline Mat2 char_matrix(const FundamentalMatrix& fm, const BCMatrices& bc) {
    Eigen::Vector2cd ca = bc.C * Eigen::Vector2cd(0.0, -fm.du1b) -
                          bc.D * Eigen::Vector2cd(1.0, fm.u1b);
    Eigen::Vector2cd cb = bc.C * Eigen::Vector2cd(1.0, -fm.du2b) -
                          bc.D * Eigen::Vector2cd(0.0, fm.u2b);
    Mat2 M;
    M.col(0) = ca;
    M.col(1) = cb;
    return M;
}

// det M expanded with the Wronskian identity u1 u2' - u2 u1' = 1.  The naive
// 2x2 determinant forms products of two transfer entries, which squares the
// exponential growth in lambda and loses the zeros to cancellation; after the
// reduction Delta is linear in the transfer entries, so the noise floor stays
// at the ulp of the entries themselves.
inline Cplx char_det(const SLProblem& p, const BCMatrices& bc, Cplx lambda,
                     double tol = kOdeTol) {
    auto fm = fundamental_matrix(p, lambda, tol);
    const Mat2& C = bc.C;
    const Mat2& D = bc.D;
    return C.determinant() * fm.du1b + D.determinant() * fm.u2b +
           (C(0, 0) * D(1, 1) - C(1, 0) * D(0, 1)) * fm.u1b +
           (C(1, 1) * D(0, 0) - C(0, 1) * D(1, 0)) * fm.du2b +
           (C(0, 0) * D(1, 0) - C(1, 0) * D(0, 0) +
            C(1, 1) * D(0, 1) - C(0, 1) * D(1, 1));
}

// -- eigenvalue search --------------------------------------------------------

struct Box {
    double re_lo, re_hi, im_lo, im_hi;
    Cplx center() const { return {0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)}; }
    double width() const { return re_hi - re_lo; }
    double height() const { return im_hi - im_lo; }
};

struct EigenPair {
    Cplx lambda;
    int multiplicity = 1;
    double residual = 0.0;  // |det M| at the root over the contour scale
};

struct Spectrum {
    std::vector<EigenPair> eigenvalues;  // sorted by |lambda|
    Box box;
    long det_evaluations = 0;
};

namespace detail {

class DetCache {
public:
    DetCache(const SLProblem& p, const BCMatrices& bc, double tol)
        : p_(p), bc_(bc), tol_(tol) {}

    Cplx operator()(Cplx z) {
        auto key = std::make_pair(z.real(), z.imag());
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        Cplx v = char_det(p_, bc_, z, tol_);
        cache_.emplace(key, v);
        return v;
    }
    long evaluations() const { return static_cast<long>(cache_.size()); }

private:
    const SLProblem& p_;
    const BCMatrices& bc_;
    double tol_;
    std::map<std::pair<double, double>, Cplx> cache_;
};

struct ContourNearZero : SpectralError {
    ContourNearZero() : SpectralError("contour passes too close to a zero") {}
};

struct WindingResult {
    int count = 0;
    double scale = 0.0;  // max |det| on the contour
};

inline double arg_step(Cplx f0, Cplx f1) { return std::arg(f1 / f0); }

inline WindingResult winding_number(DetCache& det, const Box& b) {
    std::array<Cplx, 5> corner = {Cplx(b.re_lo, b.im_lo), Cplx(b.re_hi, b.im_lo),
                                  Cplx(b.re_hi, b.im_hi), Cplx(b.re_lo, b.im_hi),
                                  Cplx(b.re_lo, b.im_lo)};
    double total = 0.0, max_abs = 0.0, min_abs = std::numeric_limits<double>::infinity();
    auto note = [&](Cplx f) {
        max_abs = std::max(max_abs, std::abs(f));
        min_abs = std::min(min_abs, std::abs(f));
    };

    std::function<void(Cplx, Cplx, Cplx, Cplx, int)> refine = [&](Cplx z0, Cplx f0, Cplx z1,
                                                                  Cplx f1, int depth) {
        double da = std::abs(arg_step(f0, f1));
        double dm = std::abs(std::log(std::abs(f1) / std::abs(f0)));
        Cplx zm = 0.5 * (z0 + z1);
        Cplx fm = det(zm);
        note(fm);
        // a collapse relative to the neighbouring samples means a zero sits
        // (numerically) on the contour; a global min/max test would misfire
        // here because |det| legitimately spans hundreds of orders of
        // magnitude between the real axis and the contour corners.  Only
        // trust the test once the segment is short: on coarse segments a
        // smooth exponential valley (e.g. where the contour crosses the
        // imaginary axis) dips just as deep, and refinement resolves it
        if (std::abs(fm) <= 1e-12 * std::min(std::abs(f0), std::abs(f1)) &&
            std::abs(z1 - z0) <= 1e-6 * (1.0 + std::abs(zm)))
            throw ContourNearZero();
        double half0 = arg_step(f0, fm);
        double half1 = arg_step(fm, f1);
        if (da <= 1.2 && dm <= 1.5 && depth <= 0 && std::abs(half0) <= 1.2 &&
            std::abs(half1) <= 1.2) {
            // a step aliased by ~2pi looks small but disagrees with the sum
            // of its two halves; accept only a consistent step, and only when
            // the halves themselves are moderate (a true half-step beyond pi
            // aliases coherently with the full step and would slip through)
            double split = half0 + half1;
            if (std::abs(split - arg_step(f0, f1)) <= 1e-6) {
                total += split;
                return;
            }
        }
        if (depth <= -14) throw ContourNearZero();
        refine(z0, f0, zm, fm, depth - 1);
        refine(zm, fm, z1, f1, depth - 1);
    };

    std::array<Cplx, 5> fc;
    for (int i = 0; i < 5; ++i) {
        fc[i] = det(corner[i]);
        note(fc[i]);
    }
    for (int i = 0; i < 4; ++i) refine(corner[i], fc[i], corner[i + 1], fc[i + 1], 4);

    if (!(max_abs > 0) || min_abs == 0.0) throw ContourNearZero();
    double w = total / (2.0 * std::acos(-1.0));
    long n = std::lround(w);
    if (std::abs(w - n) > 0.25) throw ContourNearZero();  // a zero near the contour
    if (n < 0) throw SpectralError("negative winding number: determinant not analytic?");
    WindingResult r;
    r.count = static_cast<int>(n);
    r.scale = max_abs;
    return r;
}

// winding with bounded contour-perturbation retries; the box is widened in
// place so the caller keeps working with the contour that was actually walked
inline WindingResult winding_retry(DetCache& det, Box& b) {
    double dw = 1e-3 * (b.width() + b.height());
    for (int attempt = 0;; ++attempt) {
        try {
            return winding_number(det, b);
        } catch (const ContourNearZero&) {
            if (attempt >= 5) throw;
            b.re_lo -= dw;
            b.re_hi += dw;
            b.im_lo -= 1.3 * dw;
            b.im_hi += 1.3 * dw;
        }
    }
}

inline Cplx polish_root(DetCache& det, Cplx z0, int multiplicity, double size, double scale,
                        double* out_resid) {
    // secant for simple zeros, multiplicity-corrected Newton otherwise
    Cplx z = z0;
    Cplx f = det(z);
    Cplx z_best = z;
    double f_best = std::abs(f);
    auto note = [&](Cplx zc, Cplx fc) {
        if (std::abs(fc) < f_best) {
            f_best = std::abs(fc);
            z_best = zc;
        }
    };
    if (multiplicity == 1) {
        Cplx z1 = z + Cplx(0.25 * size, 0.1 * size);
        Cplx f1 = det(z1);
        note(z1, f1);
        for (int it = 0; it < 60; ++it) {
            if (f1 == f) break;
            Cplx znew = z1 - f1 * (z1 - z) / (f1 - f);
            // a diverging secant is headed for overflow of the shooting
            // solutions; keep the best iterate instead
            if (std::abs(znew - z0) > 8 * size) break;
            z = z1;
            f = f1;
            z1 = znew;
            f1 = det(z1);
            note(z1, f1);
            if (std::abs(f1) <= 1e-10 * scale &&
                std::abs(z1 - z) <= 1e-10 * (1 + std::abs(z1)))
                break;
        }
    } else {
        for (int it = 0; it < 60; ++it) {
            double h = 1e-7 * (1 + std::abs(z));
            Cplx df = (det(z + h) - det(z - h)) / (2 * h);
            if (df == 0.0) break;
            Cplx step = double(multiplicity) * f / df;
            if (std::abs(z - step - z0) > 8 * size) break;
            z -= step;
            f = det(z);
            note(z, f);
            if (std::abs(step) <= 1e-10 * (1 + std::abs(z))) break;
        }
    }
    if (out_resid) *out_resid = f_best / scale;
    return z_best;
}

}  // namespace detail

inline Spectrum eigenvalues(const SLProblem& p, const BCMatrices& bc, Box box,
                            int max_count = 1000, double tol = kOdeTol) {
    auto v = validate_bc(bc);
    if (!v.ok) throw SpectralError("invalid boundary conditions: " + v.description);
    detail::DetCache det(p, bc, tol);

    Spectrum sp;
    auto outer = detail::winding_retry(det, box);
    sp.box = box;
    std::deque<std::tuple<Box, int, double>> work;
    work.emplace_back(box, outer.count, outer.scale);

    while (!work.empty()) {
        auto [b, count, scale] = work.front();
        work.pop_front();
        if (count == 0) continue;
        double size = std::max(b.width(), b.height());
        double tiny = 1e-8 * (1 + std::abs(b.center()));
        double cluster = 1e-4 * (1 + std::abs(b.center()));
        if (count == 1 || size < tiny || size < cluster) {
            double resid = 0.0;
            Cplx z = detail::polish_root(det, b.center(), count, size, scale, &resid);
            // the secant can escape past a neighbouring zero when the box is
            // still wide; in that case keep subdividing instead
            double margin = std::min(0.05 * size, cluster);
            bool inside = z.real() >= b.re_lo - margin && z.real() <= b.re_hi + margin &&
                          z.imag() >= b.im_lo - margin && z.imag() <= b.im_hi + margin;
            // below the cluster scale any displacement is absorbed by the
            // merge pass, so an escaped polish is still acceptable
            if (inside || size < tiny || size < cluster) {
                sp.eigenvalues.push_back({z, count, resid});
                continue;
            }
        }
        // prefer cuts perpendicular to the real axis: the nonreal spectrum is
        // finite, so an im-cut near 0 would run along most of the zeros
        bool split_re = b.width() >= 0.25 * b.height();
        for (int attempt = 0;; ++attempt) {
            if (attempt > 7)
                throw SpectralError(
                    "could not isolate eigenvalues by bisection in [" +
                    std::to_string(b.re_lo) + ", " + std::to_string(b.re_hi) + "] x [" +
                    std::to_string(b.im_lo) + ", " + std::to_string(b.im_hi) +
                    "] holding " + std::to_string(count) + " zeros");
            double frac = 0.5 + (attempt % 2 ? 1.0 : -1.0) * 0.083 * ((attempt + 1) / 2);
            Box b1 = b, b2 = b;
            double m;
            if (split_re) {
                m = b.re_lo + frac * b.width();
                b1.re_hi = m;
                b2.re_lo = m;
            } else {
                // never cut along the real axis itself
                m = b.im_lo + frac * b.height();
                if (std::abs(m) < 0.05 * b.height()) m = b.im_lo + 0.37 * b.height();
                b1.im_hi = m;
                b2.im_lo = m;
            }
            // reject cuts passing close to a zero before walking the contours;
            // "close" is judged against the neighbouring samples, since |det|
            // varies by orders of magnitude along a long cut
            bool cut_clear = true;
            std::array<double, 9> mag;
            for (int i = 0; i <= 8; ++i) {
                double s = double(i) / 8;
                Cplx z = split_re ? Cplx(m, b.im_lo + s * b.height())
                                  : Cplx(b.re_lo + s * b.width(), m);
                mag[i] = std::abs(det(z));
            }
            for (int i = 0; i <= 8 && cut_clear; ++i) {
                double nb = 0.0;
                if (i > 0) nb = std::max(nb, mag[i - 1]);
                if (i < 8) nb = std::max(nb, mag[i + 1]);
                if (mag[i] <= 1e-6 * nb) cut_clear = false;
            }
            if (!cut_clear) continue;
            try {
                auto w1 = detail::winding_number(det, b1);
                auto w2 = detail::winding_number(det, b2);
                if (w1.count + w2.count != count) continue;  // a zero sits on the cut
                work.emplace_back(b1, w1.count, w1.scale);
                work.emplace_back(b2, w2.count, w2.scale);
                break;
            } catch (const detail::ContourNearZero&) {
                continue;
            }
        }
    }

    // A multiple zero is resolved by roundoff into a cluster of simple zeros of
    // radius about sqrt(noise): merge clusters and re-polish their centroids
    // with a multiplicity-corrected Newton step.
    std::sort(sp.eigenvalues.begin(), sp.eigenvalues.end(),
              [](const EigenPair& x, const EigenPair& y) {
                  return std::abs(x.lambda) < std::abs(y.lambda);
              });
    std::vector<EigenPair> merged;
    std::vector<Cplx> centroid;
    for (const auto& e : sp.eigenvalues) {
        if (!merged.empty() &&
            std::abs(e.lambda - merged.back().lambda) <= 1e-4 * (1 + std::abs(e.lambda))) {
            auto& m = merged.back();
            centroid.back() = (centroid.back() * double(m.multiplicity) +
                               e.lambda * double(e.multiplicity)) /
                              double(m.multiplicity + e.multiplicity);
            m.multiplicity += e.multiplicity;
            m.residual = std::max(m.residual, e.residual);
        } else {
            merged.push_back(e);
            centroid.push_back(e.lambda);
        }
    }
    // re-polish everything at a fine scale: isolation boxes can be large, and
    // the polish tolerance inside them is proportionally loose
    for (std::size_t i = 0; i < merged.size(); ++i) {
        double size = 1e-5 * (1 + std::abs(centroid[i]));
        merged[i].lambda = detail::polish_root(det, centroid[i], merged[i].multiplicity, size,
                                               outer.scale, &merged[i].residual);
    }
    if (static_cast<int>(merged.size()) > max_count) merged.resize(max_count);
    sp.eigenvalues = std::move(merged);
    sp.det_evaluations = det.evaluations();
    return sp;
}

// Expands a thin box about the real axis until it encloses at least
// `min_count` zeros (counted with multiplicity).
inline Box default_search_box(const SLProblem& p, const BCMatrices& bc, int min_count,
                              double tol = kOdeTol) {
    detail::DetCache det(p, bc, tol);
    for (double L = 32.0; L <= 2e6; L *= 2.0) {
        Box b{-L, L, -L / 10, L / 10};
        int count = 0;
        try {
            count = detail::winding_retry(det, b).count;
        } catch (const SpectralError&) {
            continue;
        }
        if (count >= min_count) return b;
    }
    throw SpectralError("could not bracket the requested number of eigenvalues");
}

// -- eigenpair residual -------------------------------------------------------

// Scaled residual || (-f''+qf-lambda r f)/r ||_{L^2_{|r|}} / ||f||_{L^2_{|r|}}
// measured with a fourth-order difference stencil per smooth cell.
inline double weighted_residual(const SLProblem& p, Cplx lambda, Cplx alpha, Cplx beta,
                                int per_cell = 2000, double tol = kOdeTol) {
    std::vector<double> bounds;
    bounds.push_back(p.a_eff);
    for (double s : p.stops) bounds.push_back(s);
    bounds.push_back(p.b_eff);

    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c + 1 < bounds.size(); ++c) {
        double lo = bounds[c], hi = bounds[c + 1];
        int n = per_cell;
        double h = (hi - lo) / n;
        std::vector<double> nodes(n + 1);
        for (int i = 0; i <= n; ++i) nodes[i] = lo + i * h;
        auto fs = fundamental_samples(p, lambda, nodes, tol);
        std::vector<Cplx> f(n + 1);
        for (int i = 0; i <= n; ++i) f[i] = alpha * fs.y[i][0] + beta * fs.y[i][2];
        for (int i = 2; i + 2 <= n; ++i) {
            double x = nodes[i];
            double r = p.reval(x);
            if (!std::isfinite(r) || r == 0.0) continue;
            Cplx d2 = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] -
                       f[i + 2]) /
                      (12.0 * h * h);
            Cplx res = -d2 + p.qeval(x) * f[i] - lambda * r * f[i];
            double ar = std::abs(r);
            num += std::norm(res / r) * ar * h;
            den += std::norm(f[i]) * ar * h;
        }
    }
    if (den <= 0) throw SpectralError("degenerate eigenfunction in residual check");
    return std::sqrt(num / den);
}

// -- root functions and Gram diagnostic ---------------------------------------

// mass-equidistributed midpoint grid for the measure |r| dx
struct WeightedGrid {
    std::vector<double> x;
    double cell_mass = 0.0;              // common node weight (equal-mass grid)
    std::vector<double> per_node_mass;   // used instead when no antiderivative

    double node_mass(int k) const {
        return per_node_mass.empty() ? cell_mass : per_node_mass[k];
    }
};

inline WeightedGrid weighted_midpoint_grid(const SLProblem& p, int m) {
    WeightedGrid g;
    double total = abs_integral(p.w, p.a_eff, p.b_eff);
    if (!(total > 0)) throw SpectralError("weight has no mass on the interval");
    g.cell_mass = total / m;
    if (p.w.has_antiderivative()) {
        double lo_cursor = p.a_eff;
        double acc = 0.0;  // mass up to lo_cursor
        for (int k = 0; k < m; ++k) {
            double target = (k + 0.5) * g.cell_mass;
            double lo = lo_cursor, hi = p.b_eff;
            for (int it = 0; it < 200 && hi - lo > 1e-14 * (1 + std::abs(hi)); ++it) {
                double mid = 0.5 * (lo + hi);
                double mass = acc + abs_integral(p.w, lo_cursor, mid);
                (mass < target ? lo : hi) = mid;
            }
            double x = 0.5 * (lo + hi);
            acc += abs_integral(p.w, lo_cursor, x);
            lo_cursor = x;
            g.x.push_back(x);
        }
    } else {
        // uniform midpoints; per-node mass from local |r|
        double h = (p.b_eff - p.a_eff) / m;
        g.cell_mass = 0.0;
        for (int k = 0; k < m; ++k) g.x.push_back(p.a_eff + (k + 0.5) * h);
        g.per_node_mass.resize(m);
        for (int k = 0; k < m; ++k) g.per_node_mass[k] = std::abs(p.reval(g.x[k])) * h;
    }
    return g;
}

struct RootFunction {
    Cplx lambda;
    int chain_index = 0;  // 0 = eigenfunction, 1 = first associated function
    std::vector<Cplx> values;
};

namespace detail {

// Eigenfunction samples by multiple shooting.  Single shooting from `a`
// amplifies roundoff by the exponential growth of the whole solution space,
// which buries high-|lambda| eigenfunctions in a spurious growing mode; the
// interval is split into segments of bounded growth, and the per-segment
// coefficients come from the null vector of the assembled matching system.
inline std::vector<std::vector<Cplx>> bvp_eigenfunctions(const SLProblem& p,
                                                         const BCMatrices& bc, Cplx lambda,
                                                         std::vector<double> nodes, int count,
                                                         double tol) {
    for (double& v : nodes) v = std::min(std::max(v, p.a_eff), p.b_eff);

    // segment boundaries: smooth pieces, subdivided so the local growth
    // exponent integral sqrt(|q - lambda r|) stays below ~12 per segment
    std::vector<double> pieces;
    pieces.push_back(p.a_eff);
    for (double s : p.stops) pieces.push_back(s);
    pieces.push_back(p.b_eff);
    std::vector<double> bounds;
    bounds.push_back(p.a_eff);
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        double lo = pieces[i], hi = pieces[i + 1];
        double growth = 0.0;
        for (int j = 0; j < 64; ++j) {
            double x = lo + (j + 0.5) * (hi - lo) / 64;
            double g = std::sqrt(std::abs(Cplx(p.qeval(x)) - lambda * p.reval(x)));
            if (std::isfinite(g)) growth += g * (hi - lo) / 64;
        }
        int m = std::max(1, std::min(200, (int)std::ceil(growth / 12.0)));
        for (int j = 1; j <= m; ++j) bounds.push_back(lo + j * (hi - lo) / m);
    }
    int K = (int)bounds.size() - 1;

    // per-segment fundamental basis, sampled at the nodes in the segment
    std::vector<std::array<Cplx, 4>> basis(nodes.size());
    std::vector<int> node_seg(nodes.size());
    std::vector<Mat2> T(K);
    std::size_t next = 0;
    for (int k = 0; k < K; ++k) {
        double lo = bounds[k], hi = bounds[k + 1];
        std::vector<double> stops;
        std::size_t first = next;
        for (std::size_t i = next; i < nodes.size(); ++i) {
            if (nodes[i] > hi + 1e-13 * (1 + std::abs(hi)) && k + 1 < K) break;
            node_seg[i] = k;
            if (nodes[i] > lo && nodes[i] < hi) stops.push_back(nodes[i]);
        }
        std::size_t cursor = first;
        auto observer = [&](double x, const OdeState<4>& y) {
            while (cursor < nodes.size() && node_seg[cursor] == k &&
                   nodes[cursor] <= x + 1e-13 * (1 + std::abs(x))) {
                basis[cursor] = {y[0], y[1], y[2], y[3]};
                ++cursor;
            }
        };
        OdeState<4> y{1.0, 0.0, 0.0, 1.0};
        rk_integrate<4>(SLRhs<4>{p, lambda}, lo, hi, y, tol, stops, observer);
        T[k] << y[0], y[2], y[1], y[3];
        next = cursor;
    }
    if (next != nodes.size()) throw SpectralError("sample nodes were not reached");

    // unknowns: state (f, f') at each segment start; rows: continuity across
    // the internal boundaries, then the boundary conditions on c_1 and T_K c_K
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * K, 2 * K);
    for (int k = 0; k + 1 < K; ++k) {
        A.block<2, 2>(2 * k, 2 * k) = T[k];
        A.block<2, 2>(2 * k, 2 * k + 2) = -Mat2::Identity();
    }
    Mat2 end = T[K - 1];
    for (int i = 0; i < 2; ++i) {
        // C (f'(a), -f'(b))^T - D (f(a), f(b))^T, with (f(b), f'(b)) = T_K c_K
        A(2 * K - 2 + i, 1) += bc.C(i, 0);
        A(2 * K - 2 + i, 0) -= bc.D(i, 0);
        for (int j = 0; j < 2; ++j) {
            A(2 * K - 2 + i, 2 * K - 2 + j) += -bc.C(i, 1) * end(1, j) - bc.D(i, 1) * end(0, j);
        }
    }
    for (int i = 0; i < 2 * K; ++i) {
        double m = A.row(i).cwiseAbs().maxCoeff();
        if (m > 0) A.row(i) /= m;
    }

    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeFullV);
    std::vector<std::vector<Cplx>> out;
    for (int w = 0; w < count; ++w) {
        Eigen::VectorXcd c = svd.matrixV().col(2 * K - 1 - w);
        std::vector<Cplx> f(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            int k = node_seg[i];
            f[i] = c(2 * k) * basis[i][0] + c(2 * k + 1) * basis[i][2];
        }
        out.push_back(std::move(f));
    }
    return out;
}

// all root functions at one eigenvalue, sampled on `nodes`
inline std::vector<RootFunction> root_functions_at(const SLProblem& p, const BCMatrices& bc,
                                                   const EigenPair& e,
                                                   const std::vector<double>& nodes,
                                                   double tol = kOdeTol) {
    auto fm = fundamental_matrix(p, e.lambda, tol);
    Mat2 M = char_matrix(fm, bc);
    Eigen::JacobiSVD<Mat2> svd(M, Eigen::ComputeFullV | Eigen::ComputeFullU);
    double s0 = svd.singularValues()(0);
    double s1 = svd.singularValues()(1);

    std::vector<RootFunction> out;
    // geometric multiplicity two needs the whole characteristic matrix to
    // collapse (s0 small too); s1 alone is small at every eigenvalue
    double mscale = std::max({1.0, std::abs(fm.u1b), std::abs(fm.du1b),
                              std::abs(fm.u2b), std::abs(fm.du2b)});
    int want = (e.multiplicity > 1 && s0 <= 1e-6 * mscale) ? 2 : 1;
    (void)s1;
    auto funcs = bvp_eigenfunctions(p, bc, e.lambda, nodes, want, tol);
    out.push_back({e.lambda, 0, std::move(funcs[0])});
    if (e.multiplicity <= 1) return out;

    if (want == 2) {
        // geometric multiplicity two: a second independent eigenfunction
        out.push_back({e.lambda, 0, std::move(funcs[1])});
        return out;
    }
    auto fs = fundamental_samples(p, e.lambda, nodes, tol);
    Eigen::Vector2cd ker = svd.matrixV().col(1);

    // Jordan chain: particular solution of g'' = (q - lambda r) g - r f with
    // g(a) = g'(a) = 0, then a least-squares kernel correction for the BC.
    Cplx alpha = ker(0), beta = ker(1);
    std::vector<double> stops = p.stops;
    for (double v : nodes)
        if (v > p.a_eff && v < p.b_eff) stops.push_back(v);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    struct ChainRhs {
        const SLProblem& p;
        Cplx lambda, alpha, beta;
        void operator()(double x, const OdeState<6>& y, OdeState<6>& dy) const {
            double r = p.reval(x);
            Cplx c = Cplx(p.qeval(x)) - lambda * r;
            dy[0] = y[1];
            dy[1] = c * y[0];
            dy[2] = y[3];
            dy[3] = c * y[2];
            dy[4] = y[5];
            dy[5] = c * y[4] - r * (alpha * y[0] + beta * y[2]);
        }
    };
    std::vector<Cplx> gp(nodes.size());
    std::size_t next = 0;
    auto observer = [&](double x, const OdeState<6>& y) {
        while (next < nodes.size() && nodes[next] <= x + 1e-13 * (1 + std::abs(x))) {
            gp[next] = y[4];
            ++next;
        }
    };
    OdeState<6> y{1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    rk_integrate<6>(ChainRhs{p, e.lambda, alpha, beta}, p.a_eff, p.b_eff, y, tol, stops,
                    observer);
    if (next != nodes.size()) throw SpectralError("chain sample nodes were not reached");

    // boundary residual of gp alone (gp(a) = gp'(a) = 0)
    Eigen::Vector2cd resid = bc.C * Eigen::Vector2cd(0.0, -y[5]) -
                             bc.D * Eigen::Vector2cd(0.0, y[4]);
    // least-squares correction on the singular BC system; drop the tiny
    // singular direction (the eigenfunction itself), otherwise dividing by it
    // swamps g with a huge multiple of the eigenfunction
    Eigen::Vector2cd ut = svd.matrixU().adjoint() * (-resid);
    Eigen::Vector2cd gamma = Eigen::Vector2cd::Zero();
    for (int i = 0; i < 2; ++i)
        if (svd.singularValues()(i) > 1e-8 * std::max(s0, 1.0))
            gamma += (ut(i) / svd.singularValues()(i)) * svd.matrixV().col(i);
    std::vector<Cplx> g(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        g[i] = gp[i] + gamma(0) * fs.y[i][0] + gamma(1) * fs.y[i][2];
    out.push_back({e.lambda, 1, std::move(g)});
    return out;
}

}  // namespace detail

struct GramTable {
    std::vector<int> n;           // N' = 1..N
    std::vector<double> kappa;    // 2-norm condition number of G_{N'} (2N' functions)
    std::vector<Cplx> lambdas;    // selected eigenvalues, chain entries repeated
    bool rank_deficient = false;
    int grid_points = 0;
};

// kappa(G_{N'}) for the Gram matrices of 2N' unit-norm root functions nearest
// zero, balanced between positive and negative eigenvalues.
inline GramTable gram_condition(const SLProblem& p, const BCMatrices& bc, int N,
                                int grid_points = 1001, double tol = kOdeTol) {
    if (N < 1) throw SpectralError("gram_condition: N must be positive");
    // bracket comfortably more zeros than needed, then check sign balance
    Spectrum sp;
    int prev_minority = -1;
    for (int want = 2 * N + 4;; want += 2 * N) {
        Box box = default_search_box(p, bc, want, tol);
        sp = eigenvalues(p, bc, box, 100000, tol);
        int pos = 0, neg = 0, zero = 0;
        double ztol = 1e-4;
        for (const auto& e : sp.eigenvalues) {
            if (std::abs(e.lambda) < ztol)
                zero += e.multiplicity;
            else if (e.lambda.real() > 0)
                pos += e.multiplicity;
            else
                neg += e.multiplicity;
        }
        if (zero + 2 * std::min(pos, neg) >= 2 * N) break;
        // one-sided spectra cannot balance; accept once the minority side has
        // stopped growing and there are enough functions overall
        int minority = std::min(pos, neg);
        if (minority == prev_minority && zero + pos + neg >= 2 * N) break;
        prev_minority = minority;
        if (want > 20 * N)
            throw SpectralError("could not find a sign-balanced set of eigenvalues");
    }

    // selection order: zero group first, then alternate smallest |lambda|
    // positive / negative
    std::vector<const EigenPair*> zeros, pos, neg;
    for (const auto& e : sp.eigenvalues) {
        if (std::abs(e.lambda) < 1e-4)
            zeros.push_back(&e);
        else
            (e.lambda.real() > 0 ? pos : neg).push_back(&e);
    }
    auto by_abs = [](const EigenPair* a, const EigenPair* b) {
        return std::abs(a->lambda) < std::abs(b->lambda);
    };
    std::sort(pos.begin(), pos.end(), by_abs);
    std::sort(neg.begin(), neg.end(), by_abs);

    WeightedGrid grid = weighted_midpoint_grid(p, grid_points);
    std::vector<RootFunction> funcs;
    auto add_eigenvalue = [&](const EigenPair* e) {
        auto fns = detail::root_functions_at(p, bc, *e, grid.x, tol);
        for (auto& f : fns) funcs.push_back(std::move(f));
    };
    for (auto* e : zeros) add_eigenvalue(e);
    std::size_t ip = 0, in = 0;
    while (static_cast<int>(funcs.size()) < 2 * N && (ip < pos.size() || in < neg.size())) {
        bool take_pos;
        if (ip >= pos.size())
            take_pos = false;
        else if (in >= neg.size())
            take_pos = true;
        else
            take_pos = std::abs(pos[ip]->lambda) <= std::abs(neg[in]->lambda);
        add_eigenvalue(take_pos ? pos[ip++] : neg[in++]);
    }
    if (static_cast<int>(funcs.size()) < 2 * N)
        throw SpectralError("not enough root functions for the requested table");
    funcs.resize(2 * N);

    // columns of A are the root functions in the discrete weighted inner
    // product; G = A^H A, kappa(G) = (sigma_max/sigma_min)^2
    Eigen::MatrixXcd A(grid_points, 2 * N);
    for (int j = 0; j < 2 * N; ++j) {
        double nrm2 = 0.0;
        for (int k = 0; k < grid_points; ++k)
            nrm2 += std::norm(funcs[j].values[k]) * grid.node_mass(k);
        if (!(nrm2 > 0)) throw SpectralError("zero-norm root function");
        double s = 1.0 / std::sqrt(nrm2);
        for (int k = 0; k < grid_points; ++k)
            A(k, j) = funcs[j].values[k] * (s * std::sqrt(grid.node_mass(k)));
    }

    GramTable table;
    table.grid_points = grid_points;
    for (const auto& f : funcs) table.lambdas.push_back(f.lambda);
    for (int np = 1; np <= N; ++np) {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(A.leftCols(2 * np));
        double smax = svd.singularValues()(0);
        double smin = svd.singularValues()(svd.singularValues().size() - 1);
        if (smin <= 1e-10 * smax) table.rank_deficient = true;
        table.n.push_back(np);
        table.kappa.push_back((smax / smin) * (smax / smin));
    }
    return table;
}

// -- Jordan chain at zero (odd weight, periodic conditions, q = 0) ------------

struct JordanChainZero {
    double gamma;
    std::function<double(double)> f0;  // constant 1
    std::function<double(double)> g0;
};

inline JordanChainZero jordan_chain_at_zero(const WeightSpec& w) {
    double L = w.b;
    if (std::abs(w.a + w.b) > 1e-12 * (1 + std::abs(w.b)))
        throw SpectralError("Jordan chain formulas need an interval symmetric about 0");
    double mass = integrate_weighted(w, [](double) { return 1.0; }, -L, L);
    double scale = abs_integral(w, -L, L);
    if (std::abs(mass) > 1e-8 * scale)
        throw SpectralError("integral of r is nonzero: 0 is semisimple, no chain");
    double gamma = -0.5 / L * integrate_weighted(w, [](double t) { return t; }, -L, L);
    JordanChainZero jc;
    jc.gamma = gamma;
    jc.f0 = [](double) { return 1.0; };
    jc.g0 = [w, gamma, L](double x) {
        double r1 = integrate_weighted(w, [](double) { return 1.0; }, -L, x);
        double r2 = integrate_weighted(w, [](double t) { return t; }, -L, x);
        return gamma * (x + L) - (x * r1 - r2);
    };
    return jc;
}

// -- interval shift map Phi ---------------------------------------------------

struct GridFn {
    std::vector<double> x;  // strictly increasing
    std::vector<Cplx> v;
};

// Phi(f)(y) = (1/c) f(b - |c|^2 (a - y)) for y < a, f(y) for y >= a.
// Input grid lives in [a, b); nodes above bt = b - eps are carried onto
// [at, a) by the change of variables.
inline GridFn phi_transform(const GridFn& f, double a, double b, Cplx c, double eps) {
    if (c == 0.0) throw SpectralError("phi_transform: c must be nonzero");
    double k = std::norm(c);
    double at = a - eps / k, bt = b - eps;
    GridFn out;
    std::vector<std::pair<double, Cplx>> pts;
    for (std::size_t i = 0; i < f.x.size(); ++i) {
        double x = f.x[i];
        if (x < a - 1e-14 || x >= b) throw SpectralError("phi_transform: grid outside [a, b)");
        if (x <= bt)
            pts.emplace_back(x, f.v[i]);
        else
            pts.emplace_back(a - (b - x) / k, f.v[i] / c);
    }
    std::sort(pts.begin(), pts.end(),
              [](const auto& p1, const auto& p2) { return p1.first < p2.first; });
    for (auto& [x, v] : pts) {
        if (x < at - 1e-14) throw SpectralError("phi_transform: node left of the new interval");
        out.x.push_back(x);
        out.v.push_back(v);
    }
    return out;
}

inline GridFn phi_inverse(const GridFn& f, double a, double b, Cplx c, double eps) {
    if (c == 0.0) throw SpectralError("phi_inverse: c must be nonzero");
    double k = std::norm(c);
    double at = a - eps / k, bt = b - eps;
    GridFn out;
    std::vector<std::pair<double, Cplx>> pts;
    for (std::size_t i = 0; i < f.x.size(); ++i) {
        double x = f.x[i];
        if (x < at - 1e-14 || x > bt + 1e-14)
            throw SpectralError("phi_inverse: grid outside [at, bt]");
        if (x < a)
            pts.emplace_back(b - k * (a - x), f.v[i] * c);
        else
            pts.emplace_back(x, f.v[i]);
    }
    std::sort(pts.begin(), pts.end(),
              [](const auto& p1, const auto& p2) { return p1.first < p2.first; });
    for (auto& [x, v] : pts) {
        out.x.push_back(x);
        out.v.push_back(v);
    }
    return out;
}

}  // namespace rbp
