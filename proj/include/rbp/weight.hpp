#pragma once

// Weight functions r on [a,b] with declared sign changes (turning points),
// exact-or-adaptive integration of |r|, even/odd decomposition, domination
// profiles and the shift/scaling transforms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbp/expr.hpp"
#include "rbp/quadrature.hpp"

namespace rbp {

struct WeightError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WeightSpec {
    double a = 0.0, b = 0.0;
    ExprPtr r;
    std::vector<double> sign_changes;  // strictly increasing, interior

    // Integration cells: interior seams (sign changes plus expression
    // breakpoints introduced by transforms).  When `antiderivative` is
    // nonempty it holds one antiderivative of |r| per cell,
    // antiderivative.size() == cells.size() + 1.
    std::vector<double> cells;
    std::vector<ExprPtr> antiderivative;

    double eval(double x) const { return r->eval(x); }

    bool has_antiderivative() const { return !antiderivative.empty(); }

    // sign of r just right of the k-th turning point (sampled)
    int sign_on_piece(std::size_t piece) const {
        double lo = piece == 0 ? a : sign_changes[piece - 1];
        double hi = piece == sign_changes.size() ? b : sign_changes[piece];
        for (int i = 1; i <= 32; ++i) {
            double x = lo + (hi - lo) * i / 33.0;
            double v = eval(x);
            if (std::isfinite(v) && v != 0.0) return v > 0 ? 1 : -1;
        }
        throw WeightError("cannot determine sign of r on piece");
    }
};

namespace detail {

inline std::size_t cell_index(const WeightSpec& w, double x) {
    std::size_t i = 0;
    while (i < w.cells.size() && x >= w.cells[i]) ++i;
    return i;
}

// integral of |r| over [u,v] inside one cell
inline double cell_abs_integral(const WeightSpec& w, std::size_t cell, double u, double v) {
    if (u >= v) return 0.0;
    if (w.has_antiderivative()) {
        const auto& F = w.antiderivative[cell];
        double val = F->eval(v) - F->eval(u);
        return val;
    }
    // integrate in shifted coordinates: for short segments far from the
    // origin the raw abscissae quantize at the ulp of the endpoints, which
    // stalls the quadrature refinement
    return integrate([&](double t) { return std::abs(w.eval(u + t)); }, 0.0, v - u);
}

}  // namespace detail

// Integral of |r| over an arbitrary segment [u,v] of [a,b].
inline double abs_integral(const WeightSpec& w, double u, double v) {
    if (u > v) std::swap(u, v);
    double slack = 1e-12 * (std::abs(w.b - w.a) + 1.0);
    if (u < w.a - slack || v > w.b + slack)
        throw WeightError("integration segment outside the weight interval");
    u = std::max(u, w.a);
    v = std::min(v, w.b);
    double total = 0.0;
    double lo = u;
    for (double s : w.cells) {
        if (s <= lo) continue;
        if (s >= v) break;
        total += detail::cell_abs_integral(w, detail::cell_index(w, 0.5 * (lo + s)), lo, s);
        lo = s;
    }
    total += detail::cell_abs_integral(w, detail::cell_index(w, 0.5 * (lo + v)), lo, v);
    return total;
}

// I^+_x(mu) / I^-_x(mu) of the weight: integral of |r| over [x, x+mu] or [x-mu, x].
inline double integral_I(const WeightSpec& w, double x, int dir, double mu) {
    if (mu < 0) throw WeightError("integral_I: negative length");
    return dir >= 0 ? abs_integral(w, x, x + mu) : abs_integral(w, x - mu, x);
}

// integral of g(t) * r(t) over [u,v] (signed), adaptive per cell
inline double integrate_weighted(const WeightSpec& w, const std::function<double(double)>& g,
                                 double u, double v) {
    double sign = 1.0;
    if (u > v) {
        std::swap(u, v);
        sign = -1.0;
    }
    double total = 0.0;
    double lo = u;
    auto piece = [&](double s, double t) {
        if (t <= s) return;
        total += integrate([&](double x) { return g(x) * w.eval(x); }, s, t, 1e-12, 1e-15);
    };
    for (double s : w.cells) {
        if (s <= lo) continue;
        if (s >= v) break;
        piece(lo, s);
        lo = s;
    }
    piece(lo, v);
    return sign * total;
}

// -- construction -------------------------------------------------------------

inline void validate_sign_pattern(const WeightSpec& w, int samples_per_piece = 10000) {
    std::vector<double> bounds;
    bounds.push_back(w.a);
    for (double s : w.sign_changes) bounds.push_back(s);
    bounds.push_back(w.b);
    int prev_sign = 0;
    for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
        double lo = bounds[p], hi = bounds[p + 1];
        int sign = 0;
        long zero_count = 0;
        for (int i = 1; i <= samples_per_piece; ++i) {
            double x = lo + (hi - lo) * i / (samples_per_piece + 1.0);
            double v = w.eval(x);
            if (!std::isfinite(v)) continue;
            if (v == 0.0) {
                ++zero_count;
                continue;
            }
            int s = v > 0 ? 1 : -1;
            if (sign == 0) sign = s;
            if (s != sign)
                throw WeightError("sign-pattern mismatch: r changes sign inside piece " +
                                  std::to_string(p) + " near x=" + std::to_string(x));
        }
        if (sign == 0) throw WeightError("r vanishes on piece " + std::to_string(p));
        if (zero_count > samples_per_piece / 100)
            throw WeightError("r vanishes on a set of positive measure on piece " +
                              std::to_string(p));
        if (prev_sign != 0 && sign == prev_sign)
            throw WeightError("declared sign change at x=" + std::to_string(bounds[p]) +
                              " is not an actual sign change");
        prev_sign = sign;
    }
}

inline WeightSpec make_weight(double a, double b, ExprPtr r, std::vector<double> sign_changes,
                              std::vector<ExprPtr> antiderivative = {},
                              std::vector<double> extra_cells = {}) {
    if (!(a < b)) throw WeightError("empty interval");
    for (std::size_t i = 0; i < sign_changes.size(); ++i) {
        double s = sign_changes[i];
        if (!(s > a && s < b)) throw WeightError("sign change not strictly interior");
        if (i > 0 && !(s > sign_changes[i - 1]))
            throw WeightError("sign changes must be strictly increasing");
    }
    WeightSpec w;
    w.a = a;
    w.b = b;
    w.r = std::move(r);
    w.sign_changes = std::move(sign_changes);
    w.cells = w.sign_changes;
    for (double c : extra_cells)
        if (c > a && c < b) w.cells.push_back(c);
    std::sort(w.cells.begin(), w.cells.end());
    w.cells.erase(std::unique(w.cells.begin(), w.cells.end()), w.cells.end());
    if (!antiderivative.empty() && antiderivative.size() != w.cells.size() + 1)
        throw WeightError("need one antiderivative per integration cell");
    w.antiderivative = std::move(antiderivative);
    validate_sign_pattern(w);
    return w;
}

inline WeightSpec parse_weight(const std::string& text, double a, double b,
                               std::vector<double> sign_changes,
                               const std::vector<std::string>& antiderivative_texts = {}) {
    std::vector<ExprPtr> anti;
    for (const auto& t : antiderivative_texts) anti.push_back(parse_expr(t));
    return make_weight(a, b, parse_expr(text), std::move(sign_changes), std::move(anti));
}

// -- even/odd decomposition ---------------------------------------------------

// r^e(x) = (r(x)+r(-x))/2, r^o(x) = (r(x)-r(-x))/2 on a symmetric interval.
inline std::pair<ExprPtr, ExprPtr> even_odd_parts(const WeightSpec& w) {
    if (std::abs(w.a + w.b) > 1e-12 * (std::abs(w.a) + std::abs(w.b) + 1.0))
        throw WeightError("even/odd decomposition needs an interval symmetric about 0");
    ExprPtr mirrored = substitute(w.r, neg(variable()));
    ExprPtr even = mul(constant(0.5), add(w.r, mirrored));
    ExprPtr odd = mul(constant(0.5), sub(w.r, mirrored));
    return {even, odd};
}

// -- domination profile -------------------------------------------------------

enum class Domination { NotWeakly, Weakly, Odd, StronglyOdd };

struct DominationProfile {
    std::vector<double> eps_grid;
    std::vector<double> rho;  // rho(eps) = sup_{x<=eps} int|r^e| / int r^o
    Domination classification = Domination::NotWeakly;
    bool inconclusive = false;
    double fitted_slope = 0.0;  // d log rho / d log eps over the trailing grid
};

// Profile of the weight recentred at `center` (a declared sign change or an
// interior point); orientation is normalized so that x r(x) > 0 locally.
inline DominationProfile domination_profile(const WeightSpec& w, double center,
                                            std::vector<double> eps_grid,
                                            int x_points_per_eps = 200) {
    if (eps_grid.empty()) throw WeightError("empty eps grid");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (eps_grid[i] <= 0) throw WeightError("eps grid must be positive");
        if (i > 0 && eps_grid[i] <= eps_grid[i - 1])
            throw WeightError("eps grid must be increasing");
    }
    double eps_max = eps_grid.back();
    if (center - eps_max < w.a - 1e-12 || center + eps_max > w.b + 1e-12)
        throw WeightError("domination window leaves the interval");

    // local weight rl(x) = sigma * r(center + x), sigma fixing x*rl(x) > 0
    double probe = center + eps_max * 1e-3;
    double sigma = w.eval(probe) >= 0 ? 1.0 : -1.0;
    auto rl = [&](double x) { return sigma * w.eval(center + x); };
    auto re_abs = [&](double x) { return 0.5 * std::abs(rl(x) + rl(-x)); };
    auto ro = [&](double x) { return 0.5 * (rl(x) - rl(-x)); };

    // exactly odd weights (sampled): rho == 0, no integration needed; this
    // also sidesteps quadrature on weights with a non-integrable-precision
    // singularity at the center
    {
        bool odd_exact = true;
        for (int i = 0; i < 400 && odd_exact; ++i) {
            double x = eps_max * std::pow(2.0, -48.0 * i / 399.0);
            double v = rl(x), m = rl(-x);
            if (!std::isfinite(v) || !std::isfinite(m)) continue;
            if (std::abs(v + m) > 1e-12 * std::max(std::abs(v), std::abs(m)))
                odd_exact = false;
        }
        if (odd_exact) {
            DominationProfile prof;
            prof.eps_grid = eps_grid;
            prof.rho.assign(eps_grid.size(), 0.0);
            prof.classification = Domination::StronglyOdd;
            return prof;
        }
    }

    // cumulative integrals over a logarithmic x grid spanning eps_max*2^-48..eps_max
    const int total_pts = x_points_per_eps;
    std::vector<double> xg(total_pts), cum_e(total_pts), cum_o(total_pts);
    double x_min = eps_max * std::pow(2.0, -48);
    for (int i = 0; i < total_pts; ++i)
        xg[i] = x_min * std::pow(eps_max / x_min, double(i) / (total_pts - 1));
    // With closed-form antiderivatives and a sign-constant even part the
    // cumulatives follow from the one-sided integrals: int r^e = (I+ - I-)/2,
    // int r^o = (I+ + I-)/2.  This also works when r is singular at the
    // center, where quadrature cannot converge.
    bool use_antideriv = w.has_antiderivative();
    if (use_antideriv) {
        int sign_seen = 0;
        for (int i = 0; i < 400 && use_antideriv; ++i) {
            double x = eps_max * std::pow(2.0, -48.0 * i / 399.0);
            double v = rl(x) + rl(-x);
            if (!std::isfinite(v) || std::abs(v) <= 1e-12 * std::abs(rl(x))) continue;
            int s = v > 0 ? 1 : -1;
            if (sign_seen != 0 && s != sign_seen) use_antideriv = false;
            sign_seen = s;
        }
    }
    if (use_antideriv) {
        for (int i = 0; i < total_pts; ++i) {
            double ip = integral_I(w, center, +1, xg[i]);
            double im = integral_I(w, center, -1, xg[i]);
            cum_e[i] = 0.5 * std::abs(ip - im);
            cum_o[i] = 0.5 * (ip + im);
        }
    } else {
        double lo = 0.0, acc_e = 0.0, acc_o = 0.0;
        for (int i = 0; i < total_pts; ++i) {
            acc_e += integrate(re_abs, lo, xg[i], 1e-10, 1e-18);
            acc_o += integrate(ro, lo, xg[i], 1e-10, 1e-18);
            cum_e[i] = acc_e;
            cum_o[i] = acc_o;
            lo = xg[i];
        }
    }

    DominationProfile prof;
    prof.eps_grid = eps_grid;
    bool pure_odd = true;
    for (double eps : eps_grid) {
        double sup = 0.0;
        for (int i = 0; i < total_pts; ++i) {
            if (xg[i] > eps * (1 + 1e-12)) break;
            if (cum_o[i] <= 0)
                throw WeightError("odd-part integral nonpositive: x r(x) > 0 fails near center");
            double ratio = cum_e[i] / cum_o[i];
            if (cum_e[i] > 1e-13 * cum_o[i]) pure_odd = false;
            sup = std::max(sup, ratio);
        }
        prof.rho.push_back(sup);
    }

    if (pure_odd) {
        prof.classification = Domination::StronglyOdd;
        return prof;
    }
    double sup_rho = *std::max_element(prof.rho.begin(), prof.rho.end());
    if (sup_rho >= 1.0 - 1e-9) {
        prof.classification = Domination::NotWeakly;
        return prof;
    }
    // trailing slope of log rho vs log eps (rho ~ eps^s  =>  rho -> 0 iff s > 0)
    std::size_t n = eps_grid.size();
    std::size_t start = n >= 6 ? n / 2 : 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = start; i < n; ++i) {
        if (prof.rho[i] <= 0) continue;
        double lx = std::log(eps_grid[i]), ly = std::log(prof.rho[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    double slope = 0.0;
    if (m >= 2 && sxx * m - sx * sx > 0) slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    prof.fitted_slope = slope;
    if (slope >= 0.55)
        prof.classification = Domination::StronglyOdd;
    else if (slope >= 0.08)
        prof.classification = Domination::Odd;
    else if (slope < 0.02)
        prof.classification = Domination::Weakly;
    else {
        prof.classification = Domination::Weakly;
        prof.inconclusive = true;
    }
    return prof;
}

// -- local oddness ------------------------------------------------------------

// r(a+x) == -r(b-x) for a.a. x in (0, eps), checked on a dense grid.
inline bool locally_odd_at_boundary(const WeightSpec& w, double eps, double rel_tol = 1e-10,
                                    int samples = 2000) {
    if (!(eps > 0 && eps < 0.5 * (w.b - w.a))) throw WeightError("eps out of range");
    double scale = 0.0;
    int checked = 0;
    std::vector<std::pair<double, double>> vals;
    for (int i = 1; i <= samples; ++i) {
        double x = eps * i / (samples + 1.0);
        double u = w.eval(w.a + x), v = w.eval(w.b - x);
        if (!std::isfinite(u) || !std::isfinite(v)) continue;
        scale = std::max({scale, std::abs(u), std::abs(v)});
        vals.emplace_back(u, v);
        ++checked;
    }
    if (checked < samples / 2) return false;
    for (auto [u, v] : vals)
        if (std::abs(u + v) > rel_tol * scale) return false;
    return true;
}

// r(center+x) == -r(center-x) for x in (0, eps).
inline bool locally_odd_at(const WeightSpec& w, double center, double eps,
                           double rel_tol = 1e-10, int samples = 2000) {
    double scale = 0.0;
    int checked = 0;
    std::vector<std::pair<double, double>> vals;
    for (int i = 1; i <= samples; ++i) {
        double x = eps * i / (samples + 1.0);
        double u = w.eval(center + x), v = w.eval(center - x);
        if (!std::isfinite(u) || !std::isfinite(v)) continue;
        scale = std::max({scale, std::abs(u), std::abs(v)});
        vals.emplace_back(u, v);
        ++checked;
    }
    if (checked < samples / 2) return false;
    for (auto [u, v] : vals)
        if (std::abs(u + v) > rel_tol * scale) return false;
    return true;
}

// -- transforms ---------------------------------------------------------------

// Scaling perturbation of a positive weight r on [0,1]:
//   rt(x) = r(x) on (0,b),  rt(x) = -A r(-B x) on (-b,0),  b = min(1, 1/B).
inline WeightSpec scaling_perturbation(const WeightSpec& pos, double A, double B) {
    if (!pos.sign_changes.empty() || pos.a != 0.0)
        throw WeightError("scaling perturbation expects a one-sign weight on [0,1]");
    if (!(A > 0 && B > 0)) throw WeightError("A, B must be positive");
    for (int i = 1; i < 64; ++i) {
        double x = pos.b * i / 64.0;
        double v = pos.eval(x);
        if (std::isfinite(v) && v <= 0) throw WeightError("input weight must be positive a.e.");
    }
    double b = std::min(1.0, 1.0 / B);
    ExprPtr left = neg(mul(constant(A), substitute(pos.r, mul(constant(-B), variable()))));
    ExprPtr rt = piecewise(variable(), {0.0}, {left, pos.r});
    std::vector<ExprPtr> anti;
    if (pos.has_antiderivative()) {
        // |rt| = A r(-Bx) on (-b,0): antiderivative -(A/B) F(-Bx)
        const auto& F = pos.antiderivative[0];
        anti.push_back(neg(mul(constant(A / B), substitute(F, mul(constant(-B), variable())))));
        anti.push_back(pos.antiderivative[0]);
    }
    return make_weight(-b, b, rt, {0.0}, std::move(anti));
}

// Shifted/scaled weight: rt on [at, bt] with
//   at = a - eps/|c|^2, bt = b - eps,
//   rt(x) = |c|^4 r(b - |c|^2 (a - x)) on [at, a), rt = r on [a, bt].
// If n is odd, a becomes an additional turning point of rt.
inline WeightSpec shift_scale_weight(const WeightSpec& w, std::complex<double> c, double eps) {
    if (c == 0.0) throw WeightError("c must be nonzero");
    if (w.sign_changes.empty()) throw WeightError("weight needs at least one turning point");
    double x1 = w.sign_changes.front(), xn = w.sign_changes.back();
    if (!(eps > 0 && eps < 0.5 * std::min(x1 - w.a, w.b - xn)))
        throw WeightError("eps out of range");
    double k = std::norm(c);  // |c|^2
    double at = w.a - eps / k;
    double bt = w.b - eps;
    // argument b - |c|^2 (a - x) = (b - k a) + k x
    ExprPtr arg = add(constant(w.b - k * w.a), mul(constant(k), variable()));
    ExprPtr left = mul(constant(k * k), substitute(w.r, arg));
    ExprPtr rt = piecewise(variable(), {w.a}, {left, w.r});

    bool n_odd = w.sign_changes.size() % 2 == 1;
    std::vector<double> changes;
    if (n_odd) changes.push_back(w.a);
    for (double s : w.sign_changes)
        if (s < bt) changes.push_back(s);

    // integration cells: the seam at `a` always splits a cell, plus original cells
    std::vector<double> extra;
    if (!n_odd) extra.push_back(w.a);
    std::vector<ExprPtr> anti;
    if (w.has_antiderivative()) {
        // |rt| = k^2 |r(phi(x))| on [at,a): antiderivative k * F_last(phi(x))
        anti.push_back(mul(constant(k), substitute(w.antiderivative.back(), arg)));
        for (std::size_t i = 0; i < w.antiderivative.size(); ++i) {
            // original cell [cell_{i-1}, cell_i] must intersect [a, bt]
            double cell_hi = i < w.cells.size() ? w.cells[i] : w.b;
            if (cell_hi <= bt + 1e-15 || i == w.antiderivative.size() - 1)
                anti.push_back(w.antiderivative[i]);
        }
    }
    WeightSpec out = make_weight(at, bt, rt, std::move(changes), {}, extra);
    if (!anti.empty() && anti.size() == out.cells.size() + 1) out.antiderivative = std::move(anti);
    // sanity: x rt(x) keeps the alternating pattern (validated in make_weight)
    return out;
}

}  // namespace rbp
