#pragma once

// Riesz-basis-property decision engine: composes the local turning-point
// criteria, the boundary-condition canonical form, and the boundary behaviour
// of the weight into a HasRBP / NoRBP / Inconclusive verdict with a rule trail.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rbp/bc.hpp"
#include "rbp/criteria.hpp"
#include "rbp/weight.hpp"

namespace rbp {

enum class Rbp { HasRBP, NoRBP, Inconclusive };

inline const char* to_cstr(Rbp v) {
    switch (v) {
        case Rbp::HasRBP: return "HasRBP";
        case Rbp::NoRBP: return "NoRBP";
        default: return "Inconclusive";
    }
}

struct ProblemSpec {
    WeightSpec w;
    ExprPtr q;  // ignored by the decision rules; kept for the spectral tools
    BCMatrices bc;
};

// One entry of the rule trail: which rule fired, on what input, with what
// outcome.  Rules are named by what they check, so a trail can be replayed.
struct RuleStep {
    std::string rule;
    std::string detail;
    std::string outcome;
};

struct LocalVerdict {
    double x_k = 0.0;
    double window = 0.0;  // half-width used for all local scans
    Rbp outcome = Rbp::Inconclusive;
    std::string rule;     // the criterion that decided
    Domination domination = Domination::NotWeakly;
    PiVerdict pi = PiVerdict::Inconclusive;       // I+ at x_k
    Tri api_plus = Tri::Inconclusive;
    Tri ap_nec = Tri::Inconclusive;
    bool volkmer_certified = false;
    double volkmer_t = 0.0;
};

struct RbpVerdict {
    Rbp outcome = Rbp::Inconclusive;
    CanonicalBC bc;
    std::vector<LocalVerdict> locals;
    std::vector<RuleStep> trail;
};

namespace detail {

// largest dyadic eps <= half the distance to the nearest neighbouring sign
// change or interval endpoint
inline double local_window(const WeightSpec& w, double x_k) {
    double d = std::min(x_k - w.a, w.b - x_k);
    for (double s : w.sign_changes)
        if (s != x_k) d = std::min(d, std::abs(s - x_k));
    double half = d / 2;
    return std::pow(2.0, std::floor(std::log2(half)));
}

inline WeightSpec recenter(const WeightSpec& w, double x_k) {
    std::vector<double> sc;
    for (double s : w.sign_changes) sc.push_back(s - x_k);
    return make_weight(w.a - x_k, w.b - x_k, substitute(w.r, add(variable(), constant(x_k))),
                       sc);
}

inline std::vector<double> dyadic_eps_grid(double eps) {
    std::vector<double> grid;
    for (int k = 12; k >= 0; --k) grid.push_back(eps * std::pow(2.0, -k));
    return grid;
}

}  // namespace detail

// Sub-verdict for the Dirichlet problem restricted to a window around one
// turning point.  For locally odd-dominated weights the one-sided integral
// being positively increasing is equivalent to the local basis property; in
// general the contraction condition and the quotient condition are sufficient
// and the product condition is necessary.
inline LocalVerdict decide_local(const WeightSpec& w, double x_k) {
    LocalVerdict lv;
    lv.x_k = x_k;
    lv.window = detail::local_window(w, x_k);

    auto prof = domination_profile(w, x_k, detail::dyadic_eps_grid(lv.window));
    lv.domination = prof.classification;

    auto api = api_plus(w, x_k, lv.window);
    lv.api_plus = api.outcome;
    lv.pi = api.report.verdict;

    bool odd_dominated = prof.classification == Domination::Odd ||
                         prof.classification == Domination::StronglyOdd;
    if (odd_dominated && !prof.inconclusive) {
        if (lv.pi == PiVerdict::PositivelyIncreasing) {
            lv.outcome = Rbp::HasRBP;
            lv.rule = "odd-dominated: one-sided integral positively increasing";
        } else if (lv.pi == PiVerdict::NotPositivelyIncreasing) {
            lv.outcome = Rbp::NoRBP;
            lv.rule = "odd-dominated: one-sided integral not positively increasing";
        } else {
            lv.rule = "odd-dominated: positively-increasing test inconclusive";
        }
        return lv;
    }

    if (lv.api_plus == Tri::Holds) {
        lv.outcome = Rbp::HasRBP;
        lv.rule = "contraction condition on the one-sided integral holds";
        return lv;
    }

    // quotient condition g(x) = r(x)/r(tx) with a C^1 extension and g(0) != t
    auto wc = detail::recenter(w, x_k);
    for (double t : {-1.0, -2.0, -0.5, -3.0, -1.0 / 3, 2.0, 0.5}) {
        double eps = std::min(lv.window, 0.9 / std::max(1.0, std::abs(t)));
        try {
            auto vr = volkmer_test(wc, t, eps);
            if (vr.certified) {
                lv.volkmer_certified = true;
                lv.volkmer_t = t;
                lv.outcome = Rbp::HasRBP;
                lv.rule = "weight quotient condition certified (numeric)";
                return lv;
            }
        } catch (const CriteriaError&) {
            // sampling hit a zero of r(tx); try the next contraction
        }
    }

    auto nec = ap_nec(w, x_k, lv.window);
    lv.ap_nec = nec.outcome;
    if (nec.outcome == Tri::Fails) {
        lv.outcome = Rbp::NoRBP;
        lv.rule = "necessary product condition fails";
        return lv;
    }
    lv.rule = "no local criterion applies";
    return lv;
}

namespace detail {

inline Rbp conjunction(const std::vector<LocalVerdict>& locals) {
    bool inconclusive = false;
    for (const auto& lv : locals) {
        if (lv.outcome == Rbp::NoRBP) return Rbp::NoRBP;
        if (lv.outcome == Rbp::Inconclusive) inconclusive = true;
    }
    return inconclusive ? Rbp::Inconclusive : Rbp::HasRBP;
}

inline PiVerdict boundary_pi(const WeightSpec& w, double x, int dir) {
    double nearest = dir > 0 ? w.sign_changes.front() - x : x - w.sign_changes.back();
    double window = std::pow(2.0, std::floor(std::log2(nearest / 2)));
    return pi_test(integral_fn(w, x, dir), window).verdict;
}

}  // namespace detail

// Full decision: canonicalize the boundary conditions, decide each turning
// point locally, then dispatch on the global structure.  The potential q, the
// Robin/coupling parameter d and the Hermitian block B never enter: the basis
// property is invariant in them.
inline RbpVerdict decide_rbp(const ProblemSpec& spec) {
    RbpVerdict out;
    auto val = validate_bc(spec.bc);
    if (!val.ok) throw BcError("decide_rbp: invalid boundary conditions: " + val.description);
    out.bc = canonicalize(spec.bc);
    out.trail.push_back({"canonicalize", std::string("family ") + to_cstr(out.bc.family) +
                                             (out.bc.separated ? ", separated" : ", coupled"),
                         "ok"});
    out.trail.push_back(
        {"parameter-independence", "q, d and B do not affect the verdict", "noted"});

    const WeightSpec& w = spec.w;
    if (w.sign_changes.empty())
        throw WeightError("decide_rbp: the weight must change sign at least once");
    std::size_t n = w.sign_changes.size();

    for (double x_k : w.sign_changes) {
        out.locals.push_back(decide_local(w, x_k));
        const auto& lv = out.locals.back();
        out.trail.push_back({"local turning point", "x = " + std::to_string(x_k) + ": " +
                                                        lv.rule,
                             to_cstr(lv.outcome)});
    }
    Rbp all_local = detail::conjunction(out.locals);

    bool reduces_to_locals = out.bc.separated || n % 2 == 0 ||
                             out.bc.family == BcFamily::FullRank;
    if (reduces_to_locals) {
        std::string why = out.bc.separated ? "separated conditions"
                          : n % 2 == 0     ? "even number of turning points"
                                           : "full-rank family";
        out.trail.push_back({"reduction to turning points", why, to_cstr(all_local)});
        out.outcome = all_local;
        return out;
    }

    // coupled conditions with an odd number of turning points
    PiVerdict pia = detail::boundary_pi(w, w.a, +1);
    PiVerdict pib = detail::boundary_pi(w, w.b, -1);
    out.trail.push_back({"boundary integrals",
                         std::string("I_a+ ") + to_cstr(pia) + ", I_b- " + to_cstr(pib),
                         "scanned"});
    if (pia == PiVerdict::PositivelyIncreasing || pib == PiVerdict::PositivelyIncreasing) {
        out.trail.push_back({"positively increasing boundary integral",
                             "reduces to the turning points", to_cstr(all_local)});
        out.outcome = all_local;
        return out;
    }

    double eps_b =
        std::min(w.sign_changes.front() - w.a, w.b - w.sign_changes.back()) / 2;
    eps_b = std::pow(2.0, std::floor(std::log2(eps_b)));
    bool boundary_odd = locally_odd_at_boundary(w, eps_b);
    bool all_odd_dominated = std::all_of(out.locals.begin(), out.locals.end(),
                                         [](const LocalVerdict& lv) {
                                             return lv.domination == Domination::Odd ||
                                                    lv.domination == Domination::StronglyOdd;
                                         });
    if (boundary_odd && all_odd_dominated) {
        if (!out.bc.unit_modulus_c) {
            out.trail.push_back({"coupled, non-unit coupling modulus",
                                 "boundary-odd weight reduces to the turning points",
                                 to_cstr(all_local)});
            out.outcome = all_local;
            return out;
        }
        // |c| = 1: the boundary behaves like one more turning point
        Rbp boundary = pia == PiVerdict::PositivelyIncreasing ? Rbp::HasRBP
                       : pia == PiVerdict::NotPositivelyIncreasing ? Rbp::NoRBP
                                                                   : Rbp::Inconclusive;
        out.trail.push_back({"coupled, unit coupling modulus",
                             "boundary one-sided integral joins the conjunction",
                             to_cstr(boundary)});
        if (all_local == Rbp::NoRBP || boundary == Rbp::NoRBP)
            out.outcome = Rbp::NoRBP;
        else if (all_local == Rbp::HasRBP && boundary == Rbp::HasRBP)
            out.outcome = Rbp::HasRBP;
        else
            out.outcome = Rbp::Inconclusive;
        return out;
    }

    out.trail.push_back({"no applicable rule",
                         boundary_odd ? "turning points not all odd-dominated"
                                      : "weight not locally odd at the boundary",
                         "Inconclusive"});
    out.outcome = Rbp::Inconclusive;
    return out;
}

}  // namespace rbp
