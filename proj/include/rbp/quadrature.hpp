#pragma once

// Double-exponential (tanh-sinh) quadrature.  Handles integrable endpoint
// singularities, which defeat Newton-Cotes style rules on the weights used
// here (e.g. 1/((1-x) log^2((1-x)/e)) near x = 1).

#include <cmath>
#include <functional>
#include <stdexcept>

namespace rbp {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integrates f over [a, b] to the requested relative tolerance (with an
// absolute floor for integrals that are essentially zero).  Non-finite
// samples next to the endpoints are dropped; their tanh-sinh weights are
// negligible for integrable singularities.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12, double abs_floor = 1e-300,
                        int max_level = 13) {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double pi_half = std::acos(-1.0) * 0.5;
    const double t_max = 6.11;  // abscissae reach the endpoints at double precision

    auto sample = [&](double t) -> double {
        double s = std::sinh(t);
        double x = mid + half * std::tanh(pi_half * s);
        double w = half * pi_half * std::cosh(t) / (std::cosh(pi_half * s) * std::cosh(pi_half * s));
        if (x <= a || x >= b) return 0.0;
        double v = f(x);
        if (!std::isfinite(v)) return 0.0;
        return w * v;
    };

    double h = 1.0;
    double sum = sample(0.0);
    for (double t = h; t <= t_max; t += h) sum += sample(t) + sample(-t);
    double integral = h * sum;

    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        double add = 0.0;
        for (double t = h; t <= t_max; t += 2.0 * h) add += sample(t) + sample(-t);
        double next = 0.5 * integral + h * add;
        double err = std::abs(next - integral);
        integral = next;
        if (level >= 3 && err <= rel_tol * std::abs(integral) + abs_floor) return sign * integral;
    }
    throw QuadratureError("tanh-sinh quadrature did not converge within level budget");
}

}  // namespace rbp
