#pragma once

// Adaptive Dormand-Prince 5(4) integration for the small complex systems used
// by the shooting solver.  Integration is forward-only and lands exactly on a
// supplied list of stop points (expression seams and output nodes).

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rbp {

struct OdeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OdeStats {
    long steps = 0;
    long rejected = 0;
};

template <std::size_t K>
using OdeState = std::array<std::complex<double>, K>;

template <std::size_t K, class RHS>
void rk_integrate(RHS rhs, double x0, double x1, OdeState<K>& y, double tol,
                  const std::vector<double>& stops = {},
                  const std::function<void(double, const OdeState<K>&)>& observer = nullptr,
                  OdeStats* stats = nullptr) {
    static_assert(K >= 1);
    if (x1 <= x0) {
        if (x1 == x0) return;
        throw OdeError("rk_integrate: backward integration not supported");
    }

    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                     e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

    std::size_t next_stop = 0;
    auto advance_stop = [&](double x) {
        while (next_stop < stops.size() && stops[next_stop] <= x + 1e-14 * (1 + std::abs(x)))
            ++next_stop;
    };
    advance_stop(x0);

    double x = x0;
    double h = (x1 - x0) / 64.0;
    const double hmin = 1e-14 * (std::abs(x1 - x0) + std::abs(x0) + std::abs(x1));
    if (observer) observer(x, y);

    OdeState<K> k1, k2, k3, k4, k5, k6, k7, yt, ynew;
    rhs(x, y, k1);
    while (x < x1 - 1e-14 * (1 + std::abs(x1))) {
        double target = x1;
        if (next_stop < stops.size() && stops[next_stop] < target) target = stops[next_stop];
        if (x + h >= target) {
            h = target - x;
        }
        if (h < hmin) throw OdeError("rk_integrate: step-size underflow near x=" + std::to_string(x));

        auto stage = [&](OdeState<K>& out, std::initializer_list<std::pair<double, const OdeState<K>*>> terms) {
            for (std::size_t i = 0; i < K; ++i) {
                std::complex<double> acc = 0.0;
                for (auto& [c, kv] : terms) acc += c * (*kv)[i];
                out[i] = y[i] + h * acc;
            }
        };
        stage(yt, {{a21, &k1}});
        rhs(x + h / 5, yt, k2);
        stage(yt, {{a31, &k1}, {a32, &k2}});
        rhs(x + 3 * h / 10, yt, k3);
        stage(yt, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        rhs(x + 4 * h / 5, yt, k4);
        stage(yt, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        rhs(x + 8 * h / 9, yt, k5);
        stage(yt, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        rhs(x + h, yt, k6);
        stage(ynew, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        rhs(x + h, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            std::complex<double> e =
                h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(ynew[i])));
            err = std::max(err, std::abs(e) / sc);
        }
        if (err <= 1.0) {
            double hdone = h;
            x += h;
            y = ynew;
            k1 = k7;  // FSAL
            if (stats) ++stats->steps;
            // a step may also land on the stop without having been clipped to
            // it; consume the stop either way or the next step underflows
            if (next_stop < stops.size() &&
                std::abs(x - stops[next_stop]) <= 1e-13 * (1 + std::abs(stops[next_stop]))) {
                x = stops[next_stop];  // snap onto the seam
                ++next_stop;
                rhs(x, y, k1);  // re-evaluate across the seam
            }
            if (observer) observer(x, y);
            double f = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            h = hdone * std::min(5.0, std::max(0.2, f));
        } else {
            if (stats) ++stats->rejected;
            h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
        }
    }
}

}  // namespace rbp
