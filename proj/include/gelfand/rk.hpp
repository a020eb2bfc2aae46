#ifndef GELFAND_RK_HPP
#define GELFAND_RK_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

// Dormand-Prince 5(4) embedded pair with the classic quartic dense output.
// Header-only; state dimension fixed at compile time.

namespace gelfand::rk {

template <std::size_t N>
using State = std::array<double, N>;

struct StepUnderflow : std::runtime_error {
    double t;
    explicit StepUnderflow(double t_)
        : std::runtime_error("step size underflow at t = " + std::to_string(t_)), t(t_) {}
};

struct MaxStepsExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepControl {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;       // 0: 1e-4 of the span
    double h_max = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2000000;
};

// Continuous extension over one accepted step [t0, t0+h].
template <std::size_t N>
struct DenseOutput {
    double t0 = 0.0, h = 0.0;
    State<N> r1{}, r2{}, r3{}, r4{}, r5{};

    State<N> at(double t) const {
        double theta = (t - t0) / h;
        double th1 = 1.0 - theta;
        State<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
        return y;
    }
};

// Integrates y' = f(t, y) from t0 to t_end (t0 < t_end). After every accepted
// step calls obs(t_new, y_new, dense); the observer returns false to stop
// early. f has signature State<N>(double t, const State<N>& y).
template <std::size_t N, class RHS, class Observer>
void integrate(RHS&& f, double t0, State<N> y, double t_end, const StepControl& ctl,
               Observer&& obs) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    double t = t0;
    double h = ctl.h_init > 0.0 ? ctl.h_init : 1e-4 * (t_end - t0);
    h = std::min(h, ctl.h_max);
    State<N> k1 = f(t, y);
    bool rejected = false;

    for (std::size_t step = 0; step < ctl.max_steps; ++step) {
        if (t >= t_end) return;
        h = std::min(h, t_end - t);
        if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t))
            throw StepUnderflow(t);

        State<N> yt, k2, k3, k4, k5, k6, k7, ynew;
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * a21 * k1[i];
        k2 = f(t + c2 * h, yt);
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = f(t + c3 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = f(t + c4 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = f(t + c5 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = f(t + h, yt);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        k7 = f(t + h, ynew);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double sc = ctl.atol + ctl.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / N);

        if (err <= 1.0 || !std::isfinite(err)) {
            if (!std::isfinite(err)) {
                // non-finite stage: retreat hard and retry
                h *= 0.1;
                rejected = true;
                if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t))
                    throw StepUnderflow(t);
                continue;
            }
            DenseOutput<N> dense;
            dense.t0 = t;
            dense.h = h;
            for (std::size_t i = 0; i < N; ++i) {
                double ydiff = ynew[i] - y[i];
                double bspl = h * k1[i] - ydiff;
                dense.r1[i] = y[i];
                dense.r2[i] = ydiff;
                dense.r3[i] = bspl;
                dense.r4[i] = ydiff - h * k7[i] - bspl;
                dense.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                   d6 * k6[i] + d7 * k7[i]);
            }
            t += h;
            y = ynew;
            k1 = k7;   // FSAL
            double fac = 0.9 * std::pow(std::max(err, 1e-32), -0.2);
            fac = std::min(fac, rejected ? 1.0 : 5.0);
            fac = std::max(fac, 0.2);
            h = std::min(h * fac, ctl.h_max);
            rejected = false;
            if (!obs(t, y, dense)) return;
        } else {
            double fac = std::max(0.9 * std::pow(err, -0.2), 0.2);
            h *= fac;
            rejected = true;
        }
    }
    throw MaxStepsExceeded("integration exceeded " + std::to_string(ctl.max_steps) + " steps");
}

}  // namespace gelfand::rk

#endif
