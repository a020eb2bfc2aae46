#include "gelfand/shoot.hpp"

#include <algorithm>
#include <cmath>

#include "gelfand/parallel.hpp"

namespace gelfand {

namespace {

// f extended below zero: locally Lipschitz, nonnegative, nondecreasing,
// convex (max of the tangent at 0 and 0 itself)
struct ExtendedF {
    const NonlinearitySpec& spec;
    double operator()(double v) const {
        if (v >= 0.0) return spec.f(v);
        return std::max(0.0, spec.f0() + spec.fp0() * v);
    }
};

}  // namespace

double Profile::eval_v(double r, int order) const {
    if (r <= grid_start_) {
        // Taylor seed: v = alpha - f(alpha) r^2/4
        if (order == 0) return alpha - series_f_alpha_ * r * r / 4.0;
        return -series_f_alpha_ * r / 2.0;
    }
    // locate the dense segment containing r
    auto cmp = [](const rk::DenseOutput<2>& seg, double x) { return seg.t0 + seg.h < x; };
    auto it = std::lower_bound(segments_.begin(), segments_.end(), r, cmp);
    if (it == segments_.end()) it = segments_.end() - 1;
    auto y = it->at(std::min(r, it->t0 + it->h));
    return y[static_cast<std::size_t>(order)];
}

double Profile::value(double r) const {
    if (!u_coords) return eval_v(r, 0);
    return eval_v(r * R, 0);
}

double Profile::derivative(double r) const {
    if (!u_coords) return eval_v(r, 1);
    return R * eval_v(r * R, 1);
}

Profile shoot(const NonlinearitySpec& spec, double alpha, const ShootOptions& opts) {
    if (!(alpha > 0.0))
        throw ShootError(ShootError::Kind::NotApplicable, "alpha must be positive");
    double logf_alpha = spec.log_f(alpha);
    if (logf_alpha > opts.log_f_cap)
        throw ShootError(ShootError::Kind::OverflowCap,
                         "log f(alpha) = " + std::to_string(logf_alpha) + " exceeds cap " +
                             std::to_string(opts.log_f_cap) + " at alpha = " +
                             std::to_string(alpha));

    ExtendedF f{spec};
    double fa = f(alpha);
    double h0 = std::min(1e-6, 0.01 / std::sqrt(std::max(fa, 1e-300)));

    Profile p;
    p.alpha = alpha;
    p.grid_start_ = h0;
    p.series_f_alpha_ = fa;

    auto rhs = [&f](double r, const rk::State<2>& y) -> rk::State<2> {
        return {y[1], -y[1] / r - f(y[0])};
    };

    rk::StepControl ctl;
    ctl.rtol = opts.rtol;
    ctl.atol = opts.atol;
    ctl.h_init = 0.5 * h0;

    rk::State<2> y{alpha - fa * h0 * h0 / 4.0, -fa * h0 / 2.0};
    p.grid.push_back(h0);
    p.v.push_back(y[0]);
    p.vp.push_back(y[1]);

    bool crossed = false;
    rk::DenseOutput<2> cross_seg;
    try {
        rk::integrate<2>(rhs, h0, y, opts.r_max, ctl,
                         [&](double r, const rk::State<2>& yn, const rk::DenseOutput<2>& dense) {
                             p.segments_.push_back(dense);
                             p.grid.push_back(r);
                             p.v.push_back(yn[0]);
                             p.vp.push_back(yn[1]);
                             if (yn[0] <= 0.0) {
                                 crossed = true;
                                 cross_seg = dense;
                                 return false;
                             }
                             return true;
                         });
    } catch (const rk::StepUnderflow& e) {
        throw ShootError(ShootError::Kind::StepUnderflow,
                         "step underflow at r = " + std::to_string(e.t) + " (alpha = " +
                             std::to_string(alpha) + ")");
    }
    if (!crossed)
        throw ShootError(ShootError::Kind::NoZero,
                         "no zero of v before r_max = " + std::to_string(opts.r_max) +
                             " (f too weak or r_max too small)");

    // refine R by bisection on the dense output of the crossing step
    {
        double lo = cross_seg.t0, hi = cross_seg.t0 + cross_seg.h;
        double vlo = cross_seg.at(lo)[0];
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            double vm = cross_seg.at(mid)[0];
            if (std::abs(vm) <= opts.tol_zero && i >= 40) { lo = hi = mid; break; }
            if ((vm > 0.0) == (vlo > 0.0)) { lo = mid; vlo = vm; }
            else hi = mid;
            if (hi - lo <= 1e-18 * hi) break;
        }
        p.R = 0.5 * (lo + hi);
    }
    p.zero_found = true;
    p.lambda = p.R * p.R;

    // drop nodes past R, then re-anchor the last node at R itself
    while (!p.grid.empty() && p.grid.back() > p.R) {
        p.grid.pop_back();
        p.v.pop_back();
        p.vp.pop_back();
    }
    auto yR = cross_seg.at(p.R);
    p.grid.push_back(p.R);
    p.v.push_back(yR[0]);
    p.vp.push_back(yR[1]);

    if (opts.extend_factor > 1.0) {
        double r_end = opts.extend_factor * p.R;
        rk::State<2> ye = yR;
        try {
            rk::integrate<2>(rhs, p.R, ye, r_end, ctl,
                             [&](double r, const rk::State<2>& yn,
                                 const rk::DenseOutput<2>& dense) {
                                 p.segments_.push_back(dense);
                                 p.grid.push_back(r);
                                 p.v.push_back(yn[0]);
                                 p.vp.push_back(yn[1]);
                                 return true;
                             });
            p.extended = true;
        } catch (const rk::StepUnderflow& e) {
            throw ShootError(ShootError::Kind::StepUnderflow,
                             "step underflow while extending at r = " + std::to_string(e.t));
        }
    }
    return p;
}

std::vector<CurveSample> first_zero_curve(const NonlinearitySpec& spec,
                                          const std::vector<double>& alphas,
                                          const ShootOptions& opts) {
    std::vector<CurveSample> out(alphas.size());
    parallel_for(alphas.size(), [&](std::size_t i) {
        out[i].alpha = alphas[i];
        try {
            out[i].lambda = shoot(spec, alphas[i], opts).lambda;
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

Profile profile_u(const Profile& p) {
    if (!p.zero_found)
        throw ShootError(ShootError::Kind::NotApplicable, "profile has no first zero");
    Profile q = p;
    q.u_coords = true;
    q.grid.clear();
    q.v.clear();
    q.vp.clear();
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
        double s = p.grid[i] / p.R;
        if (s > 1.0) break;
        q.grid.push_back(s);
        q.v.push_back(p.v[i]);
        q.vp.push_back(p.vp[i] * p.R);
    }
    return q;
}

}  // namespace gelfand
