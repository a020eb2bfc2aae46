#include "gelfand/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gelfand/rk.hpp"

namespace gelfand {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> out(n);
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
        out[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

void check_conditions(const expr::Expr& f, const expr::Expr& fp, const expr::Expr& fpp,
                      double f0, double fp0) {
    if (!(f0 >= 0.0))
        throw ConditionViolation("f1", 0.0, "f(0) = " + std::to_string(f0) + " < 0");
    if (f0 == 0.0 && !(fp0 > 0.0))
        throw ConditionViolation("f2", 0.0, "f(0) = 0 but f'(0) = " + std::to_string(fp0));

    // sample up to the overflow region; +inf from overflow still satisfies >= 0
    double u_hi = 1e4;
    {
        double lo = 1e-6, hi = 1e4;
        auto logf = [&](double u) { return expr::eval_signed_log(f, u).log_abs; };
        if (logf(hi) > 680.0) {
            for (int i = 0; i < 80; ++i) {
                double mid = std::sqrt(lo * hi);
                (logf(mid) > 680.0 ? hi : lo) = mid;
            }
            u_hi = lo;
        }
    }
    std::vector<double> grid = log_spaced(1e-6, u_hi, 96);
    grid.insert(grid.begin(), 0.0);
    for (double u : grid) {
        double fv = expr::eval(f, u);
        double fpv = expr::eval(fp, u);
        double fppv = expr::eval(fpp, u);
        if (std::isnan(fv) || fv < 0.0)
            throw ConditionViolation("f1", u, "f < 0 or non-finite");
        if (std::isnan(fpv) || fpv < -1e-12 * (1.0 + std::abs(fv)))
            throw ConditionViolation("f1", u, "f' < 0");
        if (std::isnan(fppv) || fppv < -1e-9 * (1.0 + std::abs(fpv)))
            throw ConditionViolation("f1", u, "f'' < 0");
    }
}

}  // namespace

double NonlinearitySpec::log_f(double u) const {
    auto sl = expr::eval_signed_log(f_, u);
    if (sl.sign < 0)
        throw RatioError("f(u) < 0 in log_f", u);
    return sl.sign == 0 ? -kInf : sl.log_abs;
}

double NonlinearitySpec::fprime_over_f(double u) const {
    auto lf = expr::eval_signed_log(f_, u);
    auto lfp = expr::eval_signed_log(fp_, u);
    if (lf.sign <= 0)
        throw RatioError("f(u) <= 0 in f'/f", u);
    if (lfp.sign == 0) return 0.0;
    return lfp.sign * std::exp(lfp.log_abs - lf.log_abs);
}

double NonlinearitySpec::dfprime_over_f(double u) const {
    auto lf = expr::eval_signed_log(f_, u);
    auto lfpp = expr::eval_signed_log(fpp_, u);
    if (lf.sign <= 0)
        throw RatioError("f(u) <= 0 in f''/f", u);
    double fpp_over_f = lfpp.sign == 0 ? 0.0 : lfpp.sign * std::exp(lfpp.log_abs - lf.log_abs);
    double phi = fprime_over_f(u);
    return fpp_over_f - phi * phi;
}

double NonlinearitySpec::alpha_cap(double log_cap) const {
    auto lf = [&](double u) { return expr::eval_signed_log(f_, u).log_abs; };
    if (lf(1e6) <= log_cap) return kInf;
    double lo = 1e-6, hi = 1e6;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (lf(mid) <= log_cap ? lo : hi) = mid;
    }
    return lo;
}

NonlinearitySpec build_spec(expr::Expr f, NonlinearitySpec::Mode mode, std::string name) {
    NonlinearitySpec spec;
    spec.f_ = expr::simplify(f);
    spec.fp_ = expr::differentiate(spec.f_);
    spec.fpp_ = expr::differentiate(spec.fp_);
    spec.name_ = name.empty() ? expr::to_string(spec.f_) : std::move(name);
    if (mode == NonlinearitySpec::Mode::Strict) {
        spec.f0_ = expr::eval(spec.f_, 0.0);
        spec.fp0_ = expr::eval(spec.fp_, 0.0);
        check_conditions(spec.f_, spec.fp_, spec.fpp_, spec.f0_, spec.fp0_);
        spec.checked_ = true;
        spec.base_ = 0.0;
    } else {
        spec.checked_ = false;
        spec.base_ = 1.0;                       // F measured from u = 1
        spec.f0_ = expr::eval(spec.f_, 1.0);
        spec.fp0_ = expr::eval(spec.fp_, 1.0);
    }
    return spec;
}

NonlinearitySpec build_spec(const std::string& expression_text, NonlinearitySpec::Mode mode) {
    return build_spec(expr::parse(expression_text), mode);
}

// ------------------------------------------------------------------ registry

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double dflt,
             bool required = false) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (required) throw std::invalid_argument("missing family parameter '" + key + "'");
    return dflt;
}

}  // namespace

NonlinearitySpec builtin_family(const std::string& name,
                                const std::map<std::string, double>& params) {
    using namespace expr;
    const Expr u = variable();
    if (name == "exp") {
        return build_spec(make(NodeKind::Exp, u), NonlinearitySpec::Mode::Strict, "exp");
    }
    if (name == "double_exp") {
        return build_spec(make(NodeKind::Exp, make(NodeKind::Exp, u)),
                          NonlinearitySpec::Mode::Strict, "double_exp");
    }
    if (name == "exp_pow") {
        double k = param(params, "k", 0.0);
        double c = param(params, "c", 1.0);
        double p = param(params, "p", 3.0);
        Expr body = make(NodeKind::Mul, constant(c), make(NodeKind::Pow, u, constant(p)));
        Expr e = make(NodeKind::Mul, make(NodeKind::Pow, u, constant(k)),
                      make(NodeKind::Exp, body));
        // k != 0 puts the origin outside (f1)/(f2); only the asymptotics count
        auto mode = k == 0.0 ? NonlinearitySpec::Mode::Strict : NonlinearitySpec::Mode::Asymptotic;
        return build_spec(e, mode, "exp_pow");
    }
    if (name == "power_shift") {
        double p = param(params, "p", 3.0);
        Expr e = make(NodeKind::Pow, make(NodeKind::Add, constant(1.0), u), constant(p));
        return build_spec(e, NonlinearitySpec::Mode::Strict, "power_shift");
    }
    if (name == "exp_pow_log") {
        double p = param(params, "p", 3.0);
        double k = param(params, "k", 1.0);
        Expr lg = make(NodeKind::Log, make(NodeKind::Add, constant(std::exp(1.0)), u));
        Expr body = make(NodeKind::Mul, make(NodeKind::Pow, u, constant(p)),
                         make(NodeKind::Pow, lg, constant(k)));
        return build_spec(make(NodeKind::Exp, body), NonlinearitySpec::Mode::Strict,
                          "exp_pow_log");
    }
    throw std::invalid_argument("unknown nonlinearity family '" + name + "'");
}

std::vector<std::string> builtin_family_names() {
    return {"exp", "double_exp", "exp_pow", "power_shift", "exp_pow_log"};
}

// ----------------------------------------------------------------- ratio ODE

RatioState init_ratio(const NonlinearitySpec& spec, double u_start) {
    double base = spec.ratio_base();
    double eps = u_start - base;
    if (!(eps > 0.0))
        throw RatioError("u_start must exceed the ratio base " + std::to_string(base), u_start);

    RatioState s;
    s.u = u_start;
    double fb = spec.f0();
    double fpb = spec.fp0();
    if (fb > 0.0) {
        double c = eps * fpb / (2.0 * fb);
        s.rho = eps * (1.0 - c);
        s.logF = std::log(fb * eps) + std::log1p(c);
    } else if (fpb > 0.0) {
        // f ~ f'(0) u near 0, so F/f ~ u/2
        s.rho = 0.5 * eps;
        s.logF = std::log(0.5 * fpb) + 2.0 * std::log(eps);
    } else {
        throw ConditionViolation("f2", base, "f and f' both vanish at the base point");
    }
    s.drho_du = 1.0 - s.rho * spec.fprime_over_f(u_start);
    return s;
}

RatioState advance_ratio(const NonlinearitySpec& spec, const RatioState& state, double u_next,
                         const RatioOptions& opts) {
    if (!(u_next > state.u))
        throw RatioError("advance_ratio requires u_next > state.u", u_next);

    // integrate in tau = log u; D = rho' rides along to dodge the
    // 1 - rho f'/f cancellation
    auto rhs = [&spec](double tau, const rk::State<3>& y) -> rk::State<3> {
        double u = std::exp(tau);
        double rho = y[0], D = y[2];
        double phi = spec.fprime_over_f(u);
        double dphi = spec.dfprime_over_f(u);
        return {u * D, u / rho, u * (-D * phi - rho * dphi)};
    };

    rk::StepControl ctl;
    ctl.rtol = opts.rtol;
    ctl.atol = opts.atol;
    ctl.h_init = 1e-3;
    rk::State<3> y{state.rho, state.logF, state.drho_du};
    RatioState out = state;
    try {
        rk::integrate<3>(rhs, std::log(state.u), y, std::log(u_next), ctl,
                         [&](double, const rk::State<3>& yn, const rk::DenseOutput<3>&) {
                             y = yn;
                             return true;
                         });
    } catch (const rk::StepUnderflow& e) {
        throw RatioError("ratio ODE stiffness failure (step underflow)", std::exp(e.t));
    }
    out.u = u_next;
    out.rho = y[0];
    out.logF = y[1];
    out.drho_du = y[2];
    return out;
}

// ---------------------------------------------------------------- RatioTable

RatioTable RatioTable::build(const NonlinearitySpec& spec, double u_hi, double logF_cap,
                             const RatioOptions& opts) {
    double u_start = spec.ratio_base() + 1e-8;
    RatioState s0 = init_ratio(spec, u_start);

    RatioTable t;
    t.u_.push_back(s0.u);
    t.rho_.push_back(s0.rho);
    t.logF_.push_back(s0.logF);
    t.drho_.push_back(s0.drho_du);

    auto rhs = [&spec](double tau, const rk::State<3>& y) -> rk::State<3> {
        double u = std::exp(tau);
        double rho = y[0], D = y[2];
        double phi = spec.fprime_over_f(u);
        double dphi = spec.dfprime_over_f(u);
        return {u * D, u / rho, u * (-D * phi - rho * dphi)};
    };
    rk::StepControl ctl;
    ctl.rtol = opts.rtol;
    ctl.atol = opts.atol;
    ctl.h_init = 1e-3;
    ctl.h_max = 0.05;    // keep nodes dense enough for interpolation lookups
    rk::State<3> y{s0.rho, s0.logF, s0.drho_du};
    try {
        rk::integrate<3>(rhs, std::log(u_start), y, std::log(u_hi), ctl,
                         [&](double tau, const rk::State<3>& yn, const rk::DenseOutput<3>&) {
                             t.u_.push_back(std::exp(tau));
                             t.rho_.push_back(yn[0]);
                             t.logF_.push_back(yn[1]);
                             t.drho_.push_back(yn[2]);
                             return yn[1] < logF_cap;
                         });
    } catch (const rk::StepUnderflow& e) {
        throw RatioError("ratio table build hit stiffness", std::exp(e.t));
    }
    return t;
}

std::size_t RatioTable::segment(double u) const {
    if (u < u_.front() || u > u_.back() * (1.0 + 1e-12))
        throw RatioError("value outside the ratio table range [" + std::to_string(u_.front()) +
                             ", " + std::to_string(u_.back()) + "]",
                         u);
    auto it = std::upper_bound(u_.begin(), u_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - u_.begin());
    if (i == 0) return 0;
    if (i >= u_.size()) return u_.size() - 2;
    return i - 1;
}

namespace {

// cubic Hermite on [x0,x1] with values y and slopes m
double hermite(double x, double x0, double x1, double y0, double y1, double m0, double m1) {
    double h = x1 - x0;
    double t = (x - x0) / h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

}  // namespace

double RatioTable::rho(double u) const {
    std::size_t i = segment(u);
    return hermite(u, u_[i], u_[i + 1], rho_[i], rho_[i + 1], drho_[i], drho_[i + 1]);
}

double RatioTable::logF(double u) const {
    std::size_t i = segment(u);
    return hermite(u, u_[i], u_[i + 1], logF_[i], logF_[i + 1], 1.0 / rho_[i], 1.0 / rho_[i + 1]);
}

double RatioTable::drho_du(double u) const {
    std::size_t i = segment(u);
    double t = (u - u_[i]) / (u_[i + 1] - u_[i]);
    return drho_[i] + (drho_[i + 1] - drho_[i]) * t;
}

// ---------------------------------------------------------------- estimate_A

SupercritReport estimate_A(const NonlinearitySpec& spec, std::pair<double, double> u_window,
                           const SupercritOptions& opts) {
    SupercritReport rep;
    rep.margin = opts.margin;
    rep.window_lo = u_window.first;
    rep.window_hi = u_window.second;
    rep.p = kNaN;
    rep.u0 = kNaN;

    std::vector<double> us = log_spaced(u_window.first, u_window.second, opts.n_samples);
    std::vector<double> logFs, rhos;
    RatioState s = init_ratio(spec, spec.ratio_base() + 1e-8);
    double reached = u_window.second;
    for (double u : us) {
        try {
            s = advance_ratio(spec, s, u, opts.ratio);
        } catch (const RatioError&) {
            reached = s.u;
            break;
        }
        rep.samples.emplace_back(u, 1.0 + s.logF * s.drho_du);
        logFs.push_back(s.logF);
        rhos.push_back(s.rho);
        if (s.logF > opts.logF_cap) {
            reached = u;   // stiffness guard: window truncates here
            break;
        }
    }
    rep.window_hi = reached < u_window.second ? reached : u_window.second;
    if (rep.samples.size() < 8)
        throw RatioError("supercriticality window too short", rep.window_hi);

    // limsup proxy: max over the upper half of the effective window
    double mid = 0.5 * (u_window.first + rep.window_hi);
    double A = -kInf;
    for (auto& [u, g] : rep.samples)
        if (u >= mid) A = std::max(A, g);
    rep.A_est = A;

    // trend of g' vs log u over the last quarter
    {
        double q = u_window.first + 0.75 * (rep.window_hi - u_window.first);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (auto& [u, g] : rep.samples) {
            if (u < q) continue;
            double x = std::log(u);
            sx += x; sy += g; sxx += x * x; sxy += x * g;
            ++n;
        }
        rep.trend_slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : kInf;
    }
    rep.inconclusive = !(std::abs(rep.trend_slope) <= opts.trend_tol);
    rep.is_supercritical = !rep.inconclusive && rep.A_est < 0.5 - opts.margin;

    if (rep.is_supercritical) {
        rep.p = std::min(0.5 * (rep.A_est + 0.5), 0.5 - opts.margin);
        // smallest sample from which logF > 0 and g' < p hold through the end
        std::size_t first_ok = rep.samples.size();
        for (std::size_t i = rep.samples.size(); i-- > 0;) {
            if (logFs[i] > 0.0 && rep.samples[i].second < rep.p)
                first_ok = i;
            else
                break;
        }
        if (first_ok < rep.samples.size())
            rep.u0 = rep.samples[first_ok].first;
    }
    return rep;
}

std::pair<double, double> default_A_window(const NonlinearitySpec& spec) {
    double lf8;
    try {
        lf8 = expr::eval_signed_log(spec.expression(), 8.0).log_abs;
    } catch (const expr::EvalError&) {
        lf8 = 0.0;
    }
    if (lf8 > 1000.0) return {1.0, 12.0};   // doubly exponential growth
    return {1.0, 50.0};
}

Lemma22Check check_lemma22(const NonlinearitySpec& spec, const SupercritReport& report,
                           const SupercritOptions& opts) {
    Lemma22Check chk;
    chk.applicable = report.is_supercritical && std::isfinite(report.u0);
    if (!chk.applicable) return chk;

    std::vector<double> us = log_spaced(report.u0, report.window_hi, 200);
    RatioState s = init_ratio(spec, spec.ratio_base() + 1e-8);
    s = advance_ratio(spec, s, report.u0, opts.ratio);

    double c1 = kInf;
    std::size_t argmin = 0;
    double prev_rho = s.rho;
    chk.max_rho_increase = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        if (i > 0) s = advance_ratio(spec, s, us[i], opts.ratio);
        double resid = std::pow(s.logF, report.p) / us[i];
        chk.residuals.emplace_back(us[i], resid);
        if (resid < c1) { c1 = resid; argmin = i; }
        chk.max_rho_increase = std::max(chk.max_rho_increase, s.rho - prev_rho);
        prev_rho = s.rho;
    }
    chk.c1 = c1;
    chk.fit_ok = c1 > 0.0 && argmin + 1 < us.size();   // min escaping at the end = mismatch
    chk.rho_nonincreasing = chk.max_rho_increase <= 1e-12 * (1.0 + std::abs(prev_rho));
    return chk;
}

}  // namespace gelfand
