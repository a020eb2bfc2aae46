#ifndef GELFAND_NONLINEARITY_HPP
#define GELFAND_NONLINEARITY_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gelfand/expr.hpp"

// Nonlinearities f(u) with their derivatives, the integral ratio rho = F/f
// (F = int_0^u f), and the supercriticality constant A = limsup (F logF / f)'.
// Everything F-dependent is computed through the ratio ODE
//     rho' = 1 - rho f'/f,   (logF)' = 1/rho,
// so doubly-exponential f never overflows.

namespace gelfand {

struct ConditionViolation : std::runtime_error {
    std::string condition;   // "f1" or "f2"
    double witness_u;
    ConditionViolation(std::string cond, double u, const std::string& detail)
        : std::runtime_error("condition (" + cond + ") violated at u = " + std::to_string(u) +
                             ": " + detail),
          condition(std::move(cond)), witness_u(u) {}
};

struct RatioError : std::runtime_error {
    double u;
    RatioError(const std::string& msg, double u_)
        : std::runtime_error(msg + " at u = " + std::to_string(u_)), u(u_) {}
};

class NonlinearitySpec {
public:
    // Conditions (f1)/(f2) are sampled on a log-spaced grid at build time.
    // Asymptotic mode skips them and bases F at u = 1 instead of u = 0;
    // it exists for Example-2.1-style families (u^k e^{u^p} with k != 0)
    // whose behavior at the origin falls outside (f1)/(f2) but whose
    // asymptotics are still meaningful.
    enum class Mode { Strict, Asymptotic };

    double f(double u) const { return expr::eval(f_, u); }
    double fprime(double u) const { return expr::eval(fp_, u); }
    double fsecond(double u) const { return expr::eval(fpp_, u); }

    // log f(u); -inf when f(u) == 0
    double log_f(double u) const;

    // phi = f'/f = (log f)', and phi' = f''/f - phi^2, both via log-domain
    // evaluation so they stay finite where f overflows
    double fprime_over_f(double u) const;
    double dfprime_over_f(double u) const;

    double f0() const { return f0_; }
    double fp0() const { return fp0_; }
    double ratio_base() const { return base_; }    // lower limit of F
    bool conditions_checked() const { return checked_; }
    const std::string& name() const { return name_; }
    const expr::Expr& expression() const { return f_; }
    const expr::Expr& derivative() const { return fp_; }
    const expr::Expr& second_derivative() const { return fpp_; }

    // largest u with log f(u) <= log_cap (+inf when f never reaches it)
    double alpha_cap(double log_cap = 700.0) const;

private:
    friend NonlinearitySpec build_spec(expr::Expr f, Mode mode, std::string name);
    NonlinearitySpec() = default;

    expr::Expr f_, fp_, fpp_;
    double f0_ = 0.0, fp0_ = 0.0;
    double base_ = 0.0;
    bool checked_ = false;
    std::string name_;
};

// Wraps an expression, attaches symbolic f' and f'', verifies (f1)/(f2).
// Throws ConditionViolation with the witness u on failure.
NonlinearitySpec build_spec(expr::Expr f, NonlinearitySpec::Mode mode = NonlinearitySpec::Mode::Strict,
                            std::string name = "");
NonlinearitySpec build_spec(const std::string& expression_text,
                            NonlinearitySpec::Mode mode = NonlinearitySpec::Mode::Strict);

// Registry: "exp_pow" (u^k e^{c u^p}; k,c,p), "exp" (e^u), "double_exp"
// (e^{e^u}), "power_shift" ((1+u)^p; p), "exp_pow_log" (e^{u^p log(e+u)^k};
// p,k). Unknown names or missing parameters throw std::invalid_argument.
NonlinearitySpec builtin_family(const std::string& name,
                                const std::map<std::string, double>& params = {});
std::vector<std::string> builtin_family_names();

// One point of the ratio ODE; drho_du carries rho' = 1 - rho f'/f as its own
// integrated state, which keeps 1 - rho f'/f fully significant where the
// product is within rounding of 1.
struct RatioState {
    double u = 0.0;
    double rho = 0.0;       // F(u)/f(u)
    double logF = 0.0;      // log F(u)
    double drho_du = 0.0;   // d(F/f)/du = 1 - rho f'/f
};

// Seed near the base point by Taylor expansion of F/f.
RatioState init_ratio(const NonlinearitySpec& spec, double u_start);

struct RatioOptions {
    double rtol = 1e-11;
    double atol = 1e-20;
};

// Advance the ratio ODE from state.u to u_next (integrdated in log u).
RatioState advance_ratio(const NonlinearitySpec& spec, const RatioState& state, double u_next,
                         const RatioOptions& opts = {});

// Dense table of (u, rho, logF) with cubic-Hermite lookup; node derivatives
// come from the ODE right-hand side, so interpolation is locally quartic.
class RatioTable {
public:
    static RatioTable build(const NonlinearitySpec& spec, double u_hi, double logF_cap = 1e8,
                            const RatioOptions& opts = {});

    double rho(double u) const;
    double logF(double u) const;
    double drho_du(double u) const;
    double u_min() const { return u_.front(); }
    double u_max() const { return u_.back(); }
    const std::vector<double>& nodes() const { return u_; }

private:
    std::size_t segment(double u) const;
    std::vector<double> u_, rho_, logF_, drho_;
};

struct SupercritReport {
    double A_est = 0.0;            // max of g' over the upper half-window
    double p = 0.0;                // margin exponent, A_est < p < 1/2; NaN if none
    double u0 = 0.0;               // threshold: logF > 0 and g' < p from here on; NaN if none
    bool is_supercritical = false;
    bool inconclusive = false;     // g' still trending at the window end
    double trend_slope = 0.0;      // d g' / d log u over the last quarter
    double margin = 0.0;
    double window_lo = 0.0, window_hi = 0.0;   // effective window (may be truncated)
    std::vector<std::pair<double, double>> samples;   // (u, g'(u))
};

struct SupercritOptions {
    int n_samples = 160;
    double margin = 0.02;          // supercritical iff A_est < 1/2 - margin
    double trend_tol = 0.01;       // |slope| above this flags "inconclusive"
    double logF_cap = 1e8;         // stiffness guard: sampling stops past this
    RatioOptions ratio;
};

// Evaluates g'(u) = 1 + logF (1 - rho f'/f) on log-spaced samples and takes
// the max over the upper half of the (possibly truncated) window as the
// limsup proxy.
SupercritReport estimate_A(const NonlinearitySpec& spec, std::pair<double, double> u_window,
                           const SupercritOptions& opts = {});

// Family-aware default window: [1,50], shrunk to [1,12] for doubly
// exponential growth (log f(8) > 1000).
std::pair<double, double> default_A_window(const NonlinearitySpec& spec);

struct Lemma22Check {
    bool applicable = false;        // report was supercritical
    double c1 = 0.0;                // largest c1 with logF(u) >= (c1 u)^{1/p} on [u0, end]
    bool fit_ok = false;            // exponent matches (min not escaping at the window end)
    bool rho_nonincreasing = false;
    double max_rho_increase = 0.0;
    std::vector<std::pair<double, double>> residuals;   // (u, logF(u)^p / u)
};

// Fits c1 in the Lemma growth bound F(u) >= e^{(c1 u)^{1/p}} and checks
// (F/f)' <= 0 beyond u0.
Lemma22Check check_lemma22(const NonlinearitySpec& spec, const SupercritReport& report,
                           const SupercritOptions& opts = {});

}  // namespace gelfand

#endif
