#ifndef GELFAND_SHOOT_HPP
#define GELFAND_SHOOT_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gelfand/nonlinearity.hpp"
#include "gelfand/rk.hpp"

// Shooting for v'' + v'/r + f(v) = 0, v(0) = alpha, v'(0) = 0. The first
// zero R(alpha) gives lambda(alpha) = R^2 under u(s) = v(s R).

namespace gelfand {

struct ShootError : std::runtime_error {
    enum class Kind { OverflowCap, NoZero, StepUnderflow, NotApplicable };
    Kind kind;
    ShootError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ShootOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double tol_zero = 1e-12;      // |v(R)| tolerance for the zero refinement
    double r_max = 50.0;          // give up if no zero before this radius
    double log_f_cap = 700.0;     // reject alpha with log f(alpha) above this
    double extend_factor = 0.0;   // > 1: continue integration to extend_factor * R
};

// One radial shot. Grid nodes are the accepted integrator steps; dense
// segments give C^1 interpolation anywhere in between. In u-coordinates the
// grid is s = r/R in (0, 1] and samples are u(s) = v(sR), u'(s) = R v'(sR).
class Profile {
public:
    double alpha = 0.0;
    std::vector<double> grid;     // radii (or s values once in u-coordinates)
    std::vector<double> v, vp;
    bool zero_found = false;
    double R = 0.0;
    double lambda = 0.0;
    bool extended = false;
    bool u_coords = false;

    double value(double r) const;        // v(r), or u(s) in u-coordinates
    double derivative(double r) const;   // v'(r), or u'(s)

    double r_first() const { return u_coords ? grid_start_ / R : grid_start_; }

private:
    friend Profile shoot(const NonlinearitySpec&, double, const ShootOptions&);
    friend Profile profile_u(const Profile&);

    double eval_v(double r, int derivative_order) const;
    std::vector<rk::DenseOutput<2>> segments_;
    double grid_start_ = 0.0;    // series start h0; below it the Taylor seed applies
    double series_f_alpha_ = 0.0;
};

// Integrates from the series start and refines the first zero by bisection
// on the dense output. Throws ShootError on the named failure modes.
Profile shoot(const NonlinearitySpec& spec, double alpha, const ShootOptions& opts = {});

struct CurveSample {
    double alpha = 0.0;
    std::optional<double> lambda;   // empty on failure
    std::string error;              // failure note, empty on success
};

// Maps shoot over alphas in parallel, preserving order; per-alpha failures
// are recorded inline rather than aborting the batch.
std::vector<CurveSample> first_zero_curve(const NonlinearitySpec& spec,
                                          const std::vector<double>& alphas,
                                          const ShootOptions& opts = {});

// Rescale to the unit disk: s = r/R, u(s) = v(sR).
Profile profile_u(const Profile& p);

}  // namespace gelfand

#endif
