#pragma once

// Exact solution of dv/dt = M v - w through the augmented exponential
//   exp(t [[M, -w], [0, 0]]) (v0, 1),
// which needs no invertibility of M, and the stationary solve M v = w.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qfb/errors.hpp"
#include "qfb/expm.hpp"
#include "qfb/liouville.hpp"
#include "qfb/qstate.hpp"

namespace qfb {

using Matrix16 = Eigen::Matrix<double, 16, 16>;

/// v(t + dt) = transfer * v(t) + shift.
struct AffineStep {
    Matrix15 transfer = Matrix15::Identity();
    Vector15 shift = Vector15::Zero();

    Vector15 apply(const Vector15& v) const { return transfer * v + shift; }
};

inline AffineStep step_propagator(const AffineGenerator& g, double dt) {
    if (!(dt >= 0.0)) throw ValidationError("propagate: negative time " + std::to_string(dt));
    Matrix16 aug = Matrix16::Zero();
    aug.topLeftCorner<15, 15>() = g.M * dt;
    aug.topRightCorner<15, 1>() = -g.w * dt;
    const Matrix16 e = expm(aug);
    return {e.topLeftCorner<15, 15>(), e.topRightCorner<15, 1>()};
}

inline CoherenceVector evolve(const AffineGenerator& g, const CoherenceVector& v0, double t) {
    if (!(t >= 0.0)) throw ValidationError("evolve: negative time " + std::to_string(t));
    if (t == 0.0) return v0;
    return {step_propagator(g, t).apply(v0.v)};
}

struct Trajectory {
    std::vector<double> times;
    std::vector<CoherenceVector> states;
};

inline void validate_times(std::span<const double> times) {
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0)) throw ValidationError("times: negative or non-finite entry");
        if (k > 0 && !(times[k] > times[k - 1])) throw ValidationError("times: not strictly increasing");
    }
}

/// True when times[k] = times[0] + k * (times[1] - times[0]) up to roundoff.
inline bool is_uniform_grid(std::span<const double> times) {
    if (times.size() < 3) return times.size() == 2;
    const double dt = times[1] - times[0];
    for (std::size_t k = 2; k < times.size(); ++k) {
        const double expected = times[0] + static_cast<double>(k) * dt;
        if (std::abs(times[k] - expected) > 1e-12 * (1.0 + std::abs(expected))) return false;
    }
    return true;
}

inline Trajectory trajectory(const AffineGenerator& g, const CoherenceVector& v0,
                             std::span<const double> times) {
    validate_times(times);
    Trajectory out;
    out.times.assign(times.begin(), times.end());
    out.states.reserve(times.size());
    if (times.empty()) return out;

    if (is_uniform_grid(times)) {
        const AffineStep step = step_propagator(g, times[1] - times[0]);
        CoherenceVector v = evolve(g, v0, times[0]);
        out.states.push_back(v);
        for (std::size_t k = 1; k < times.size(); ++k) {
            v.v = step.apply(v.v);
            out.states.push_back(v);
        }
    } else {
        for (double t : times) out.states.push_back(evolve(g, v0, t));
    }
    return out;
}

/// Condition threshold above which the stationary state is reported as non-unique.
inline constexpr double kMaxSteadyCondition = 1e12;
inline constexpr double kSteadyResidual = 1e-10;

/// Solves M v = w by LU with partial pivoting and one refinement step.
/// Throws SteadyStateError for singular or ill-conditioned M.
inline CoherenceVector steady_state(const AffineGenerator& g) {
    const Eigen::PartialPivLU<Matrix15> lu(g.M);
    const double rcond = lu.rcond();
    if (!(rcond * kMaxSteadyCondition >= 1.0))
        throw SteadyStateError("steady state: non-unique or ill-conditioned (rcond " +
                               std::to_string(rcond) + ")");
    Vector15 v = lu.solve(g.w);
    v += lu.solve(g.w - g.M * v);
    const double residual = (g.M * v - g.w).cwiseAbs().maxCoeff();
    if (!(residual < kSteadyResidual))
        throw SteadyStateError("steady state: residual " + std::to_string(residual) +
                               " above tolerance");
    return {v};
}

inline void write_full_precision(std::ostream& os, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t";
    for (const char* name : kCoordNames) os << ',' << name;
    os << '\n';
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        write_full_precision(os, tr.times[k]);
        for (int c = 0; c < kCoordinates; ++c) {
            os << ',';
            write_full_precision(os, tr.states[k][c]);
        }
        os << '\n';
    }
}

} // namespace qfb
