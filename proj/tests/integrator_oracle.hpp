#pragma once

// Independent reference propagation: adaptive Dormand-Prince integration of
// the master equation on the full 4x4 matrix, never touching M or w.

#include <array>

#include <boost/numeric/odeint.hpp>

#include "qfb/liouville.hpp"
#include "qfb/qstate.hpp"

namespace qfb::testing {

using OdeState = std::array<double, 32>;

inline OdeState pack(const Matrix4c& m) {
    OdeState s;
    for (int k = 0; k < 16; ++k) {
        s[2 * k] = m.data()[k].real();
        s[2 * k + 1] = m.data()[k].imag();
    }
    return s;
}

inline Matrix4c unpack(const OdeState& s) {
    Matrix4c m;
    for (int k = 0; k < 16; ++k) m.data()[k] = Complex(s[2 * k], s[2 * k + 1]);
    return m;
}

inline Matrix4c integrate_master_equation(const ModelParams& model, const FeedbackParams& fb,
                                          const Matrix4c& rho0, double t, double tol = 1e-13) {
    namespace ode = boost::numeric::odeint;
    OdeState s = pack(rho0);
    if (t == 0.0) return rho0;
    auto rhs = [&](const OdeState& x, OdeState& dx, double) {
        dx = pack(master_equation_rhs(model, fb, unpack(x)));
    };
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<OdeState>>(tol, tol), rhs,
                            s, 0.0, t, 1e-3);
    return unpack(s);
}

} // namespace qfb::testing
