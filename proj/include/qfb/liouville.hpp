#pragma once

// Affine generator of the feedback-controlled master equation
//
//   d rho/dt = -i[H, rho] + D[U_1 s_1] rho + D[U_2 s_2] rho,
//   H = drive (Y_1 + Y_2) + 2 coupling Z_1 Z_2,
//
// written in coherence coordinates as dv/dt = M v - w. Two independent
// constructions are provided: a positional closed form (`build_generator`)
// and a brute-force projection of the full 16x16 superoperator
// (`oracle_generator`).

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "qfb/errors.hpp"
#include "qfb/qstate.hpp"

namespace qfb {

using Matrix15 = Eigen::Matrix<double, 15, 15>;
using Matrix16c = Eigen::Matrix<Complex, 16, 16>;
using Matrix2c = Eigen::Matrix<Complex, 2, 2>;

/// Euler angles of one local feedback unitary exp(-i F).
struct EulerAngles {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

struct FeedbackParams {
    std::array<EulerAngles, 2> qubit{};

    static FeedbackParams none() { return {}; }

    /// gamma_1 = gamma_2 = 0; the generator does not depend on them.
    static FeedbackParams from_alpha_beta(double a1, double b1, double a2, double b2) {
        FeedbackParams p;
        p.qubit[0] = {a1, b1, 0.0};
        p.qubit[1] = {a2, b2, 0.0};
        return p;
    }

    friend bool operator==(const FeedbackParams&, const FeedbackParams&) = default;
};

/// Feedback-modified jump operator U s = a |1><1| + b |0><1| of one qubit and
/// the real combinations entering the generator.
struct QubitAmplitudes {
    Complex a;      // weight on |1><1|
    Complex b;      // weight on |0><1|
    double re_ab;   // Re[a b*]
    double im_ab;   // Im[a b*]
    double chi;     // -(3/2 - |a|^2)
};

using FeedbackAmplitudes = std::array<QubitAmplitudes, 2>;

enum class Scenario { Preserve, Stabilize };

struct ModelParams {
    double drive = 0.0;    // amplitude of the local Y drive, in units of the decay rate
    double coupling = 0.0; // ZZ interaction strength J
    Scenario scenario = Scenario::Preserve;

    static ModelParams preserve(double drive) { return {drive, 0.0, Scenario::Preserve}; }
    static ModelParams stabilize(double drive, double coupling) {
        return {drive, coupling, Scenario::Stabilize};
    }
};

struct AffineGenerator {
    Matrix15 M = Matrix15::Zero();
    Vector15 w = Vector15::Zero();
};

inline void validate(const ModelParams& m) {
    if (!std::isfinite(m.drive) || !std::isfinite(m.coupling))
        throw ValidationError("model: non-finite drive or coupling");
    if (m.scenario == Scenario::Preserve && m.coupling != 0.0)
        throw ValidationError("model: preservation scenario requires zero coupling");
}

inline void validate(const FeedbackParams& p) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int q = 0; q < 2; ++q) {
        for (double x : {p.qubit[q].alpha, p.qubit[q].beta, p.qubit[q].gamma}) {
            if (!(x >= 0.0 && x <= two_pi))
                throw ValidationError("feedback: angle of qubit " + std::to_string(q + 1) +
                                      " outside [0, 2 pi]");
        }
    }
}

inline QubitAmplitudes qubit_amplitudes(const EulerAngles& e) {
    QubitAmplitudes q;
    q.a = -std::polar(1.0, -(e.alpha - e.gamma) / 2.0) * std::sin(e.beta / 2.0);
    q.b = std::polar(1.0, (e.alpha + e.gamma) / 2.0) * std::cos(e.beta / 2.0);
    const Complex ab = q.a * std::conj(q.b);
    q.re_ab = ab.real();
    q.im_ab = ab.imag();
    q.chi = -(1.5 - std::norm(q.a));
    return q;
}

inline FeedbackAmplitudes feedback_amplitudes(const FeedbackParams& p) {
    validate(p);
    return {qubit_amplitudes(p.qubit[0]), qubit_amplitudes(p.qubit[1])};
}

/// Closed-form generator, entry by entry. Rows and columns follow the
/// coherence-vector order (A, BR, BI, ..., IR, II).
inline AffineGenerator generator_from_amplitudes(const ModelParams& model, const FeedbackAmplitudes& amp) {
    validate(model);

    const double a = model.drive;
    const double j4 = 4.0 * model.coupling;
    const double b1 = std::norm(amp[0].b), b2 = std::norm(amp[1].b);
    const double r1 = amp[0].re_ab, i1 = amp[0].im_ab, x1 = amp[0].chi;
    const double r2 = amp[1].re_ab, i2 = amp[1].im_ab, x2 = amp[1].chi;
    const double h = -0.5;

    AffineGenerator g;
    // clang-format off
    g.M <<
    //  A        BR      BI       CR      CI      DR   DI   E          FR   FI   GR      GI      H        IR      II
        -b1-b2,  -2*a,   0,       -2*a,   0,      0,   0,   0,         0,   0,   0,      0,      0,       0,      0,
        r2+a,    x1,     j4,      0,      0,      -a,  0,   -a,        -a,  0,   0,      0,      0,       0,      0,
        i2,      -j4,    x1,      0,      0,      0,   -a,  0,         0,   a,   0,      0,      0,       0,      0,
        r1+a,    0,      0,       x2,     j4,     -a,  0,   0,         -a,  0,   0,      0,      -a,      0,      0,
        i1,      0,      0,       -j4,    x2,     0,   -a,  0,         0,   -a,  0,      0,      0,       0,      0,
        0,       r1+a,   -i1,     r2+a,   -i2,    -1,  0,   0,         0,   0,   -a,     0,      0,       -a,     0,
        0,       i1,     r1+a,    i2,     r2+a,   0,   -1,  0,         0,   0,   0,      -a,     0,       0,      -a,
        b2,      2*a,    0,       0,      0,      0,   0,   -b1,       0,   0,   -2*a,   0,      0,       0,      0,
        0,       r1+a,   i1,      r2+a,   i2,     0,   0,   0,         -1,  0,   -a,     0,      0,       -a,     0,
        0,       i1,     -r1-a,   -i2,    r2+a,   0,   0,   0,         0,   -1,  0,      -a,     0,       0,      a,
        a,       0,      0,       b2,     0,      a,   0,   r1+2*a,    a,   0,   h,      -j4,    a,       0,      0,
        0,       0,      0,       0,      b2,     0,   a,   i1,        0,   a,   j4,     h,      0,       0,      0,
        b1,      0,      0,       2*a,    0,      0,   0,   0,         0,   0,   0,      0,      -b2,     -2*a,   0,
        a,       b1,     0,       0,      0,      a,   0,   a,         a,   0,   0,      0,      r2+2*a,  h,      -j4,
        0,       0,      b1,      0,      0,      0,   a,   0,         0,   -a,  0,      0,      i2,      j4,     h;
    // clang-format on
    g.w.setZero();
    g.w[kGR] = a;
    g.w[kIR] = a;
    return g;
}

inline AffineGenerator build_generator(const ModelParams& model, const FeedbackParams& fb) {
    return generator_from_amplitudes(model, feedback_amplitudes(fb));
}

namespace detail {

inline Matrix4c kron(const Matrix2c& x, const Matrix2c& y) {
    Matrix4c k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = x(i, j) * y;
    return k;
}

inline Matrix16c kron(const Matrix4c& x, const Matrix4c& y) {
    Matrix16c k;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) k.block<4, 4>(4 * i, 4 * j) = x(i, j) * y;
    return k;
}

} // namespace detail

/// Hamiltonian drive (Y_1 + Y_2) + 2 coupling Z_1 Z_2 in basis {|11>,|10>,|01>,|00>}.
/// Single-qubit operators are written in the local order {|1>, |0>}.
inline Matrix4c hamiltonian(const ModelParams& m) {
    const Complex i(0.0, 1.0);
    Matrix2c y, z, id = Matrix2c::Identity();
    y << 0.0, -i, i, 0.0;
    z << 1.0, 0.0, 0.0, -1.0;
    return m.drive * (detail::kron(y, id) + detail::kron(id, y)) +
           2.0 * m.coupling * detail::kron(z, z);
}

/// Feedback-modified lowering operators U_q s_q, embedded in the two-qubit space.
inline std::array<Matrix4c, 2> jump_operators(const FeedbackAmplitudes& amp) {
    std::array<Matrix4c, 2> c;
    const Matrix2c id = Matrix2c::Identity();
    for (int q = 0; q < 2; ++q) {
        Matrix2c local;
        local << amp[q].a, 0.0, amp[q].b, 0.0;
        c[q] = q == 0 ? detail::kron(local, id) : detail::kron(id, local);
    }
    return c;
}

/// Column-stacked superoperator: vec(L rho) = S vec(rho), vec(X Y Z) = (Z^T (x) X) vec(Y).
inline Matrix16c liouvillian(const Matrix4c& h, const std::array<Matrix4c, 2>& jumps) {
    const Complex i(0.0, 1.0);
    const Matrix4c id = Matrix4c::Identity();
    Matrix16c s = -i * (detail::kron(id, h) - detail::kron(h.transpose(), id));
    for (const Matrix4c& c : jumps) {
        const Matrix4c cdc = c.adjoint() * c;
        s += detail::kron(c.conjugate(), c) - 0.5 * detail::kron(id, cdc) -
             0.5 * detail::kron(cdc.transpose(), id);
    }
    return s;
}

inline Matrix4c apply_superoperator(const Matrix16c& s, const Matrix4c& x) {
    const Eigen::Matrix<Complex, 16, 1> out = s * Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(x.data());
    return Eigen::Map<const Matrix4c>(out.data());
}

/// Generator obtained by projecting the full superoperator onto the
/// coherence coordinates: M' e_k = coords(L(rho(e_k) - rho(0))), w' = -coords(L(rho(0))).
/// Throws SolverError if the superoperator fails to preserve the trace.
inline AffineGenerator oracle_generator(const ModelParams& model, const FeedbackParams& fb) {
    validate(model);
    const Matrix16c s = liouvillian(hamiltonian(model), jump_operators(feedback_amplitudes(fb)));

    const Matrix4c origin = assemble_hermitian(Vector15::Zero(), 1.0);
    const auto check_trace = [](const Matrix4c& out, int k) {
        if (std::abs(out.trace()) > 1e-12)
            throw SolverError("oracle: superoperator is not trace preserving on basis element " +
                              std::to_string(k));
    };

    AffineGenerator g;
    const Matrix4c offset = apply_superoperator(s, origin);
    check_trace(offset, -1);
    g.w = -read_coordinates(offset);
    for (int k = 0; k < kCoordinates; ++k) {
        // rho(e_k) - rho(0): the Hermitian basis element of coordinate k, with
        // the implied corner compensating diagonal slots.
        Vector15 e = Vector15::Zero();
        e[k] = 1.0;
        const double corner = (k == kA || k == kE || k == kH) ? -1.0 : 0.0;
        const Matrix4c out = apply_superoperator(s, assemble_hermitian(e, corner));
        check_trace(out, k);
        g.M.col(k) = read_coordinates(out);
    }
    return g;
}

/// Right-hand side of the master equation evaluated directly on a matrix.
inline Matrix4c master_equation_rhs(const ModelParams& model, const FeedbackParams& fb,
                                    const Matrix4c& rho) {
    const Complex i(0.0, 1.0);
    const Matrix4c h = hamiltonian(model);
    Matrix4c out = -i * (h * rho - rho * h);
    for (const Matrix4c& c : jump_operators(feedback_amplitudes(fb))) {
        const Matrix4c cdc = c.adjoint() * c;
        out += c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
    }
    return out;
}

inline nlohmann::json to_json(const ModelParams& m) {
    return {{"drive", m.drive},
            {"coupling", m.coupling},
            {"scenario", m.scenario == Scenario::Preserve ? "preserve" : "stabilize"}};
}

inline nlohmann::json to_json(const FeedbackParams& p) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& q : p.qubit) j.push_back({{"alpha", q.alpha}, {"beta", q.beta}, {"gamma", q.gamma}});
    return j;
}

inline nlohmann::json generator_to_json(const AffineGenerator& g, const ModelParams& m,
                                        const FeedbackParams& p) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < kCoordinates; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < kCoordinates; ++c) row.push_back(g.M(r, c));
        rows.push_back(std::move(row));
    }
    nlohmann::json w = nlohmann::json::array();
    for (int k = 0; k < kCoordinates; ++k) w.push_back(g.w[k]);
    return {{"M", std::move(rows)}, {"w", std::move(w)}, {"model", to_json(m)}, {"feedback", to_json(p)}};
}

} // namespace qfb
