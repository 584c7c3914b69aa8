#pragma once

// Two-qubit states in the basis {|11>, |10>, |01>, |00>} (index 0 is |11>,
// index 3 is |00>) and the 15-coordinate real parametrization used by the
// affine equation of motion.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "qfb/errors.hpp"

namespace qfb {

using Complex = std::complex<double>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;
using Vector4c = Eigen::Matrix<Complex, 4, 1>;
using Vector15 = Eigen::Matrix<double, 15, 1>;

inline constexpr int kCoordinates = 15;

/// Validation tolerance for Hermiticity and unit trace at input boundaries.
inline constexpr double kStateTolerance = 1e-9;
/// Smallest eigenvalue accepted as "positive semidefinite".
inline constexpr double kPositivityTolerance = 1e-9;

/// Slots of the coherence vector. Each off-diagonal pair (R, I) is the real
/// and imaginary part of an upper-triangular density-matrix element.
enum Coord : int {
    kA = 0,  // rho(0,0)
    kBR, kBI, // rho(0,1)
    kCR, kCI, // rho(0,2)
    kDR, kDI, // rho(0,3)
    kE,       // rho(1,1)
    kFR, kFI, // rho(1,2)
    kGR, kGI, // rho(1,3)
    kH,       // rho(2,2)
    kIR, kII, // rho(2,3)
};

inline constexpr std::array<const char*, kCoordinates> kCoordNames = {
    "A", "BR", "BI", "CR", "CI", "DR", "DI", "E", "FR", "FI", "GR", "GI", "H", "IR", "II"};

namespace detail {

struct OffDiagonalSlot {
    int row;
    int col;
    int re;
};

inline constexpr std::array<OffDiagonalSlot, 6> kOffDiagonal = {{
    {0, 1, kBR}, {0, 2, kCR}, {0, 3, kDR}, {1, 2, kFR}, {1, 3, kGR}, {2, 3, kIR},
}};

inline constexpr std::array<std::array<int, 2>, 3> kDiagonal = {{{0, kA}, {1, kE}, {2, kH}}};

} // namespace detail

/// A 4x4 complex matrix meant to be a two-qubit density operator.
///
/// The wrapper does not enforce positivity on construction: states produced
/// inside solvers may graze zero eigenvalues by roundoff. Use
/// `validate_density` at input boundaries.
struct DensityMatrix {
    Matrix4c rho = Matrix4c::Zero();

    const Complex& operator()(int r, int c) const { return rho(r, c); }
    Complex& operator()(int r, int c) { return rho(r, c); }
};

/// Lossless real parametrization of a Hermitian, unit-trace 4x4 matrix; the
/// |00><00| population is implied as 1 - A - E - H.
struct CoherenceVector {
    Vector15 v = Vector15::Zero();

    double operator[](int k) const { return v[k]; }
    double& operator[](int k) { return v[k]; }

    double ground_population() const { return 1.0 - v[kA] - v[kE] - v[kH]; }
};

/// Angles of the generic pure state
///   cos t3 |11> + e^{i p1} cos t2 sin t3 |10>
///     + e^{i p2} cos t1 sin t3 sin t2 |01> + e^{i p3} sin t3 sin t2 sin t1 |00>.
struct PureStateAngles {
    std::array<double, 3> theta{}; // each in [0, pi/2]
    std::array<double, 3> phi{};   // each in [0, 2 pi)
};

inline double max_hermitian_defect(const Matrix4c& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Reads the 15 coordinates off any 4x4 matrix. No validation: this is the
/// linear read-out map, also applied to traceless generator outputs.
inline Vector15 read_coordinates(const Matrix4c& m) {
    Vector15 v;
    for (const auto& [idx, slot] : detail::kDiagonal) v[slot] = m(idx, idx).real();
    for (const auto& s : detail::kOffDiagonal) {
        v[s.re] = m(s.row, s.col).real();
        v[s.re + 1] = m(s.row, s.col).imag();
    }
    return v;
}

/// Hermitian matrix with the given coordinates and the stated (3,3) element.
inline Matrix4c assemble_hermitian(const Vector15& v, double corner) {
    Matrix4c m = Matrix4c::Zero();
    for (const auto& [idx, slot] : detail::kDiagonal) m(idx, idx) = v[slot];
    m(3, 3) = corner;
    for (const auto& s : detail::kOffDiagonal) {
        const Complex z(v[s.re], v[s.re + 1]);
        m(s.row, s.col) = z;
        m(s.col, s.row) = std::conj(z);
    }
    return m;
}

/// Checks Hermiticity and unit trace (and optionally positivity).
/// Throws ValidationError naming the violated invariant.
inline void validate_density(const Matrix4c& m, bool check_positive = true,
                             double tol = kStateTolerance) {
    if (!m.allFinite()) throw ValidationError("density matrix: non-finite entries");
    const double herm = max_hermitian_defect(m);
    if (herm > tol)
        throw ValidationError("density matrix: not Hermitian (defect " + std::to_string(herm) + ")");
    const Complex tr = m.trace();
    if (std::abs(tr - Complex(1.0, 0.0)) > tol)
        throw ValidationError("density matrix: trace is not 1 (trace " + std::to_string(tr.real()) +
                              ")");
    if (check_positive) {
        Eigen::SelfAdjointEigenSolver<Matrix4c> es(m, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        if (lo < -kPositivityTolerance)
            throw ValidationError("density matrix: not positive semidefinite (min eigenvalue " +
                                  std::to_string(lo) + ")");
    }
}

inline void validate_density(const DensityMatrix& d, bool check_positive = true) {
    validate_density(d.rho, check_positive);
}

inline CoherenceVector coherence_from_density(const DensityMatrix& d) {
    validate_density(d.rho, /*check_positive=*/false);
    return CoherenceVector{read_coordinates(d.rho)};
}

/// Exact inverse of `coherence_from_density`. Positivity is not enforced.
inline DensityMatrix density_from_coherence(const CoherenceVector& c) {
    return DensityMatrix{assemble_hermitian(c.v, c.ground_population())};
}

inline void validate_angles(const PureStateAngles& a) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < 3; ++i) {
        if (!(a.theta[i] >= 0.0 && a.theta[i] <= half_pi))
            throw ValidationError("pure state: theta" + std::to_string(i + 1) + " outside [0, pi/2]");
        if (!(a.phi[i] >= 0.0 && a.phi[i] < two_pi))
            throw ValidationError("pure state: phi" + std::to_string(i + 1) + " outside [0, 2 pi)");
    }
}

/// State vector in basis order {|11>, |10>, |01>, |00>}.
inline Vector4c pure_state_vector(const PureStateAngles& a) {
    const auto [t1, t2, t3] = a.theta;
    const auto [p1, p2, p3] = a.phi;
    const auto phase = [](double p) { return std::polar(1.0, p); };
    Vector4c psi;
    psi << Complex(std::cos(t3), 0.0),
        phase(p1) * (std::cos(t2) * std::sin(t3)),
        phase(p2) * (std::cos(t1) * std::sin(t3) * std::sin(t2)),
        phase(p3) * (std::sin(t3) * std::sin(t2) * std::sin(t1));
    return psi;
}

inline DensityMatrix pure_state_from_angles(const PureStateAngles& a) {
    validate_angles(a);
    const Vector4c psi = pure_state_vector(a);
    return DensityMatrix{psi * psi.adjoint()};
}

// JSON: density matrices as {"re": [[..]], "im": [[..]]}, coherence vectors as
// a flat 15-element array.

inline void to_json(nlohmann::json& j, const DensityMatrix& d) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        nlohmann::json rr = nlohmann::json::array(), ir = nlohmann::json::array();
        for (int c = 0; c < 4; ++c) {
            rr.push_back(d.rho(r, c).real());
            ir.push_back(d.rho(r, c).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ir));
    }
    j = nlohmann::json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline void from_json(const nlohmann::json& j, DensityMatrix& d) {
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (re.size() != 4 || im.size() != 4) throw ValidationError("density matrix JSON: expected 4 rows");
    for (int r = 0; r < 4; ++r) {
        if (re[r].size() != 4 || im[r].size() != 4)
            throw ValidationError("density matrix JSON: expected 4 columns");
        for (int c = 0; c < 4; ++c)
            d.rho(r, c) = Complex(re[r][c].get<double>(), im[r][c].get<double>());
    }
}

inline void to_json(nlohmann::json& j, const CoherenceVector& c) {
    j = nlohmann::json::array();
    for (int k = 0; k < kCoordinates; ++k) j.push_back(c.v[k]);
}

inline void from_json(const nlohmann::json& j, CoherenceVector& c) {
    if (!j.is_array() || j.size() != kCoordinates)
        throw ValidationError("coherence vector JSON: expected 15 numbers");
    for (int k = 0; k < kCoordinates; ++k) c.v[k] = j[k].get<double>();
}

} // namespace qfb
