#pragma once

// Wootters concurrence C = max{0, l1 - l2 - l3 - l4}, with l_i the
// decreasing square roots of the moduli of the eigenvalues of
// rho (s1 - s1^+)(x)(s2 - s2^+) rho^* (s1 - s1^+)(x)(s2 - s2^+).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "qfb/errors.hpp"
#include "qfb/qstate.hpp"

namespace qfb {

struct ConcurrenceValue {
    double value = 0.0;
    std::array<double, 4> lambdas{}; // descending, nonnegative
};

/// (s1 - s1^+) (x) (s2 - s2^+) in basis {|11>,|10>,|01>,|00>}; equals -Y (x) Y.
inline const Matrix4c& spin_flip_operator() {
    static const Matrix4c f = [] {
        Matrix4c m = Matrix4c::Zero();
        m(0, 3) = 1.0;
        m(1, 2) = -1.0;
        m(2, 1) = -1.0;
        m(3, 0) = 1.0;
        return m;
    }();
    return f;
}

namespace detail {

/// Spectral decomposition with roundoff dust in (-1e-9, 0) clipped to zero.
/// Throws ValidationError for genuinely negative eigenvalues.
struct ClippedSpectrum {
    Eigen::Vector4d values;
    Matrix4c vectors;
};

inline ClippedSpectrum clipped_spectrum(const Matrix4c& rho) {
    validate_density(rho, /*check_positive=*/false);
    const Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho);
    if (es.info() != Eigen::Success) throw SolverError("concurrence: Hermitian eigensolver failed");
    ClippedSpectrum s{es.eigenvalues(), es.eigenvectors()};
    if (s.values.minCoeff() < -kPositivityTolerance)
        throw ValidationError("concurrence: state not positive semidefinite (min eigenvalue " +
                              std::to_string(s.values.minCoeff()) + ")");
    s.values = s.values.cwiseMax(0.0);
    return s;
}

inline ConcurrenceValue from_squared(std::array<double, 4> sq) {
    ConcurrenceValue c;
    for (int k = 0; k < 4; ++k) c.lambdas[k] = std::sqrt(std::abs(sq[k]));
    std::sort(c.lambdas.begin(), c.lambdas.end(), std::greater<>());
    c.value = std::max(0.0, c.lambdas[0] - c.lambdas[1] - c.lambdas[2] - c.lambdas[3]);
    c.value = std::min(c.value, 1.0);
    return c;
}

} // namespace detail

namespace detail {

/// Singular values of T = W^T F W with W from the clipped spectrum. Accurate
/// for every state, including rank-deficient ones.
inline std::array<double, 4> squared_lambdas_svd(const Matrix4c& rho) {
    const auto s = clipped_spectrum(rho);
    const Matrix4c w = s.vectors * s.values.cwiseSqrt().cast<Complex>().asDiagonal();
    const Matrix4c t = w.transpose() * spin_flip_operator() * w;
    const Eigen::JacobiSVD<Matrix4c> svd(t);
    if (!svd.singularValues().allFinite()) throw SolverError("concurrence: SVD did not converge");
    std::array<double, 4> sq;
    for (int k = 0; k < 4; ++k) sq[k] = svd.singularValues()[k] * svd.singularValues()[k];
    return sq;
}

/// Squared lambdas below this come from the SVD route: their square root
/// would amplify eigenvalue roundoff beyond 1e-13.
inline constexpr double kSmallSquaredLambda = 1e-6;

/// Eigenvalues of T^+ T with W the Cholesky factor. Empty when rho is not
/// positive definite or a squared lambda is too small to take its root.
inline std::optional<std::array<double, 4>> squared_lambdas_fast(const Matrix4c& rho) {
    const Eigen::LLT<Matrix4c> llt(rho);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Matrix4c w = llt.matrixL();
    const Matrix4c t = w.transpose() * spin_flip_operator() * w;
    const Eigen::SelfAdjointEigenSolver<Matrix4c> es(t.adjoint() * t, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() >= kSmallSquaredLambda)) return std::nullopt;
    return std::array<double, 4>{es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2], es.eigenvalues()[3]};
}

} // namespace detail

/// Concurrence through the factored form: with rho = W W^+ and T = W^T F W
/// (F the spin-flip operator), the eigenvalues of rho F rho^* F are the
/// squared singular values of T. Full-rank states with well separated
/// lambdas use a Cholesky factor and the Hermitian eigenvalues of T^+ T;
/// everything else goes through a spectral factor and an SVD of T, which
/// avoids the square root of eigenvalue roundoff near pure states.
inline ConcurrenceValue concurrence(const DensityMatrix& d) {
    validate_density(d.rho, /*check_positive=*/false);
    if (const auto sq = detail::squared_lambdas_fast(d.rho)) return detail::from_squared(*sq);
    return detail::from_squared(detail::squared_lambdas_svd(d.rho));
}

/// Term-by-term evaluation: general complex eigenvalues of rho F rho^* F.
/// Agrees with `concurrence` up to the square root of eigenvalue roundoff
/// (about 1e-8 near rank-deficient states).
inline ConcurrenceValue concurrence_literal(const DensityMatrix& d) {
    const auto s = detail::clipped_spectrum(d.rho);
    const Matrix4c rho = s.vectors * s.values.cast<Complex>().asDiagonal() * s.vectors.adjoint();
    const Matrix4c flip = spin_flip_operator();
    const Matrix4c product = rho * flip * rho.conjugate() * flip;

    const Eigen::ComplexEigenSolver<Matrix4c> ces(product, /*computeEigenvectors=*/false);
    if (ces.info() != Eigen::Success) throw SolverError("concurrence: eigensolver did not converge");
    std::array<double, 4> mod;
    for (int k = 0; k < 4; ++k) mod[k] = std::abs(ces.eigenvalues()[k]);
    return detail::from_squared(mod);
}

} // namespace qfb
