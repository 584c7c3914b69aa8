#include <gtest/gtest.h>

#include "qfb/entanglement.hpp"
#include "qfb/sampling.hpp"
#include "test_support.hpp"

using namespace qfb;

namespace {

DensityMatrix bell() {
    Vector4c psi = Vector4c::Zero();
    psi[0] = psi[3] = 1.0 / std::sqrt(2.0);
    return {psi * psi.adjoint()};
}

DensityMatrix werner(double p) {
    return {p * bell().rho + (1.0 - p) * Matrix4c::Identity() / 4.0};
}

// 2 |<11|psi><00|psi> - <10|psi><01|psi>|
double pure_state_concurrence(const Vector4c& psi) {
    return 2.0 * std::abs(psi[0] * psi[3] - psi[1] * psi[2]);
}

} // namespace

TEST(Concurrence, BellStateIsMaximal) {
    EXPECT_NEAR(concurrence(bell()).value, 1.0, 1e-12);
    EXPECT_NEAR(concurrence_literal(bell()).value, 1.0, 1e-12);
}

TEST(Concurrence, ProductStateIsZero) {
    DensityMatrix ground;
    ground.rho(3, 3) = 1.0;
    EXPECT_NEAR(concurrence(ground).value, 0.0, 1e-12);
}

TEST(Concurrence, WernerFamily) {
    // max{0, (3p - 1)/2}, checked against a direct numerical evaluation of the
    // defining eigenvalue problem.
    EXPECT_NEAR(concurrence(werner(0.5)).value, 0.25, 1e-10);
    EXPECT_NEAR(concurrence(werner(0.8)).value, 0.7, 1e-10);
    EXPECT_EQ(concurrence(werner(0.2)).value, 0.0);
}

TEST(Concurrence, LambdasAreSortedAndNonnegative) {
    std::mt19937_64 rng(1);
    for (int n = 0; n < 50; ++n) {
        const ConcurrenceValue c = concurrence(qfb::testing::random_density(rng));
        for (int k = 0; k < 4; ++k) EXPECT_GE(c.lambdas[k], 0.0);
        for (int k = 0; k < 3; ++k) EXPECT_GE(c.lambdas[k], c.lambdas[k + 1]);
        EXPECT_DOUBLE_EQ(c.value, std::max(0.0, c.lambdas[0] - c.lambdas[1] - c.lambdas[2] - c.lambdas[3]));
        EXPECT_GE(c.value, 0.0);
        EXPECT_LE(c.value, 1.0);
    }
}

TEST(Concurrence, PureStateDeterminantFormula) {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const Vector4c psi = pure_state_vector(sample_at(99, k));
        const double c = concurrence({psi * psi.adjoint()}).value;
        worst = std::max(worst, std::abs(c - pure_state_concurrence(psi)));
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(Concurrence, LiteralRouteAgrees) {
    std::mt19937_64 rng(2);
    for (int n = 0; n < 100; ++n) {
        const DensityMatrix d = qfb::testing::random_density(rng);
        EXPECT_NEAR(concurrence(d).value, concurrence_literal(d).value, 1e-7);
    }
    for (std::uint64_t k = 0; k < 100; ++k) {
        const Vector4c psi = pure_state_vector(sample_at(5, k));
        const DensityMatrix d{psi * psi.adjoint()};
        EXPECT_NEAR(concurrence(d).value, concurrence_literal(d).value, 1e-7);
    }
}

TEST(Concurrence, LocalUnitaryInvariance) {
    std::mt19937_64 rng(3);
    for (int n = 0; n < 100; ++n) {
        // Mix in a pure component so that the state is typically entangled.
        const Vector4c psi = pure_state_vector(sample_at(3, n));
        const DensityMatrix rho{0.7 * psi * psi.adjoint() + 0.3 * qfb::testing::random_density(rng).rho};
        const Matrix4c u = detail::kron(qfb::testing::random_unitary<2>(rng), qfb::testing::random_unitary<2>(rng));
        const DensityMatrix rotated{u * rho.rho * u.adjoint()};
        EXPECT_NEAR(concurrence(rho).value, concurrence(rotated).value, 1e-10);
    }
}

TEST(Concurrence, LipschitzUnderSmallPerturbations) {
    std::mt19937_64 rng(4);
    for (int n = 0; n < 50; ++n) {
        const DensityMatrix rho = qfb::testing::random_density(rng);
        Matrix4c delta = qfb::testing::ginibre<4>(rng);
        delta = (delta + delta.adjoint()).eval();
        delta -= delta.trace() / 4.0 * Matrix4c::Identity();
        delta /= delta.cwiseAbs().maxCoeff();
        const double eps = 1e-6;
        const DensityMatrix moved{rho.rho + eps * delta};
        EXPECT_LE(std::abs(concurrence(rho).value - concurrence(moved).value), 10.0 * eps);
    }
}

TEST(Concurrence, RoundoffDustIsClipped) {
    DensityMatrix d = bell();
    d.rho(1, 1) = -5e-10;
    d.rho(2, 2) = 5e-10;
    EXPECT_NEAR(concurrence(d).value, 1.0, 1e-6);
}

TEST(Concurrence, RejectsInvalidStates) {
    DensityMatrix d = bell();
    d.rho(1, 1) = -1e-3;
    d.rho(2, 2) = 1e-3;
    EXPECT_THROW(concurrence(d), ValidationError);

    DensityMatrix e = bell();
    e.rho(0, 0) = 0.7;
    EXPECT_THROW(concurrence(e), ValidationError);

    DensityMatrix f = bell();
    f.rho(0, 1) = Complex(0.0, 0.2);
    EXPECT_THROW(concurrence(f), ValidationError);
}

TEST(Concurrence, FastPathMatchesSvdRoute) {
    // Mixtures of a random pure state with a random full-rank state span
    // purities from nearly pure to maximally mixed.
    std::mt19937_64 rng(31);
    int fast = 0;
    for (int n = 0; n < 2000; ++n) {
        const auto a = sample_at(5, n);
        const double p = std::pow(qfb::testing::uniform(rng, 0.0, 1.0), 3.0);
        const Matrix4c rho =
            (1.0 - p) * pure_state_from_angles(a).rho + p * qfb::testing::random_density(rng).rho;
        const auto sq = detail::squared_lambdas_fast(rho);
        if (!sq) continue;
        ++fast;
        const double svd = detail::from_squared(detail::squared_lambdas_svd(rho)).value;
        EXPECT_NEAR(detail::from_squared(*sq).value, svd, 1e-12);
    }
    EXPECT_GT(fast, 1000);
}
