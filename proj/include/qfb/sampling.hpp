#pragma once

// Haar-random two-qubit pure states. With theta_i = asin(xi_i^(1/(2i))) the
// unitarily invariant measure has flat densities in phi_i on [0, 2 pi) and
// xi_i on [0, 1].

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "qfb/errors.hpp"
#include "qfb/parallel.hpp"
#include "qfb/qstate.hpp"

namespace qfb {

struct SamplerConfig {
    std::uint64_t seed = 0;
    std::size_t count = 1;
};

/// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
/// Independent of the standard library's distribution implementations.
template <typename Engine>
double uniform_unit(Engine& eng) {
    static_assert(Engine::max() - Engine::min() == ~std::uint64_t{0}, "needs a 64-bit engine");
    return static_cast<double>((eng() - Engine::min()) >> 11) * 0x1.0p-53;
}

/// Substream for ensemble element `index`: a function of (seed, index) only.
inline std::mt19937_64 index_stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

inline PureStateAngles angles_from_uniforms(const std::array<double, 3>& xi,
                                            const std::array<double, 3>& phi) {
    PureStateAngles a;
    for (int i = 0; i < 3; ++i) {
        a.theta[i] = std::asin(std::pow(xi[i], 1.0 / (2.0 * (i + 1))));
        a.phi[i] = phi[i];
    }
    return a;
}

/// Draws phi_1..3 then xi_1..3 from the stream.
template <typename Engine>
PureStateAngles sample_pure_state(Engine& eng) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::array<double, 3> phi, xi;
    for (double& p : phi) p = two_pi * uniform_unit(eng);
    for (double& x : xi) x = uniform_unit(eng);
    return angles_from_uniforms(xi, phi);
}

inline PureStateAngles sample_at(std::uint64_t seed, std::uint64_t index) {
    auto eng = index_stream(seed, index);
    return sample_pure_state(eng);
}

inline std::vector<PureStateAngles> sample_ensemble(const SamplerConfig& cfg, unsigned workers = 1) {
    if (cfg.count < 1) throw ValidationError("sampler: count must be at least 1");
    std::vector<PureStateAngles> out(cfg.count);
    parallel_for(cfg.count, workers, [&](std::size_t k) { out[k] = sample_at(cfg.seed, k); });
    return out;
}

/// Ensemble as coherence vectors, ready for propagation.
inline std::vector<CoherenceVector> ensemble_states(std::span<const PureStateAngles> angles) {
    std::vector<CoherenceVector> out;
    out.reserve(angles.size());
    for (const auto& a : angles) {
        const Vector4c psi = pure_state_vector(a);
        out.push_back({read_coordinates(psi * psi.adjoint())});
    }
    return out;
}

inline void write_ensemble_csv(std::ostream& os, std::span<const PureStateAngles> ensemble) {
    os << "idx,theta1,theta2,theta3,phi1,phi2,phi3\n";
    char buf[32];
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        os << k;
        for (double x : ensemble[k].theta) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            os << buf;
        }
        for (double x : ensemble[k].phi) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            os << buf;
        }
        os << '\n';
    }
}

} // namespace qfb
