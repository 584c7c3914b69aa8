#pragma once

// Exhaustive grid search over the feedback angles (alpha_1, beta_1, alpha_2,
// beta_2), gamma_i = 0.
//
// The generator depends on each qubit's angles only through
// (|B|^2, Re[A B*], Im[A B*]), so distinct grid tuples can produce identical
// dynamics (e.g. (a, b) and (a + pi, 2 pi - b), or any alpha when sin b = 0).
// Tuples are grouped into such classes, each class is evaluated once, and a
// class is reported by its lexicographically smallest member. Together with
// class enumeration in lexicographic order this implements "ties go to the
// smallest tuple" without depending on roundoff.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "qfb/entanglement.hpp"
#include "qfb/errors.hpp"
#include "qfb/liouville.hpp"
#include "qfb/parallel.hpp"
#include "qfb/propagate.hpp"
#include "qfb/qstate.hpp"
#include "qfb/sampling.hpp"
#include "qfb/version.hpp"

namespace qfb {

/// Sorted feedback angles in [0, 2 pi), 0 and 2 pi identified.
struct AngleGrid {
    std::vector<double> values;

    /// k * step for all k with k * step < 2 pi (up to roundoff).
    static AngleGrid uniform(double step) {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        if (!(step > 0.0) || step > two_pi) throw ValidationError("angle grid: step must be in (0, 2 pi]");
        AngleGrid g;
        for (int k = 0;; ++k) {
            const double x = k * step;
            if (x > two_pi - 1e-9) break;
            g.values.push_back(x);
        }
        return g;
    }

    static AngleGrid standard() { return uniform(std::numbers::pi / 12.0); }

    std::size_t size() const { return values.size(); }
};

inline void validate(const AngleGrid& g) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (g.values.empty()) throw ValidationError("angle grid: empty");
    for (std::size_t k = 0; k < g.values.size(); ++k) {
        if (!(g.values[k] >= 0.0 && g.values[k] < two_pi - 1e-9))
            throw ValidationError("angle grid: value outside [0, 2 pi)");
        if (k > 0 && !(g.values[k] > g.values[k - 1])) throw ValidationError("angle grid: not strictly increasing");
    }
}

/// (alpha_1, beta_1, alpha_2, beta_2); gamma_1 = gamma_2 = 0.
struct AngleTuple {
    double a1 = 0.0, b1 = 0.0, a2 = 0.0, b2 = 0.0;

    FeedbackParams params() const { return FeedbackParams::from_alpha_beta(a1, b1, a2, b2); }
    std::array<double, 4> as_array() const { return {a1, b1, a2, b2}; }

    friend bool operator==(const AngleTuple&, const AngleTuple&) = default;
};

inline nlohmann::json to_json(const AngleTuple& t) { return nlohmann::json::array({t.a1, t.b1, t.a2, t.b2}); }

/// Objective values closer than this are ties, resolved toward the smaller
/// tuple or drive. Keeps roundoff from picking winners on flat rows (e.g. an
/// identically zero steady-state concurrence).
inline constexpr double kTieTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Equivalence classes of grid points

namespace detail {

using QubitKey = std::array<long long, 3>;

inline QubitKey qubit_key(const QubitAmplitudes& q) {
    // 1e-12 resolution: far below grid spacing, far above trig roundoff.
    const auto quantize = [](double x) { return std::llround(x * 1e12); };
    return {quantize(std::norm(q.b)), quantize(q.re_ab), quantize(q.im_ab)};
}

} // namespace detail

/// Grid points (alpha_index, beta_index) of one qubit sharing the same dynamics.
struct QubitClass {
    std::vector<std::array<std::size_t, 2>> members; // lexicographic; front() is the representative
    QubitAmplitudes amplitudes;
};

inline std::vector<QubitClass> qubit_classes(const AngleGrid& grid) {
    validate(grid);
    std::vector<QubitClass> classes;
    std::map<detail::QubitKey, std::size_t> index;
    for (std::size_t ia = 0; ia < grid.size(); ++ia) {
        for (std::size_t ib = 0; ib < grid.size(); ++ib) {
            const QubitAmplitudes amp = qubit_amplitudes({grid.values[ia], grid.values[ib], 0.0});
            const auto [it, inserted] = index.emplace(detail::qubit_key(amp), classes.size());
            if (inserted) classes.push_back({{}, amp});
            classes[it->second].members.push_back({ia, ib});
        }
    }
    return classes;
}

/// A tuple class: product of one class per qubit, in lexicographic order of
/// representatives.
struct TupleClass {
    std::size_t first;
    std::size_t second;
};

inline std::vector<TupleClass> tuple_classes(std::size_t qubit_class_count) {
    std::vector<TupleClass> out;
    out.reserve(qubit_class_count * qubit_class_count);
    for (std::size_t c1 = 0; c1 < qubit_class_count; ++c1)
        for (std::size_t c2 = 0; c2 < qubit_class_count; ++c2) out.push_back({c1, c2});
    return out;
}

inline AngleTuple representative(const AngleGrid& grid, const std::vector<QubitClass>& qc, TupleClass c) {
    const auto& m1 = qc[c.first].members.front();
    const auto& m2 = qc[c.second].members.front();
    return {grid.values[m1[0]], grid.values[m1[1]], grid.values[m2[0]], grid.values[m2[1]]};
}

/// Every grid tuple in the class, lexicographically ordered.
inline std::vector<AngleTuple> class_members(const AngleGrid& grid, const std::vector<QubitClass>& qc,
                                             TupleClass c) {
    std::vector<AngleTuple> out;
    for (const auto& m1 : qc[c.first].members)
        for (const auto& m2 : qc[c.second].members)
            out.push_back({grid.values[m1[0]], grid.values[m1[1]], grid.values[m2[0]], grid.values[m2[1]]});
    return out;
}

// ---------------------------------------------------------------------------
// Ensemble-averaged concurrence

namespace detail {

/// Propagators for every gap of `times`, starting from t = 0. A uniform grid
/// shares one propagator across gaps.
struct TimeSteps {
    std::vector<AffineStep> steps;  // steps[k] maps v(times[k-1]) to v(times[k]); steps[0] from t = 0
    std::vector<std::size_t> which; // index into steps per time point
    bool first_is_zero = false;
};

inline TimeSteps time_steps(const AffineGenerator& g, std::span<const double> times) {
    TimeSteps ts;
    ts.which.resize(times.size());
    ts.first_is_zero = times[0] == 0.0;
    ts.steps.push_back(ts.first_is_zero ? AffineStep{} : step_propagator(g, times[0]));
    if (is_uniform_grid(times)) {
        ts.steps.push_back(step_propagator(g, times[1] - times[0]));
        for (std::size_t k = 1; k < times.size(); ++k) ts.which[k] = 1;
    } else {
        for (std::size_t k = 1; k < times.size(); ++k) {
            ts.which[k] = ts.steps.size();
            ts.steps.push_back(step_propagator(g, times[k] - times[k - 1]));
        }
    }
    return ts;
}

/// Concurrence of one trajectory at each time point.
inline void trajectory_concurrence(const TimeSteps& ts, const CoherenceVector& v0, std::span<double> out) {
    CoherenceVector v = v0;
    if (!ts.first_is_zero) v.v = ts.steps[0].apply(v.v);
    out[0] = concurrence(density_from_coherence(v)).value;
    for (std::size_t k = 1; k < out.size(); ++k) {
        v.v = ts.steps[ts.which[k]].apply(v.v);
        out[k] = concurrence(density_from_coherence(v)).value;
    }
}

/// Mean concurrence per time over `states`. Deterministic: per-member rows
/// are reduced in index order regardless of `workers`.
inline std::vector<double> ensemble_mean(const AffineGenerator& g, std::span<const CoherenceVector> states,
                                         std::span<const double> times, unsigned workers) {
    validate_times(times);
    if (times.empty() || states.empty()) throw ValidationError("ensemble mean: empty times or ensemble");
    const TimeSteps ts = time_steps(g, times);

    const std::size_t nt = times.size();
    std::vector<double> rows(states.size() * nt);
    parallel_for(states.size(), workers, [&](std::size_t k) {
        try {
            trajectory_concurrence(ts, states[k], std::span<double>(rows).subspan(k * nt, nt));
        } catch (const std::exception& e) {
            throw SolverError("ensemble member " + std::to_string(k) + ": " + e.what());
        }
    });
    std::vector<double> mean(nt, 0.0);
    for (std::size_t k = 0; k < states.size(); ++k)
        for (std::size_t t = 0; t < nt; ++t) mean[t] += rows[k * nt + t];
    for (double& m : mean) m /= static_cast<double>(states.size());
    return mean;
}

inline double time_average(std::span<const double> curve) {
    double s = 0.0;
    for (double x : curve) s += x;
    return s / static_cast<double>(curve.size());
}

} // namespace detail

/// Ensemble mean of C(rho(t)) for Haar-random initial pure states.
inline std::vector<double> average_concurrence(const ModelParams& m, const FeedbackParams& p,
                                               std::span<const double> times, const SamplerConfig& cfg,
                                               unsigned workers = 1) {
    validate(m);
    if (m.scenario != Scenario::Preserve) throw ValidationError("average_concurrence: needs the preservation scenario");
    const auto states = ensemble_states(sample_ensemble(cfg, workers));
    return detail::ensemble_mean(build_generator(m, p), states, times, workers);
}

/// 0, step, 2 step, ... up to tmax inclusive (within roundoff).
inline std::vector<double> time_grid(double tmax, double step) {
    if (!(step > 0.0) || !(tmax >= 0.0) || !std::isfinite(tmax))
        throw ValidationError("time grid: need tmax >= 0 and step > 0");
    std::vector<double> t;
    for (long k = 0;; ++k) {
        const double x = static_cast<double>(k) * step;
        if (x > tmax * (1.0 + 1e-12) + 1e-12) break;
        t.push_back(x);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Preservation search

struct PreservationOptions {
    AngleGrid grid = AngleGrid::standard();
    std::vector<double> times = time_grid(3.0, 0.05);
    SamplerConfig sampler{0, 10000};
    double drive = 0.0;
    /// Coarse stage: ensemble prefix of this size; 0 evaluates every class
    /// on the full ensemble.
    std::size_t coarse_count = 1000;
    /// Coarse stage uses every `coarse_time_stride`-th time point.
    std::size_t coarse_time_stride = 6;
    /// Fraction of classes kept by time-averaged coarse score.
    double shortlist_fraction = 0.01;
    /// Additionally keep this many leaders per coarse time point.
    std::size_t per_time_leaders = 3;
    unsigned workers = 1;
};

struct PreservationResult {
    std::vector<double> times;
    std::vector<double> avg_concurrence_feedback; // at the global optimum
    std::vector<double> avg_concurrence_none;
    AngleTuple best;                              // argmax of the time-averaged mean
    double best_score = 0.0;
    std::vector<AngleTuple> equivalent_to_best;   // grid tuples with identical dynamics
    std::vector<AngleTuple> best_per_time;
    std::vector<double> best_per_time_value;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::size_t coarse_count = 0;
    std::size_t classes_total = 0;
    std::size_t classes_refined = 0;
    double drive = 0.0;
};

namespace detail {

inline void validate(const PreservationOptions& o) {
    qfb::validate(o.grid);
    validate_times(o.times);
    if (o.times.empty()) throw ValidationError("preservation: empty time grid");
    if (o.sampler.count < 1) throw ValidationError("preservation: ensemble must not be empty");
    if (o.coarse_time_stride < 1) throw ValidationError("preservation: coarse time stride must be positive");
    if (!(o.shortlist_fraction > 0.0 && o.shortlist_fraction <= 1.0))
        throw ValidationError("preservation: shortlist fraction must be in (0, 1]");
    if (!std::isfinite(o.drive)) throw ValidationError("preservation: non-finite drive");
}

/// Mean-concurrence curves for each class in `which`, parallel over classes.
inline std::vector<std::vector<double>> class_curves(const ModelParams& model, const std::vector<QubitClass>& qc,
                                                     const std::vector<TupleClass>& classes,
                                                     std::span<const std::size_t> which,
                                                     std::span<const CoherenceVector> states,
                                                     std::span<const double> times, unsigned workers) {
    std::vector<std::vector<double>> out(which.size());
    parallel_for(which.size(), workers, [&](std::size_t k) {
        const TupleClass c = classes[which[k]];
        const AffineGenerator g = generator_from_amplitudes(model, {qc[c.first].amplitudes, qc[c.second].amplitudes});
        out[k] = ensemble_mean(g, states, times, 1);
    });
    return out;
}

/// Index of the first maximum (smallest tuple on ties, given ordered input).
inline std::size_t first_argmax(std::span<const double> x) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < x.size(); ++k)
        if (x[k] > x[best] + kTieTolerance) best = k;
    return best;
}

} // namespace detail

/// Exhaustive search over grid^4 (gamma_i = 0) maximizing the time-averaged
/// ensemble-mean concurrence, optionally in two stages: a coarse pass on an
/// ensemble prefix and a subset of times shortlists classes that are then
/// ranked on the full ensemble and time grid.
inline PreservationResult optimize_preservation(const PreservationOptions& opt) {
    detail::validate(opt);
    const ModelParams model = ModelParams::preserve(opt.drive);
    const auto qc = qubit_classes(opt.grid);
    const auto classes = tuple_classes(qc.size());
    const auto ensemble = sample_ensemble(opt.sampler, opt.workers);
    const auto states = ensemble_states(ensemble);

    std::vector<std::size_t> shortlist(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) shortlist[k] = k;

    const bool two_stage = opt.coarse_count > 0 && opt.coarse_count < opt.sampler.count;
    if (two_stage) {
        std::vector<double> coarse_times;
        for (std::size_t k = 0; k < opt.times.size(); k += opt.coarse_time_stride) coarse_times.push_back(opt.times[k]);
        const std::span<const CoherenceVector> prefix(states.data(), opt.coarse_count);
        const auto curves = detail::class_curves(model, qc, classes, shortlist, prefix, coarse_times, opt.workers);

        std::vector<double> score(curves.size());
        for (std::size_t k = 0; k < curves.size(); ++k) score[k] = detail::time_average(curves[k]);
        const auto keep = static_cast<std::size_t>(
            std::ceil(opt.shortlist_fraction * static_cast<double>(classes.size())));
        std::vector<std::size_t> order(classes.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        // Descending score, ascending class index on ties.
        auto by_score = [](const std::vector<double>& v) {
            return [&v](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); };
        };
        std::partial_sort(order.begin(), order.begin() + static_cast<long>(std::min(keep, order.size())), order.end(),
                          by_score(score));
        std::vector<char> selected(classes.size(), 0);
        for (std::size_t k = 0; k < std::min(keep, order.size()); ++k) selected[order[k]] = 1;
        selected[0] = 1; // the no-feedback class
        for (std::size_t t = 0; t < coarse_times.size(); ++t) {
            std::vector<double> at(curves.size());
            for (std::size_t k = 0; k < curves.size(); ++k) at[k] = curves[k][t];
            const std::size_t lead = std::min(opt.per_time_leaders, order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<long>(lead), order.end(), by_score(at));
            for (std::size_t k = 0; k < lead; ++k) selected[order[k]] = 1;
        }
        shortlist.clear();
        for (std::size_t k = 0; k < classes.size(); ++k)
            if (selected[k]) shortlist.push_back(k);
    }

    const auto curves = detail::class_curves(model, qc, classes, shortlist, states, opt.times, opt.workers);

    PreservationResult r;
    r.times = opt.times;
    r.seed = opt.sampler.seed;
    r.count = opt.sampler.count;
    r.coarse_count = two_stage ? opt.coarse_count : 0;
    r.classes_total = classes.size();
    r.classes_refined = shortlist.size();
    r.drive = opt.drive;

    std::vector<double> score(curves.size());
    for (std::size_t k = 0; k < curves.size(); ++k) score[k] = detail::time_average(curves[k]);
    const std::size_t best = detail::first_argmax(score);
    const TupleClass bc = classes[shortlist[best]];
    r.best = representative(opt.grid, qc, bc);
    r.best_score = score[best];
    r.equivalent_to_best = class_members(opt.grid, qc, bc);
    r.avg_concurrence_feedback = curves[best];
    // Class 0 holds (0, 0, 0, 0) and is always evaluated.
    r.avg_concurrence_none = curves[0];

    for (std::size_t t = 0; t < opt.times.size(); ++t) {
        std::vector<double> at(curves.size());
        for (std::size_t k = 0; k < curves.size(); ++k) at[k] = curves[k][t];
        const std::size_t k = detail::first_argmax(at);
        r.best_per_time.push_back(representative(opt.grid, qc, classes[shortlist[k]]));
        r.best_per_time_value.push_back(at[k]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Stabilization search

struct CellResult {
    double drive = 0.0;
    double coupling = 0.0;
    std::optional<double> feedback; // empty when every tuple had a singular steady state
    std::optional<double> none;     // empty when the no-feedback steady state is singular
    AngleTuple best;
    double residual = 0.0;          // |M v - w|_inf of the reported optimum
    std::size_t singular_tuples = 0;

    bool missing() const { return !feedback.has_value(); }
    std::optional<double> delta() const {
        if (!feedback || !none) return std::nullopt;
        return *feedback - *none;
    }
};

struct CurvePoint {
    double coupling = 0.0;
    std::optional<double> drive; // empty when every cell in the row is missing
    double concurrence = 0.0;
    AngleTuple angles;
};

struct StabilizationResult {
    std::vector<double> drive_grid;
    std::vector<double> coupling_grid;
    std::vector<CellResult> cells;   // row-major: drive index outer, coupling index inner
    std::vector<CurvePoint> curve;   // one point per coupling value

    const CellResult& cell(std::size_t i_drive, std::size_t i_coupling) const {
        return cells[i_drive * coupling_grid.size() + i_coupling];
    }
};

namespace detail {

struct SteadyScore {
    double concurrence;
    double residual;
};

inline std::optional<SteadyScore> steady_score(const AffineGenerator& g) {
    try {
        const CoherenceVector v = steady_state(g);
        return SteadyScore{concurrence(density_from_coherence(v)).value, (g.M * v.v - g.w).cwiseAbs().maxCoeff()};
    } catch (const SteadyStateError&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Best steady-state concurrence over the angle grid for one (drive, coupling)
/// cell. Any drive sign is accepted. Tuples whose stationary state is not
/// unique are skipped and counted.
inline CellResult optimize_cell(double drive, double coupling, const AngleGrid& grid,
                                const std::vector<QubitClass>& qc, const std::vector<TupleClass>& classes) {
    const ModelParams model = ModelParams::stabilize(drive, coupling);
    validate(model);
    CellResult r;
    r.drive = drive;
    r.coupling = coupling;
    if (const auto s = detail::steady_score(build_generator(model, FeedbackParams::none()))) r.none = s->concurrence;
    for (const TupleClass c : classes) {
        const auto s = detail::steady_score(generator_from_amplitudes(model, {qc[c.first].amplitudes, qc[c.second].amplitudes}));
        if (!s) {
            r.singular_tuples += qc[c.first].members.size() * qc[c.second].members.size();
            continue;
        }
        if (!r.feedback || s->concurrence > *r.feedback + kTieTolerance) {
            r.feedback = s->concurrence;
            r.residual = s->residual;
            r.best = representative(grid, qc, c);
        }
    }
    return r;
}

inline CellResult optimize_cell(double drive, double coupling, const AngleGrid& grid = AngleGrid::standard()) {
    const auto qc = qubit_classes(grid);
    return optimize_cell(drive, coupling, grid, qc, tuple_classes(qc.size()));
}

/// Drive amplitude maximizing the feedback surface per coupling value; ties
/// go to the smaller drive, missing cells are skipped.
inline std::vector<CurvePoint> drive_curve(const StabilizationResult& s) {
    std::vector<CurvePoint> curve;
    for (std::size_t j = 0; j < s.coupling_grid.size(); ++j) {
        CurvePoint p;
        p.coupling = s.coupling_grid[j];
        for (std::size_t i = 0; i < s.drive_grid.size(); ++i) {
            const CellResult& c = s.cell(i, j);
            if (c.missing()) continue;
            const bool better = !p.drive || *c.feedback > p.concurrence + kTieTolerance ||
                                (std::abs(*c.feedback - p.concurrence) <= kTieTolerance && c.drive < *p.drive);
            if (better) {
                p.drive = c.drive;
                p.concurrence = *c.feedback;
                p.angles = c.best;
            }
        }
        curve.push_back(p);
    }
    return curve;
}

inline StabilizationResult optimize_stabilization(const std::vector<double>& drive_grid,
                                                  const std::vector<double>& coupling_grid,
                                                  const AngleGrid& grid = AngleGrid::standard(),
                                                  unsigned workers = 1) {
    if (drive_grid.empty() || coupling_grid.empty()) throw ValidationError("stabilization: empty drive or coupling grid");
    for (double a : drive_grid)
        if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("stabilization: drive values must be finite and >= 0");
    for (double j : coupling_grid)
        if (!std::isfinite(j)) throw ValidationError("stabilization: non-finite coupling");
    const auto qc = qubit_classes(grid);
    const auto classes = tuple_classes(qc.size());

    StabilizationResult r;
    r.drive_grid = drive_grid;
    r.coupling_grid = coupling_grid;
    r.cells.resize(drive_grid.size() * coupling_grid.size());
    parallel_for(r.cells.size(), workers, [&](std::size_t k) {
        r.cells[k] = optimize_cell(drive_grid[k / coupling_grid.size()], coupling_grid[k % coupling_grid.size()],
                                   grid, qc, classes);
    });
    r.curve = drive_curve(r);
    return r;
}

/// lo, lo + step, ..., hi inclusive; values are rounded to 12 decimals so
/// 0.1-spaced grids print cleanly.
inline std::vector<double> linear_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
        throw ValidationError("grid: need lo <= hi and step > 0");
    std::vector<double> g;
    for (long k = 0;; ++k) {
        const double x = lo + static_cast<double>(k) * step;
        if (x > hi + 1e-9 * step) break;
        g.push_back(std::round(x * 1e12) / 1e12);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline void csv_value(std::ostream& os, std::optional<double> x) {
    if (x) {
        write_full_precision(os, *x);
    } else {
        os << "nan";
    }
}

inline void csv_tuple(std::ostream& os, const AngleTuple& t) {
    for (double x : t.as_array()) {
        os << ',';
        write_full_precision(os, x);
    }
}

inline nlohmann::json optional_json(std::optional<double> x) { return x ? nlohmann::json(*x) : nlohmann::json(); }

} // namespace detail

/// t,C_feedback,C_none
inline void write_preservation_csv(std::ostream& os, const PreservationResult& r) {
    os << "t,C_feedback,C_none\n";
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        write_full_precision(os, r.times[k]);
        os << ',';
        write_full_precision(os, r.avg_concurrence_feedback[k]);
        os << ',';
        write_full_precision(os, r.avg_concurrence_none[k]);
        os << '\n';
    }
}

inline nlohmann::json to_json(const PreservationResult& r) {
    nlohmann::json per_time = nlohmann::json::array();
    for (std::size_t k = 0; k < r.times.size(); ++k)
        per_time.push_back({{"t", r.times[k]}, {"angles", to_json(r.best_per_time[k])}, {"C", r.best_per_time_value[k]}});
    nlohmann::json equivalent = nlohmann::json::array();
    for (const auto& t : r.equivalent_to_best) equivalent.push_back(to_json(t));
    return {
        {"version", kVersion},
        {"times", r.times},
        {"C_feedback", r.avg_concurrence_feedback},
        {"C_none", r.avg_concurrence_none},
        {"best_angles", to_json(r.best)},
        {"best_time_average", r.best_score},
        {"equivalent_angles", equivalent},
        {"best_angles_per_time", per_time},
        {"ensemble", {{"seed", r.seed}, {"N", r.count}, {"coarse_N", r.coarse_count}}},
        {"search", {{"classes", r.classes_total}, {"refined_classes", r.classes_refined}}},
        {"drive", r.drive},
    };
}

/// alpha,J,C_feedback,C_none,delta,a1,b1,a2,b2; missing values print as nan.
inline void write_stabilization_csv(std::ostream& os, const StabilizationResult& r) {
    os << "alpha,J,C_feedback,C_none,delta,a1,b1,a2,b2\n";
    for (const CellResult& c : r.cells) {
        write_full_precision(os, c.drive);
        os << ',';
        write_full_precision(os, c.coupling);
        os << ',';
        detail::csv_value(os, c.feedback);
        os << ',';
        detail::csv_value(os, c.none);
        os << ',';
        detail::csv_value(os, c.delta());
        if (c.missing()) {
            os << ",nan,nan,nan,nan";
        } else {
            detail::csv_tuple(os, c.best);
        }
        os << '\n';
    }
}

/// J,alpha,C_feedback,a1,b1,a2,b2: the drive curve and the angles along it.
inline void write_curve_csv(std::ostream& os, const StabilizationResult& r) {
    os << "J,alpha,C_feedback,a1,b1,a2,b2\n";
    for (const CurvePoint& p : r.curve) {
        write_full_precision(os, p.coupling);
        os << ',';
        detail::csv_value(os, p.drive);
        os << ',';
        detail::csv_value(os, p.drive ? std::optional(p.concurrence) : std::nullopt);
        if (p.drive) {
            detail::csv_tuple(os, p.angles);
        } else {
            os << ",nan,nan,nan,nan";
        }
        os << '\n';
    }
}

inline nlohmann::json to_json(const StabilizationResult& r) {
    using nlohmann::json;
    json fb = json::array(), none = json::array(), delta = json::array(), angles = json::array(),
         residual = json::array(), singular = json::array();
    for (std::size_t i = 0; i < r.drive_grid.size(); ++i) {
        json f = json::array(), n = json::array(), d = json::array(), a = json::array(), res = json::array(),
             s = json::array();
        for (std::size_t j = 0; j < r.coupling_grid.size(); ++j) {
            const CellResult& c = r.cell(i, j);
            f.push_back(detail::optional_json(c.feedback));
            n.push_back(detail::optional_json(c.none));
            d.push_back(detail::optional_json(c.delta()));
            a.push_back(c.missing() ? json() : to_json(c.best));
            res.push_back(c.missing() ? json() : json(c.residual));
            s.push_back(c.singular_tuples);
        }
        fb.push_back(f);
        none.push_back(n);
        delta.push_back(d);
        angles.push_back(a);
        residual.push_back(res);
        singular.push_back(s);
    }
    json curve = json::array();
    for (const CurvePoint& p : r.curve)
        curve.push_back({{"J", p.coupling},
                         {"alpha", detail::optional_json(p.drive)},
                         {"C", p.drive ? json(p.concurrence) : json()},
                         {"angles", p.drive ? to_json(p.angles) : json()}});
    return {
        {"version", kVersion},
        {"drive_grid", r.drive_grid},
        {"coupling_grid", r.coupling_grid},
        {"surface_feedback", fb},
        {"surface_none", none},
        {"delta", delta},
        {"best_angles", angles},
        {"residual", residual},
        {"singular_tuples", singular},
        {"curve", curve},
        {"tolerances", {{"steady_max_condition", kMaxSteadyCondition}, {"steady_residual", kSteadyResidual}}},
    };
}

} // namespace qfb
