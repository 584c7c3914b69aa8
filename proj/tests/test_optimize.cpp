#include <cstring>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "qfb/optimize.hpp"
#include "test_support.hpp"

using namespace qfb;
using qfb::testing::kPi;
using qfb::testing::uniform;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double steady_concurrence(const ModelParams& m, const FeedbackParams& p) {
    return concurrence(density_from_coherence(steady_state(build_generator(m, p)))).value;
}

PreservationOptions small_search(unsigned workers) {
    PreservationOptions o;
    o.grid = AngleGrid::uniform(kPi / 2);
    o.times = time_grid(1.0, 0.25);
    o.sampler = {11, 200};
    o.coarse_count = 0;
    o.workers = workers;
    return o;
}

} // namespace

TEST(AngleGrid, StandardHasTwentyFourPoints) {
    const AngleGrid g = AngleGrid::standard();
    ASSERT_EQ(g.size(), 24u);
    EXPECT_EQ(g.values.front(), 0.0);
    EXPECT_NEAR(g.values.back(), 23 * kPi / 12, 1e-15);
}

TEST(AngleGrid, Validation) {
    EXPECT_THROW(AngleGrid::uniform(0.0), ValidationError);
    EXPECT_THROW(validate(AngleGrid{{0.0, 0.0}}), ValidationError);
    EXPECT_THROW(validate(AngleGrid{{2 * kPi}}), ValidationError);
    EXPECT_THROW(validate(AngleGrid{}), ValidationError);
}

TEST(Grids, TimeAndLinearGrids) {
    const auto t = time_grid(3.0, 0.05);
    ASSERT_EQ(t.size(), 61u);
    EXPECT_DOUBLE_EQ(t.back(), 3.0);
    const auto j = linear_grid(-2.0, 2.0, 0.1);
    ASSERT_EQ(j.size(), 41u);
    EXPECT_EQ(j[20], 0.0);
    EXPECT_EQ(j[25], 0.5);
    EXPECT_THROW(linear_grid(1.0, 0.0, 0.1), ValidationError);
}

TEST(Classes, StandardGridCounts) {
    // 2 classes with sin(beta) = 0 plus (24 * 22) / 2 pairs (a, b) ~ (a + pi, 2 pi - b).
    const auto qc = qubit_classes(AngleGrid::standard());
    EXPECT_EQ(qc.size(), 266u);
    std::size_t members = 0;
    for (const auto& c : qc) members += c.members.size();
    EXPECT_EQ(members, 576u);
}

TEST(Classes, MembersShareTheGenerator) {
    const AngleGrid grid = AngleGrid::uniform(kPi / 6);
    const auto qc = qubit_classes(grid);
    const auto classes = tuple_classes(qc.size());
    const ModelParams m = ModelParams::stabilize(0.7, -1.1);
    for (std::size_t k = 0; k < classes.size(); k += 37) {
        const auto members = class_members(grid, qc, classes[k]);
        EXPECT_EQ(members.front(), representative(grid, qc, classes[k]));
        const AffineGenerator ref = build_generator(m, members.front().params());
        for (const auto& t : members) {
            EXPECT_LT((build_generator(m, t.params()).M - ref.M).cwiseAbs().maxCoeff(), 1e-15);
        }
    }
}

TEST(Classes, RepresentativesAreLexicographicallyOrdered) {
    const AngleGrid grid = AngleGrid::uniform(kPi / 4);
    const auto qc = qubit_classes(grid);
    const auto classes = tuple_classes(qc.size());
    for (std::size_t k = 1; k < classes.size(); ++k)
        EXPECT_LT(representative(grid, qc, classes[k - 1]).as_array(), representative(grid, qc, classes[k]).as_array());
    EXPECT_EQ(representative(grid, qc, classes[0]), AngleTuple{});
}

TEST(AverageConcurrence, InitialEntryIsEnsembleMean) {
    const SamplerConfig cfg{5, 300};
    double mean = 0.0;
    for (const auto& a : sample_ensemble(cfg)) mean += concurrence(pure_state_from_angles(a)).value;
    mean /= 300.0;
    std::mt19937_64 rng(1);
    const std::vector<double> times{0.0, 0.5};
    for (int n = 0; n < 3; ++n) {
        const auto c = average_concurrence(ModelParams::preserve(uniform(rng, 0, 2)), qfb::testing::random_feedback(rng),
                                           times, cfg);
        EXPECT_NEAR(c[0], mean, 1e-15);
    }
}

TEST(AverageConcurrence, UndrivenDecayWithoutFeedback) {
    const auto times = time_grid(10.0, 0.5);
    const auto c = average_concurrence(ModelParams::preserve(0.0), FeedbackParams::none(), times, {3, 1000});
    for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LE(c[k], c[k - 1] + 1e-12);
    EXPECT_LT(c.back(), 0.01);
}

TEST(AverageConcurrence, NonUniformTimesMatchUniformSubset) {
    const auto fb = FeedbackParams::from_alpha_beta(1.0, 2.0, 3.0, 4.0);
    const auto m = ModelParams::preserve(0.4);
    const std::vector<double> uniform_t{0.0, 0.5, 1.0, 1.5};
    const std::vector<double> skewed{0.5, 1.5};
    const auto a = average_concurrence(m, fb, uniform_t, {8, 100});
    const auto b = average_concurrence(m, fb, skewed, {8, 100});
    EXPECT_NEAR(a[1], b[0], 1e-12);
    EXPECT_NEAR(a[3], b[1], 1e-12);
}

TEST(AverageConcurrence, RejectsStabilizationModel) {
    const std::vector<double> times{0.0};
    EXPECT_THROW(average_concurrence(ModelParams::stabilize(0.5, 0.5), {}, times, {1, 10}), ValidationError);
    EXPECT_THROW(average_concurrence(ModelParams::preserve(0.5), {}, times, {1, 0}), ValidationError);
}

TEST(AverageConcurrence, WorkerCountDoesNotChangeBits) {
    const auto times = time_grid(2.0, 0.1);
    const auto fb = FeedbackParams::from_alpha_beta(0.5, 2.5, 4.0, 1.0);
    EXPECT_TRUE(same_bits(average_concurrence(ModelParams::preserve(0.3), fb, times, {4, 500}, 1),
                          average_concurrence(ModelParams::preserve(0.3), fb, times, {4, 500}, 4)));
}

TEST(AverageConcurrence, GammaExclusionIsLossless) {
    std::mt19937_64 rng(12);
    const AngleGrid grid = AngleGrid::standard();
    const std::vector<double> times{0.0, 0.4, 1.0};
    for (int n = 0; n < 10; ++n) {
        auto pick = [&] { return grid.values[rng() % grid.size()]; };
        FeedbackParams p = FeedbackParams::from_alpha_beta(pick(), pick(), pick(), pick());
        FeedbackParams q = p;
        q.qubit[0].gamma = kPi / 3;
        q.qubit[1].gamma = kPi;
        const auto pm = ModelParams::preserve(0.0);
        const auto a = average_concurrence(pm, p, times, {2, 100});
        const auto b = average_concurrence(pm, q, times, {2, 100});
        for (std::size_t k = 0; k < times.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
        const auto sm = ModelParams::stabilize(uniform(rng, 0.1, 2.0), uniform(rng, -2.0, 2.0));
        EXPECT_NEAR(steady_concurrence(sm, p), steady_concurrence(sm, q), 1e-12);
    }
}

TEST(Preservation, OptimumDominatesEveryTuple) {
    const PreservationOptions o = small_search(1);
    const PreservationResult r = optimize_preservation(o);
    for (double a1 : o.grid.values)
        for (double b1 : o.grid.values)
            for (double a2 : o.grid.values)
                for (double b2 : o.grid.values) {
                    const auto c = average_concurrence(ModelParams::preserve(0.0),
                                                       FeedbackParams::from_alpha_beta(a1, b1, a2, b2), o.times,
                                                       o.sampler);
                    double avg = 0.0;
                    for (double x : c) avg += x;
                    avg /= static_cast<double>(c.size());
                    EXPECT_LE(avg, r.best_score + kTieTolerance);
                    for (std::size_t k = 0; k < c.size(); ++k)
                        EXPECT_LE(c[k], r.best_per_time_value[k] + kTieTolerance);
                }
    EXPECT_GE(r.best_score, detail::time_average(r.avg_concurrence_none));
}

TEST(Preservation, IndependentOfWorkerCount) {
    const PreservationResult a = optimize_preservation(small_search(1));
    const PreservationResult b = optimize_preservation(small_search(3));
    EXPECT_EQ(a.best, b.best);
    EXPECT_TRUE(same_bits(a.avg_concurrence_feedback, b.avg_concurrence_feedback));
    EXPECT_TRUE(same_bits(a.best_per_time_value, b.best_per_time_value));
    EXPECT_EQ(nlohmann::json(to_json(a)).dump(), nlohmann::json(to_json(b)).dump());
}

TEST(Preservation, NoFeedbackCurveMatchesDirectEvaluation) {
    const PreservationOptions o = small_search(1);
    const PreservationResult r = optimize_preservation(o);
    EXPECT_TRUE(same_bits(r.avg_concurrence_none,
                          average_concurrence(ModelParams::preserve(0.0), FeedbackParams::none(), o.times, o.sampler)));
}

TEST(Preservation, InitialTimeIsDegenerate) {
    // Every tuple ties at t = 0, so the smallest tuple wins there.
    const PreservationResult r = optimize_preservation(small_search(1));
    EXPECT_EQ(r.best_per_time[0], AngleTuple{});
    EXPECT_EQ(r.avg_concurrence_feedback[0], r.avg_concurrence_none[0]);
}

TEST(Preservation, FullShortlistEqualsSingleStage) {
    PreservationOptions o = small_search(1);
    const PreservationResult single = optimize_preservation(o);
    o.coarse_count = 50;
    o.shortlist_fraction = 1.0;
    const PreservationResult two = optimize_preservation(o);
    EXPECT_EQ(single.best, two.best);
    EXPECT_TRUE(same_bits(single.avg_concurrence_feedback, two.avg_concurrence_feedback));
    EXPECT_EQ(two.coarse_count, 50u);
}

TEST(Preservation, TwoStageKeepsBaselineAndShortlist) {
    PreservationOptions o = small_search(1);
    o.coarse_count = 50;
    o.shortlist_fraction = 0.05;
    const PreservationResult r = optimize_preservation(o);
    EXPECT_LT(r.classes_refined, r.classes_total);
    EXPECT_GE(r.classes_refined, 2u);
    EXPECT_EQ(r.count, 200u);
    EXPECT_FALSE(r.equivalent_to_best.empty());
    EXPECT_EQ(r.equivalent_to_best.front(), r.best);
}

TEST(Preservation, RefinedGridNeverLoses) {
    PreservationOptions coarse = small_search(1);
    PreservationOptions fine = coarse;
    fine.grid = AngleGrid::uniform(kPi / 4);
    EXPECT_GE(optimize_preservation(fine).best_score, optimize_preservation(coarse).best_score - 1e-12);
}

TEST(Stabilization, UndrivenNoFeedbackIsGround) {
    for (double j : {-1.5, 0.0, 0.7}) {
        const CellResult c = optimize_cell(0.0, j, AngleGrid::uniform(kPi / 2));
        ASSERT_TRUE(c.none.has_value());
        EXPECT_EQ(*c.none, 0.0);
    }
}

TEST(Stabilization, SingularTuplesAreCounted) {
    // beta_1 = beta_2 = pi conserves populations when undriven.
    const CellResult c = optimize_cell(0.0, 0.3, AngleGrid::uniform(kPi / 2));
    EXPECT_GT(c.singular_tuples, 0u);
    EXPECT_FALSE(c.missing());
}

TEST(Stabilization, SurfaceProperties) {
    const AngleGrid grid = AngleGrid::uniform(kPi / 4);
    const StabilizationResult r = optimize_stabilization({0.0, 0.5, 1.0}, {-1.0, 0.0, 1.0}, grid, 2);
    ASSERT_EQ(r.cells.size(), 9u);
    for (const CellResult& c : r.cells) {
        ASSERT_FALSE(c.missing());
        ASSERT_TRUE(c.delta().has_value());
        EXPECT_GE(*c.delta(), -1e-12);
        EXPECT_GE(*c.feedback, 0.0);
        EXPECT_LE(*c.feedback, 1.0);
        EXPECT_LT(c.residual, 1e-10);
        EXPECT_NEAR(steady_concurrence(ModelParams::stabilize(c.drive, c.coupling), c.best.params()), *c.feedback,
                    1e-15);
    }
    ASSERT_EQ(r.curve.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) {
        ASSERT_TRUE(r.curve[j].drive.has_value());
        for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(*r.cell(i, j).feedback, r.curve[j].concurrence + kTieTolerance);
    }
}

TEST(Stabilization, MirrorSymmetryInDrive) {
    const AngleGrid grid = AngleGrid::uniform(kPi / 4);
    for (auto [a, j] : {std::pair{0.4, 0.3}, std::pair{1.0, -0.8}, std::pair{1.7, 1.2}}) {
        const CellResult plus = optimize_cell(a, j, grid);
        const CellResult minus = optimize_cell(-a, j, grid);
        EXPECT_NEAR(*plus.feedback, *minus.feedback, 1e-10);
        EXPECT_NEAR(*plus.none, *minus.none, 1e-10);
    }
}

TEST(Stabilization, RefinedGridNeverLoses) {
    const CellResult coarse = optimize_cell(0.6, 0.5, AngleGrid::uniform(kPi / 4));
    const CellResult fine = optimize_cell(0.6, 0.5, AngleGrid::uniform(kPi / 8));
    EXPECT_GE(*fine.feedback, *coarse.feedback - 1e-12);
}

TEST(Stabilization, CurveSkipsMissingAndPrefersSmallerDrive) {
    StabilizationResult s;
    s.drive_grid = {0.0, 0.5, 1.0};
    s.coupling_grid = {0.0, 1.0};
    s.cells.resize(6);
    auto set = [&](std::size_t i, std::size_t j, std::optional<double> v) {
        CellResult& c = s.cells[i * 2 + j];
        c.drive = s.drive_grid[i];
        c.coupling = s.coupling_grid[j];
        c.feedback = v;
    };
    set(0, 0, 0.1);
    set(1, 0, 0.3);
    set(2, 0, 0.3);
    set(0, 1, std::nullopt);
    set(1, 1, std::nullopt);
    set(2, 1, std::nullopt);
    const auto curve = drive_curve(s);
    EXPECT_EQ(curve[0].drive, 0.5);
    EXPECT_EQ(curve[0].concurrence, 0.3);
    EXPECT_FALSE(curve[1].drive.has_value());
}

TEST(Stabilization, FlatRowPicksSmallestDrive) {
    // Without coupling the steady state is unentangled for every tuple and
    // drive; roundoff must not choose the curve point or the angles.
    const StabilizationResult r = optimize_stabilization({0.0, 0.5, 1.0}, {0.0}, AngleGrid::uniform(kPi / 4));
    for (const CellResult& c : r.cells) {
        EXPECT_LT(*c.feedback, 1e-12);
        EXPECT_EQ(c.best, AngleTuple{});
    }
    EXPECT_EQ(*r.curve[0].drive, 0.0);
}

TEST(Stabilization, RejectsBadGrids) {
    EXPECT_THROW(optimize_stabilization({}, {0.0}), ValidationError);
    EXPECT_THROW(optimize_stabilization({-0.1}, {0.0}), ValidationError);
}

TEST(Export, PreservationCsv) {
    std::ostringstream os;
    write_preservation_csv(os, optimize_preservation(small_search(1)));
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "t,C_feedback,C_none");
    std::size_t rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    EXPECT_EQ(rows, 5u);
}

TEST(Export, StabilizationCsvFlagsMissingCells) {
    StabilizationResult s;
    s.drive_grid = {0.0};
    s.coupling_grid = {0.5};
    s.cells.resize(1);
    s.cells[0].coupling = 0.5;
    s.curve = drive_curve(s);
    std::ostringstream os, curve;
    write_stabilization_csv(os, s);
    write_curve_csv(curve, s);
    EXPECT_EQ(os.str(), "alpha,J,C_feedback,C_none,delta,a1,b1,a2,b2\n0,0.5,nan,nan,nan,nan,nan,nan,nan\n");
    EXPECT_EQ(curve.str(), "J,alpha,C_feedback,a1,b1,a2,b2\n0.5,nan,nan,nan,nan,nan,nan\n");
    const nlohmann::json j = to_json(s);
    EXPECT_TRUE(j["surface_feedback"][0][0].is_null());
    EXPECT_EQ(j["version"], kVersion);
}
