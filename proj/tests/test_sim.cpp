#include "tiemb/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tiemb;

namespace {

Vec state(double px, double vx, double py, double vy) {
    Vec x(4);
    x << px, vx, py, vy;
    return x;
}

/// Short single-target scenario that keeps Monte Carlo tests fast.
Scenario small_scenario() {
    Scenario s = default_scenario();
    s.duration = 12;
    s.targets = {{2, 12, state(-20, 1, 5, 0.5)}};
    return s;
}

}  // namespace

TEST(Scenario, Defaults) {
    const Scenario s = default_scenario();
    EXPECT_EQ(s.model().meas_dim(), 144);
    ASSERT_EQ(s.birth.size(), 1U);
    EXPECT_DOUBLE_EQ(s.birth[0].p_b, 1e-6);
    EXPECT_DOUBLE_EQ(s.sigma_q, 0.5);
    EXPECT_DOUBLE_EQ(s.p_survival, 0.99);
    EXPECT_EQ(s.duration, 75);
    ASSERT_EQ(s.targets.size(), 4U);
    EXPECT_EQ(s.targets[0].birth, 3);
    EXPECT_EQ(s.targets[0].death, 74);
    EXPECT_NO_THROW(s.validate());
}

TEST(Scenario, RejectsBadTargets) {
    Scenario s = default_scenario();
    s.targets.push_back({10, 10, std::nullopt});
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.targets.back() = {10, 90, std::nullopt};
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Motion, NcvMatchesClosedForm) {
    const MotionModel m = MotionModel::ncv(2.0, 0.5, 0.9);
    const double q = 0.25;
    EXPECT_NEAR(m.Q(0, 0), q * 8.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.Q(0, 1), q * 2.0, 1e-15);
    EXPECT_NEAR(m.Q(1, 1), q * 2.0, 1e-15);
    EXPECT_NEAR(m.Q(2, 2), q * 8.0 / 3.0, 1e-15);
    EXPECT_EQ(m.Q(0, 2), 0.0);
    EXPECT_EQ(m.F(0, 1), 2.0);
    EXPECT_EQ(m.F(2, 3), 2.0);
}

TEST(Truth, NoProcessNoiseGivesStraightLines) {
    Scenario s = small_scenario();
    s.sigma_q = 0.0;
    Rng rng(4);
    const auto truth = generate_truth(s, rng);
    ASSERT_EQ(truth.size(), 1U);
    const auto& t = truth[0];
    EXPECT_EQ(t.t_start, 2);
    EXPECT_EQ(t.t_end(), 11);
    for (int k = 2; k <= 11; ++k) {
        const double dt = k - 2;
        EXPECT_NEAR(t.at(k)(0), -20 + dt, 1e-12);
        EXPECT_NEAR(t.at(k)(2), 5 + 0.5 * dt, 1e-12);
    }
}

TEST(Truth, SeedDeterminism) {
    const Scenario s = default_scenario();
    Rng a(9), b(9), c(10);
    const auto ta = generate_truth(s, a);
    const auto tb = generate_truth(s, b);
    const auto tc = generate_truth(s, c);
    ASSERT_EQ(ta.size(), 4U);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        ASSERT_EQ(ta[i].states.size(), tb[i].states.size());
        for (std::size_t j = 0; j < ta[i].states.size(); ++j) EXPECT_EQ(ta[i].states[j], tb[i].states[j]);
    }
    EXPECT_NE(ta[0].states[0], tc[0].states[0]);
    // Alive at birth..death-1 only.
    EXPECT_EQ(ta[1].t_start, 16);
    EXPECT_EQ(ta[1].t_end(), 63);
}

TEST(Truth, OneStepDisplacementHasProcessCovariance) {
    Scenario s = small_scenario();
    s.targets = {{1, 3, state(0, 0, 0, 0)}};
    const Mat Q = s.motion().Q;
    const int draws = 10000;
    Mat sum = Mat::Zero(4, 4);
    Rng rng(5);
    for (int i = 0; i < draws; ++i) {
        const Vec d = generate_truth(s, rng)[0].at(2);
        sum += d * d.transpose();
    }
    const Mat cov = sum / draws;
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(cov(i, i), Q(i, i), 0.05 * Q(i, i)) << i;
    EXPECT_NEAR(cov(0, 1), Q(0, 1), 0.05 * Q(0, 1));
}

TEST(Measurements, EmptySceneIsRayleigh) {
    Scenario s = small_scenario();
    const RicianGridModel model = s.model();
    Rng rng(6);
    const auto z = generate_measurements({}, model, 400, rng);
    double sum = 0.0;
    for (const auto& v : z) {
        EXPECT_TRUE((v.array() >= 0.0).all());
        sum += v.sum();
    }
    const double mean = sum / (400.0 * 144.0);
    EXPECT_NEAR(mean, 2.0 * std::sqrt(M_PI / 2.0), 0.01 * 2.0 * std::sqrt(M_PI / 2.0));
}

TEST(Measurements, TargetAtCellCentreRaisesThatCell) {
    const RicianGridModel model = default_scenario().model();
    const Vec c0 = model.cell_centers().row(0).transpose();
    EXPECT_DOUBLE_EQ(c0(0), -55.0);
    EXPECT_DOUBLE_EQ(c0(1), -55.0);
    LabeledTrajectory t;
    t.label = 0;
    t.t_start = 1;
    const int n = 100000;
    for (int k = 0; k < n; ++k) t.states.push_back(state(c0(0), 0, c0(1), 0));
    Rng rng(7);
    const auto z = generate_measurements({t}, model, n, rng);
    double sum = 0.0;
    for (const auto& v : z) sum += v(0);
    const double expected = rician_mean(10.0, 2.0);
    EXPECT_NEAR(sum / n, expected, 0.01 * expected);
}

TEST(Measurements, CoincidentTargetsAddNoncentrality) {
    const RicianGridModel model = default_scenario().model();
    LabeledTrajectory a;
    a.label = 0;
    a.t_start = 1;
    const int n = 50000;
    for (int k = 0; k < n; ++k) a.states.push_back(state(-55, 0, -55, 0));
    LabeledTrajectory b = a;
    b.label = 1;
    Rng rng(8);
    const auto z = generate_measurements({a, b}, model, n, rng);
    double sum = 0.0;
    for (const auto& v : z) sum += v(0);
    const double expected = rician_mean(20.0, 2.0);
    EXPECT_NEAR(sum / n, expected, 0.01 * expected);
}

TEST(TruthAt, AliveAndAllModes) {
    LabeledTrajectory t;
    t.label = 3;
    t.t_start = 2;
    for (int i = 0; i < 4; ++i) t.states.push_back(state(i, 1, 0, 0));
    const LabeledTrajectorySet truth{t};
    EXPECT_TRUE(truth_at(truth, 1, TrajectoryMode::all).empty());
    EXPECT_EQ(truth_at(truth, 3, TrajectoryMode::alive)[0].states.size(), 2U);
    EXPECT_TRUE(truth_at(truth, 7, TrajectoryMode::alive).empty());
    const auto all = truth_at(truth, 7, TrajectoryMode::all);
    ASSERT_EQ(all.size(), 1U);
    EXPECT_EQ(all[0].states.size(), 4U);
}

TEST(FilterNames, MapToVariants) {
    const FilterConfig base;
    EXPECT_TRUE(filter_from_name("tiemb-iplf", base).exchange);
    EXPECT_EQ(filter_from_name("tiemb-ukf", base).variant, UpdateVariant::ukf);
    EXPECT_FALSE(filter_from_name("timb-iplf", base).exchange);
    EXPECT_EQ(filter_from_name("timb-iplf", base).variant, UpdateVariant::iplf);
    EXPECT_THROW((void)filter_from_name("tiemb", base), std::invalid_argument);
}

TEST(MonteCarlo, FiltersShareMeasurementsAndRunsAreReproducible) {
    const Scenario s = small_scenario();
    const FilterConfig base;
    const std::vector<NamedFilter> filters{{"tiemb-iplf", filter_from_name("tiemb-iplf", base)},
                                           {"timb-ukf", filter_from_name("timb-ukf", base)}};
    MonteCarloOptions opt;
    opt.runs = 3;
    opt.base_seed = 11;
    opt.workers = 1;
    const MonteCarloResult a = run_monte_carlo(s, filters, opt);
    opt.workers = 2;
    const MonteCarloResult b = run_monte_carlo(s, filters, opt);
    ASSERT_EQ(a.runs.size(), 3U);
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        const auto& ra = a.runs[i];
        const auto& rb = b.runs[i];
        EXPECT_EQ(ra.seed, 11U + i);
        ASSERT_EQ(ra.filters.size(), 2U);
        EXPECT_EQ(ra.filters[0].input_digest, ra.filters[1].input_digest);
        EXPECT_EQ(ra.filters[0].input_digest, measurement_digest(ra.measurements));
        for (std::size_t f = 0; f < 2; ++f) {
            EXPECT_FALSE(ra.filters[f].failed);
            ASSERT_EQ(ra.filters[f].sums.size(), 12U);
            for (std::size_t k = 0; k < 12; ++k) {
                EXPECT_EQ(ra.filters[f].sums[k].total, rb.filters[f].sums[k].total);
                EXPECT_EQ(ra.filters[f].sums[k].switch_cost, rb.filters[f].sums[k].switch_cost);
            }
        }
    }
    EXPECT_NE(a.runs[0].filters[0].input_digest, a.runs[1].filters[0].input_digest);
}
