#pragma once

#include "tiemb/measurement.hpp"
#include "tiemb/metrics.hpp"
#include "tiemb/tmb_filter.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tiemb {

/// Target that exists for birth <= k < death. Without an explicit initial
/// state one is drawn per run (uniform position over the central
/// init_extent square, fixed speed, uniform heading).
struct TargetSpec {
    int birth = 1;
    int death = 2;
    std::optional<Vec> initial;
};

struct Scenario {
    int duration = 75;
    double area_x = 120.0;
    double area_y = 120.0;
    double cell_width = 10.0;
    RicianGridModel::Params rician;
    double period = 1.0;
    double sigma_q = 0.5;
    double p_survival = 0.99;
    BirthModel birth;
    std::vector<TargetSpec> targets;
    double init_extent = 80.0;
    double init_speed = 1.5;

    void validate() const;
    [[nodiscard]] MotionModel motion() const;
    [[nodiscard]] RicianGridModel model() const;
};

/// 120 m x 120 m area centred at the origin, 10 m cells, four targets.
[[nodiscard]] Scenario default_scenario();

[[nodiscard]] LabeledTrajectorySet generate_truth(const Scenario& scenario, Rng& rng);

/// Measurement vectors for k = 1..duration (element k-1 is step k).
[[nodiscard]] std::vector<Vec> generate_measurements(const LabeledTrajectorySet& truth,
                                                     const SuperpositionalModel& model, int duration, Rng& rng);
[[nodiscard]] std::vector<Vec> generate_measurements(const LabeledTrajectorySet& truth, const Scenario& scenario,
                                                     Rng& rng);

/// Ground truth as seen by the evaluator at time k: trajectories alive at k
/// (alive mode) or all trajectories started by k, cut at k.
[[nodiscard]] LabeledTrajectorySet truth_at(const LabeledTrajectorySet& truth, int k, TrajectoryMode mode);

/// Filter kinds accepted by name: tiemb-iplf, tiemb-ukf, timb-iplf, timb-ukf.
[[nodiscard]] FilterConfig filter_from_name(const std::string& name, const FilterConfig& base);

struct NamedFilter {
    std::string name;
    FilterConfig cfg;

    [[nodiscard]] std::string column() const { return name + ":L" + std::to_string(cfg.lscan); }
};

struct CurrentEstimate {
    int label;
    Vec state;
};

struct FilterRun {
    std::string name;
    int lscan = 1;
    bool failed = false;
    std::string error;
    std::vector<MetricResult> sums;                     ///< per step, unnormalised d^p units
    std::vector<std::vector<CurrentEstimate>> current;  ///< per step, latest state of each estimate
    LabeledTrajectorySet final_estimate;
    double seconds = 0.0;
    std::uint64_t input_digest = 0;
};

struct RunRecord {
    int index = 0;
    std::uint64_t seed = 0;
    LabeledTrajectorySet truth;
    std::vector<Vec> measurements;
    std::vector<FilterRun> filters;
};

struct MonteCarloOptions {
    int runs = 1;
    std::uint64_t base_seed = 1;
    int workers = 1;
    MetricConfig metric;
};

struct MonteCarloResult {
    std::vector<RunRecord> runs;
};

/// FNV-1a digest of a measurement sequence.
[[nodiscard]] std::uint64_t measurement_digest(const std::vector<Vec>& measurements);

/// Runs one filter over a measurement sequence and scores it online.
[[nodiscard]] FilterRun run_filter(const Scenario& scenario, const SuperpositionalModel& model,
                                   const NamedFilter& filter, const LabeledTrajectorySet& truth,
                                   const std::vector<Vec>& measurements, const MetricConfig& metric);

/// Run i draws truth and measurements from seed base_seed + i; every filter
/// sees the same measurements. Filter failures are recorded, not thrown.
[[nodiscard]] MonteCarloResult run_monte_carlo(const Scenario& scenario, const std::vector<NamedFilter>& filters,
                                               const MonteCarloOptions& options);

}  // namespace tiemb
