#pragma once

#include "tiemb/config.hpp"
#include "tiemb/metrics.hpp"
#include "tiemb/sim.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tiemb {

/// RMS curves and scenario averages for one filter x L-scan column.
struct FilterSummary {
    std::string name;
    int lscan = 1;
    std::vector<MetricResult> curve;  ///< RMS over runs at k = 1..T
    MetricResult summary;             ///< RMS over time of the curve
    int failed_runs = 0;

    [[nodiscard]] std::string column() const { return name + ":L" + std::to_string(lscan); }
};

struct ExperimentResult {
    RunConfig config;
    MonteCarloResult mc;
    std::vector<FilterSummary> filters;

    [[nodiscard]] int failed_runs() const;
};

[[nodiscard]] std::vector<FilterSummary> aggregate(const MonteCarloResult& mc, const std::vector<NamedFilter>& filters,
                                                   const MetricConfig& metric);

[[nodiscard]] ExperimentResult run_experiment(const RunConfig& config);

/// curves.csv: filter,lscan,k,total,loc,missed,false,switch.
void write_curves(const std::vector<FilterSummary>& filters, const std::filesystem::path& path);
/// summary.csv: one row per cost component, one column per filter x L-scan.
void write_summary(const std::vector<FilterSummary>& filters, const std::filesystem::path& path);
void write_timing(const MonteCarloResult& mc, const std::filesystem::path& path);
void write_run_records(const MonteCarloResult& mc, const std::filesystem::path& dir);

/// Writes curves.csv, summary.csv, timing.csv and runs/<i>.json under out_dir.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

/// Trajectory files hold an array of {label, t_start, states: [[px,vx,py,vy], ...]},
/// optionally wrapped as {"trajectories": [...]}.
[[nodiscard]] nlohmann::json trajectories_to_json(const LabeledTrajectorySet& set);
[[nodiscard]] LabeledTrajectorySet trajectories_from_json(const nlohmann::json& j);
[[nodiscard]] LabeledTrajectorySet load_trajectories(const std::filesystem::path& path);

/// Online metric of a stored estimate against a truth set at k = 1..K, where
/// K is the last step covered by either set.
[[nodiscard]] std::vector<MetricResult> evaluate_curve(const LabeledTrajectorySet& est,
                                                       const LabeledTrajectorySet& truth, const MetricConfig& cfg);
/// k,total,localisation,missed,false,switch.
void write_metric_csv(const std::vector<MetricResult>& curve, const std::filesystem::path& path);

}  // namespace tiemb
