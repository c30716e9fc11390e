#pragma once

#include "tiemb/trajectory.hpp"

#include <utility>
#include <vector>

namespace tiemb {

/// Per-scan GOSPA-style trajectory metric.
///
/// This is an approximation of the multi-scan trajectory GOSPA metric: each
/// scan is solved as an independent optimal assignment, and track switches
/// are charged between consecutive scans. Localisation, missed, false and
/// switch costs are accumulated in d^p units so that
/// total^p = loc^p + missed^p + false^p + switch^p.
struct MetricConfig {
    double p = 2.0;
    double c = 10.0;
    double gamma = 1.0;

    void validate() const;
};

struct MetricResult {
    double total = 0.0;
    double localisation = 0.0;
    double missed = 0.0;
    double false_cost = 0.0;
    double switch_cost = 0.0;
};

/// Optimal partial assignment for one scan.
struct StepAssignment {
    std::vector<std::pair<int, int>> pairs;  ///< (estimate index, truth index), only pairs closer than c
    double localisation = 0.0;               ///< sum of d^p over pairs
    int missed = 0;
    int false_count = 0;

    /// Total cost of the scan in d^p units.
    [[nodiscard]] double cost(const MetricConfig& cfg) const;
};

/// Rows are 2-D points.
[[nodiscard]] StepAssignment assign_step(const Mat& est_points, const Mat& truth_points, const MetricConfig& cfg);

/// Minimum-cost assignment of every row of a rows <= cols cost matrix to a
/// distinct column. Returns the column chosen for each row.
[[nodiscard]] std::vector<int> solve_assignment(const Mat& cost);

/// Unnormalised metric over scans 1..k in d^p units (total is the sum).
[[nodiscard]] MetricResult evaluate_sums(const LabeledTrajectorySet& est, const LabeledTrajectorySet& truth, int k,
                                         const MetricConfig& cfg);

/// Online metric at time k: each component is (sum / k)^(1/p).
[[nodiscard]] MetricResult evaluate(const LabeledTrajectorySet& est, const LabeledTrajectorySet& truth, int k,
                                    const MetricConfig& cfg);

/// Converts d^p sums accumulated over k scans to normalised metric values.
[[nodiscard]] MetricResult normalize_sums(const MetricResult& sums, int k, double p);

/// d(k) = sqrt(sum_i d_i^2(k) / (N k)), where squared[i][k-1] holds the
/// unnormalised squared metric of run i at time k.
[[nodiscard]] std::vector<double> rms_over_runs(const std::vector<std::vector<double>>& squared);

/// d_T = sqrt(mean_k d(k)^2).
[[nodiscard]] double rms_over_time(const std::vector<double>& curve);

}  // namespace tiemb
