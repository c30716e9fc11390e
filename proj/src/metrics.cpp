#include "tiemb/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tiemb {

namespace {

void check_set(const LabeledTrajectorySet& set, const char* which) {
    std::set<int> labels;
    for (const auto& t : set) {
        if (!labels.insert(t.label).second) {
            std::ostringstream os;
            os << "metric: duplicate label " << t.label << " in " << which << " set";
            throw std::invalid_argument(os.str());
        }
        if (t.states.empty()) {
            std::ostringstream os;
            os << "metric: trajectory " << t.label << " in " << which << " set has no states";
            throw std::invalid_argument(os.str());
        }
        if (t.t_start < 1) {
            std::ostringstream os;
            os << "metric: trajectory " << t.label << " in " << which << " set starts at " << t.t_start
               << ", time steps start at 1";
            throw std::invalid_argument(os.str());
        }
        for (const auto& s : t.states) {
            if (s.size() < 3) throw std::invalid_argument("metric: states must be laid out as [px, vx, py, ...]");
        }
    }
}

/// Positions and labels of the trajectories present at step s.
struct Scan {
    Mat points;
    std::vector<int> labels;
};

Scan scan_at(const LabeledTrajectorySet& set, int s) {
    Scan out;
    std::vector<const Vec*> present;
    for (const auto& t : set) {
        if (t.covers(s)) {
            present.push_back(&t.at(s));
            out.labels.push_back(t.label);
        }
    }
    out.points.resize(static_cast<Index>(present.size()), 2);
    for (std::size_t i = 0; i < present.size(); ++i) {
        out.points(static_cast<Index>(i), 0) = (*present[i])(0);
        out.points(static_cast<Index>(i), 1) = (*present[i])(2);
    }
    return out;
}

}  // namespace

void MetricConfig::validate() const {
    if (!(p >= 1.0)) throw std::invalid_argument("metric: p must be >= 1");
    if (!(c > 0.0)) throw std::invalid_argument("metric: c must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("metric: gamma must be nonnegative");
}

double StepAssignment::cost(const MetricConfig& cfg) const {
    return localisation + std::pow(cfg.c, cfg.p) / 2.0 * (missed + false_count);
}

// Shortest augmenting path with row/column potentials, O(n^2 m).
std::vector<int> solve_assignment(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n > m) throw std::invalid_argument("solve_assignment: more rows than columns");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

StepAssignment assign_step(const Mat& est_points, const Mat& truth_points, const MetricConfig& cfg) {
    const Index ne = est_points.rows();
    const Index nt = truth_points.rows();
    const double cap = std::pow(cfg.c, cfg.p);

    StepAssignment out;
    if (ne > 0 && nt > 0) {
        // Solve with the smaller side as rows; capped pairs cost the same as
        // leaving both points unassigned, so a full matching is optimal.
        const bool est_rows = ne <= nt;
        const Index rows = est_rows ? ne : nt;
        const Index cols = est_rows ? nt : ne;
        Mat cost(rows, cols);
        Mat dist(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) {
                const auto e = est_rows ? est_points.row(i) : est_points.row(j);
                const auto t = est_rows ? truth_points.row(j) : truth_points.row(i);
                dist(i, j) = (e - t).norm();
                cost(i, j) = std::min(std::pow(dist(i, j), cfg.p), cap);
            }
        }
        const std::vector<int> match = solve_assignment(cost);
        for (Index i = 0; i < rows; ++i) {
            const Index j = match[static_cast<std::size_t>(i)];
            if (dist(i, j) >= cfg.c) continue;
            const int ei = static_cast<int>(est_rows ? i : j);
            const int ti = static_cast<int>(est_rows ? j : i);
            out.pairs.emplace_back(ei, ti);
            out.localisation += cost(i, j);
        }
    }
    out.missed = static_cast<int>(nt) - static_cast<int>(out.pairs.size());
    out.false_count = static_cast<int>(ne) - static_cast<int>(out.pairs.size());
    return out;
}

MetricResult evaluate_sums(const LabeledTrajectorySet& est, const LabeledTrajectorySet& truth, int k,
                           const MetricConfig& cfg) {
    cfg.validate();
    if (k < 1) throw std::invalid_argument("metric: evaluation time must be >= 1");
    check_set(est, "estimate");
    check_set(truth, "truth");

    const double half_cap = std::pow(cfg.c, cfg.p) / 2.0;
    const double switch_full = std::pow(cfg.gamma, cfg.p);

    MetricResult sums;
    std::map<int, int> prev_assigned;  // truth label -> estimate label at s-1
    std::set<int> prev_truths;
    for (int s = 1; s <= k; ++s) {
        const Scan es = scan_at(est, s);
        const Scan ts = scan_at(truth, s);
        const StepAssignment a = assign_step(es.points, ts.points, cfg);
        sums.localisation += a.localisation;
        sums.missed += half_cap * a.missed;
        sums.false_cost += half_cap * a.false_count;

        std::map<int, int> assigned;
        for (const auto& [ei, ti] : a.pairs) {
            assigned[ts.labels[static_cast<std::size_t>(ti)]] = es.labels[static_cast<std::size_t>(ei)];
        }
        for (const int label : ts.labels) {
            if (!prev_truths.count(label)) continue;
            const auto before = prev_assigned.find(label);
            const auto now = assigned.find(label);
            const bool had = before != prev_assigned.end();
            const bool has = now != assigned.end();
            if (had && has) {
                if (before->second != now->second) sums.switch_cost += switch_full;
            } else if (had != has) {
                sums.switch_cost += switch_full / 2.0;
            }
        }
        prev_assigned = std::move(assigned);
        prev_truths = std::set<int>(ts.labels.begin(), ts.labels.end());
    }
    sums.total = sums.localisation + sums.missed + sums.false_cost + sums.switch_cost;
    return sums;
}

MetricResult normalize_sums(const MetricResult& sums, int k, double p) {
    auto norm = [&](double v) { return std::pow(std::max(v, 0.0) / k, 1.0 / p); };
    return {norm(sums.total), norm(sums.localisation), norm(sums.missed), norm(sums.false_cost),
            norm(sums.switch_cost)};
}

MetricResult evaluate(const LabeledTrajectorySet& est, const LabeledTrajectorySet& truth, int k,
                      const MetricConfig& cfg) {
    return normalize_sums(evaluate_sums(est, truth, k, cfg), k, cfg.p);
}

std::vector<double> rms_over_runs(const std::vector<std::vector<double>>& squared) {
    if (squared.empty()) throw std::invalid_argument("rms_over_runs: no runs");
    const std::size_t len = squared.front().size();
    for (const auto& run : squared) {
        if (run.size() != len) throw std::invalid_argument("rms_over_runs: runs have different lengths");
    }
    const auto n = static_cast<double>(squared.size());
    std::vector<double> out(len, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
        double acc = 0.0;
        for (const auto& run : squared) acc += run[k];
        out[k] = std::sqrt(acc / (n * static_cast<double>(k + 1)));
    }
    return out;
}

double rms_over_time(const std::vector<double>& curve) {
    if (curve.empty()) throw std::invalid_argument("rms_over_time: empty curve");
    double acc = 0.0;
    for (const double v : curve) acc += v * v;
    return std::sqrt(acc / static_cast<double>(curve.size()));
}

}  // namespace tiemb
