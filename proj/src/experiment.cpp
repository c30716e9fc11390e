#include "tiemb/experiment.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tiemb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

json vec_json(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

/// Squared unnormalised metric from d^p sums.
double squared(double sum_p, double p) {
    return std::pow(std::max(sum_p, 0.0), 2.0 / p);
}

}  // namespace

int ExperimentResult::failed_runs() const {
    int n = 0;
    for (const auto& f : filters) n += f.failed_runs;
    return n;
}

std::vector<FilterSummary> aggregate(const MonteCarloResult& mc, const std::vector<NamedFilter>& filters,
                                     const MetricConfig& metric) {
    std::vector<FilterSummary> out;
    for (std::size_t f = 0; f < filters.size(); ++f) {
        FilterSummary s;
        s.name = filters[f].name;
        s.lscan = filters[f].cfg.lscan;

        std::array<std::vector<std::vector<double>>, 5> sq;
        for (const auto& run : mc.runs) {
            const FilterRun& fr = run.filters.at(f);
            if (fr.failed) {
                ++s.failed_runs;
                continue;
            }
            std::array<std::vector<double>, 5> rows;
            for (const auto& m : fr.sums) {
                rows[0].push_back(squared(m.total, metric.p));
                rows[1].push_back(squared(m.localisation, metric.p));
                rows[2].push_back(squared(m.missed, metric.p));
                rows[3].push_back(squared(m.false_cost, metric.p));
                rows[4].push_back(squared(m.switch_cost, metric.p));
            }
            for (int c = 0; c < 5; ++c) sq[c].push_back(std::move(rows[c]));
        }

        if (sq[0].empty()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            s.summary = {nan, nan, nan, nan, nan};
            out.push_back(std::move(s));
            continue;
        }
        std::array<std::vector<double>, 5> curves;
        for (int c = 0; c < 5; ++c) curves[c] = rms_over_runs(sq[c]);
        for (std::size_t k = 0; k < curves[0].size(); ++k) {
            s.curve.push_back({curves[0][k], curves[1][k], curves[2][k], curves[3][k], curves[4][k]});
        }
        s.summary = {rms_over_time(curves[0]), rms_over_time(curves[1]), rms_over_time(curves[2]),
                     rms_over_time(curves[3]), rms_over_time(curves[4])};
        out.push_back(std::move(s));
    }
    return out;
}

ExperimentResult run_experiment(const RunConfig& config) {
    config.validate();
    ExperimentResult res;
    res.config = config;
    const auto filters = config.named_filters();

    MonteCarloOptions opts;
    opts.runs = config.runs;
    opts.base_seed = config.seed;
    opts.metric = config.metric;
    opts.workers = config.workers > 0 ? config.workers : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    spdlog::info("running {} Monte-Carlo run(s) of {} filter configuration(s) on {} worker(s)", config.runs,
                 filters.size(), opts.workers);

    res.mc = run_monte_carlo(config.scenario, filters, opts);
    res.filters = aggregate(res.mc, filters, config.metric);
    return res;
}

void write_curves(const std::vector<FilterSummary>& filters, const fs::path& path) {
    auto out = open_out(path);
    out << "filter,lscan,k,total,loc,missed,false,switch\n";
    for (const auto& f : filters) {
        for (std::size_t k = 0; k < f.curve.size(); ++k) {
            const auto& m = f.curve[k];
            out << f.name << ',' << f.lscan << ',' << (k + 1) << ',' << fixed(m.total) << ',' << fixed(m.localisation)
                << ',' << fixed(m.missed) << ',' << fixed(m.false_cost) << ',' << fixed(m.switch_cost) << '\n';
        }
    }
}

void write_summary(const std::vector<FilterSummary>& filters, const fs::path& path) {
    auto out = open_out(path);
    out << "component";
    for (const auto& f : filters) out << ',' << f.column();
    out << '\n';
    const std::array<const char*, 5> rows{"Total", "Localisation", "Missed", "False", "Switch"};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << rows[r];
        for (const auto& f : filters) {
            const auto& s = f.summary;
            const double v = r == 0 ? s.total : r == 1 ? s.localisation : r == 2 ? s.missed : r == 3 ? s.false_cost
                                                                                                      : s.switch_cost;
            out << ',' << fixed(v);
        }
        out << '\n';
    }
}

void write_timing(const MonteCarloResult& mc, const fs::path& path) {
    auto out = open_out(path);
    out << "run,filter,lscan,seconds,failed\n";
    for (const auto& run : mc.runs) {
        for (const auto& f : run.filters) {
            out << run.index << ',' << f.name << ',' << f.lscan << ',' << fixed(f.seconds) << ','
                << (f.failed ? 1 : 0) << '\n';
        }
    }
}

void write_run_records(const MonteCarloResult& mc, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& run : mc.runs) {
        json j;
        j["index"] = run.index;
        j["seed"] = run.seed;
        j["truth"] = trajectories_to_json(run.truth);
        json meas = json::array();
        for (const auto& z : run.measurements) meas.push_back(vec_json(z));
        j["measurements"] = std::move(meas);
        json filters = json::array();
        for (const auto& f : run.filters) {
            json fj;
            fj["name"] = f.name;
            fj["lscan"] = f.lscan;
            fj["failed"] = f.failed;
            if (f.failed) fj["error"] = f.error;
            char digest[32];
            std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(f.input_digest));
            fj["input_digest"] = digest;
            fj["seconds"] = f.seconds;
            fj["final_estimate"] = trajectories_to_json(f.final_estimate);
            json steps = json::array();
            for (std::size_t k = 0; k < f.current.size(); ++k) {
                json step = json::array();
                for (const auto& e : f.current[k]) step.push_back({{"label", e.label}, {"state", vec_json(e.state)}});
                steps.push_back(std::move(step));
            }
            fj["estimates"] = std::move(steps);
            filters.push_back(std::move(fj));
        }
        j["filters"] = std::move(filters);
        auto out = open_out(dir / (std::to_string(run.index) + ".json"));
        out << j.dump() << '\n';
    }
}

void write_outputs(const ExperimentResult& result, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_curves(result.filters, out_dir / "curves.csv");
    write_summary(result.filters, out_dir / "summary.csv");
    write_timing(result.mc, out_dir / "timing.csv");
    write_run_records(result.mc, out_dir / "runs");
}

json trajectories_to_json(const LabeledTrajectorySet& set) {
    json arr = json::array();
    for (const auto& t : set) {
        json states = json::array();
        for (const auto& s : t.states) states.push_back(vec_json(s));
        arr.push_back({{"label", t.label}, {"t_start", t.t_start}, {"states", std::move(states)}});
    }
    return arr;
}

LabeledTrajectorySet trajectories_from_json(const json& j) {
    const json* arr = &j;
    if (j.is_object()) {
        if (!j.contains("trajectories")) throw std::invalid_argument("expected an array or {\"trajectories\": [...]}");
        arr = &j.at("trajectories");
    }
    if (!arr->is_array()) throw std::invalid_argument("trajectory list must be an array");

    LabeledTrajectorySet out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const json& t = (*arr)[i];
        auto bad = [&](const std::string& what) {
            return std::invalid_argument("trajectory " + std::to_string(i) + ": " + what);
        };
        if (!t.is_object()) throw bad("must be an object");
        if (!t.contains("label") || !t["label"].is_number_integer()) throw bad("'label' must be an integer");
        if (!t.contains("t_start") || !t["t_start"].is_number_integer()) throw bad("'t_start' must be an integer");
        if (!t.contains("states") || !t["states"].is_array() || t["states"].empty()) {
            throw bad("'states' must be a nonempty array");
        }
        LabeledTrajectory lt;
        lt.label = t["label"].get<int>();
        lt.t_start = t["t_start"].get<int>();
        for (const auto& s : t["states"]) {
            if (!s.is_array() || s.size() != 4) throw bad("each state must be [px, vx, py, vy]");
            Vec v(4);
            for (Index c = 0; c < 4; ++c) {
                if (!s[static_cast<std::size_t>(c)].is_number()) throw bad("state entries must be numbers");
                v(c) = s[static_cast<std::size_t>(c)].get<double>();
            }
            lt.states.push_back(std::move(v));
        }
        out.push_back(std::move(lt));
    }
    return out;
}

LabeledTrajectorySet load_trajectories(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path.string() + ": cannot open file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    try {
        return trajectories_from_json(j);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::vector<MetricResult> evaluate_curve(const LabeledTrajectorySet& est, const LabeledTrajectorySet& truth,
                                         const MetricConfig& cfg) {
    int last = 0;
    for (const auto& t : est) last = std::max(last, t.t_end());
    for (const auto& t : truth) last = std::max(last, t.t_end());
    std::vector<MetricResult> out;
    for (int k = 1; k <= last; ++k) out.push_back(evaluate(est, truth, k, cfg));
    return out;
}

void write_metric_csv(const std::vector<MetricResult>& curve, const fs::path& path) {
    auto out = open_out(path);
    out << "k,total,localisation,missed,false,switch\n";
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const auto& m = curve[k];
        out << (k + 1) << ',' << fixed(m.total) << ',' << fixed(m.localisation) << ',' << fixed(m.missed) << ','
            << fixed(m.false_cost) << ',' << fixed(m.switch_cost) << '\n';
    }
}

}  // namespace tiemb
