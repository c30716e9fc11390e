#include "tiemb/sim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tiemb {

void Scenario::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
    if (duration < 1) fail("duration must be >= 1");
    if (!(period > 0.0)) fail("period must be positive");
    if (!(sigma_q >= 0.0)) fail("sigma_q must be nonnegative");
    if (!(p_survival > 0.0 && p_survival <= 1.0)) fail("p_survival must lie in (0, 1]");
    if (!(init_extent >= 0.0) || !(init_speed >= 0.0)) fail("init_extent and init_speed must be nonnegative");
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& t = targets[i];
        if (t.birth < 1 || t.birth >= t.death || t.death > duration + 1) {
            std::ostringstream os;
            os << "target " << i << " needs 1 <= birth < death <= duration + 1 (got birth " << t.birth << ", death "
               << t.death << ")";
            fail(os.str());
        }
        if (t.initial && t.initial->size() != 4) fail("initial states must be [px, vx, py, vy]");
    }
    for (const auto& b : birth) {
        if (!(b.p_b >= 0.0 && b.p_b <= 1.0)) fail("birth probability must lie in [0, 1]");
        if (b.density.dim() != 4) fail("birth densities must be 4-dimensional");
        if (!is_psd(b.density.cov())) fail("birth covariance must be positive semidefinite");
    }
    (void)model();  // checks the grid tiling
}

MotionModel Scenario::motion() const {
    return MotionModel::ncv(period, sigma_q, p_survival);
}

RicianGridModel Scenario::model() const {
    return RicianGridModel::grid(area_x, area_y, cell_width, rician);
}

Scenario default_scenario() {
    Scenario s;
    Vec mean = Vec::Zero(4);
    Vec var(4);
    var << 200.0, 10.0, 200.0, 10.0;
    s.birth.push_back({1e-6, GaussianDensity(mean, var.asDiagonal())});
    s.targets = {{3, 74, std::nullopt}, {16, 64, std::nullopt}, {17, 57, std::nullopt}, {20, 64, std::nullopt}};
    return s;
}

LabeledTrajectorySet generate_truth(const Scenario& scenario, Rng& rng) {
    const MotionModel motion = scenario.motion();
    Mat noise_root = Mat::Zero(4, 4);
    if (!motion.Q.isZero(0.0)) {
        Eigen::LLT<Mat> llt(motion.Q);
        if (llt.info() != Eigen::Success) throw NumericalError("generate_truth: process noise is not positive definite");
        noise_root = llt.matrixL();
    }
    std::uniform_real_distribution<double> position(-scenario.init_extent / 2.0, scenario.init_extent / 2.0);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, 1.0);

    LabeledTrajectorySet truth;
    for (std::size_t i = 0; i < scenario.targets.size(); ++i) {
        const auto& spec = scenario.targets[i];
        Vec x(4);
        if (spec.initial) {
            x = *spec.initial;
        } else {
            const double px = position(rng);
            const double py = position(rng);
            const double angle = heading(rng);
            x << px, scenario.init_speed * std::cos(angle), py, scenario.init_speed * std::sin(angle);
        }
        LabeledTrajectory t;
        t.label = static_cast<int>(i);
        t.t_start = spec.birth;
        const int last = std::min(spec.death - 1, scenario.duration);
        t.states.push_back(x);
        for (int k = spec.birth + 1; k <= last; ++k) {
            Vec n(4);
            for (Index j = 0; j < 4; ++j) n(j) = normal(rng);
            x = motion.F * x + noise_root * n;
            t.states.push_back(x);
        }
        truth.push_back(std::move(t));
    }
    return truth;
}

std::vector<Vec> generate_measurements(const LabeledTrajectorySet& truth, const SuperpositionalModel& model,
                                       int duration, Rng& rng) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(duration));
    for (int k = 1; k <= duration; ++k) {
        Vec lambda = Vec::Zero(model.feature_dim());
        Vec big_r = Vec::Zero(model.feature_dim());
        for (const auto& t : truth) {
            if (!t.covers(k)) continue;
            lambda += model.h(t.at(k));
            big_r += model.R(t.at(k));
        }
        out.push_back(model.sample(lambda, big_r, rng));
    }
    return out;
}

std::vector<Vec> generate_measurements(const LabeledTrajectorySet& truth, const Scenario& scenario, Rng& rng) {
    return generate_measurements(truth, scenario.model(), scenario.duration, rng);
}

LabeledTrajectorySet truth_at(const LabeledTrajectorySet& truth, int k, TrajectoryMode mode) {
    LabeledTrajectorySet out;
    for (const auto& t : truth) {
        if (t.t_start > k) continue;
        if (mode == TrajectoryMode::alive && !t.covers(k)) continue;
        LabeledTrajectory cut = t;
        const int last = std::min(k, t.t_end());
        cut.states.resize(static_cast<std::size_t>(last - t.t_start + 1));
        out.push_back(std::move(cut));
    }
    return out;
}

FilterConfig filter_from_name(const std::string& name, const FilterConfig& base) {
    FilterConfig cfg = base;
    if (name == "tiemb-iplf") {
        cfg.exchange = true;
        cfg.variant = UpdateVariant::iplf;
    } else if (name == "tiemb-ukf") {
        cfg.exchange = true;
        cfg.variant = UpdateVariant::ukf;
    } else if (name == "timb-iplf") {
        cfg.exchange = false;
        cfg.variant = UpdateVariant::iplf;
    } else if (name == "timb-ukf") {
        cfg.exchange = false;
        cfg.variant = UpdateVariant::ukf;
    } else {
        throw std::invalid_argument("unknown filter '" + name +
                                    "' (expected tiemb-iplf, tiemb-ukf, timb-iplf or timb-ukf)");
    }
    return cfg;
}

std::uint64_t measurement_digest(const std::vector<Vec>& measurements) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (const auto& z : measurements) {
        for (Index j = 0; j < z.size(); ++j) {
            std::uint64_t bits = 0;
            const double v = z(j);
            std::memcpy(&bits, &v, sizeof bits);
            for (int byte = 0; byte < 8; ++byte) {
                hash ^= (bits >> (8 * byte)) & 0xffU;
                hash *= 1099511628211ULL;
            }
        }
    }
    return hash;
}

FilterRun run_filter(const Scenario& scenario, const SuperpositionalModel& model, const NamedFilter& filter,
                     const LabeledTrajectorySet& truth, const std::vector<Vec>& measurements,
                     const MetricConfig& metric) {
    FilterRun out;
    out.name = filter.name;
    out.lscan = filter.cfg.lscan;
    out.input_digest = measurement_digest(measurements);
    try {
        TmbFilter tmb(model, scenario.motion(), scenario.birth, filter.cfg);
        double filter_seconds = 0.0;
        for (std::size_t i = 0; i < measurements.size(); ++i) {
            const int k = static_cast<int>(i) + 1;
            const auto t0 = std::chrono::steady_clock::now();
            LabeledTrajectorySet est = tmb.step(measurements[i]);
            filter_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            out.sums.push_back(evaluate_sums(est, truth_at(truth, k, filter.cfg.mode), k, metric));
            std::vector<CurrentEstimate> now;
            for (const auto& t : est) now.push_back({t.label, t.states.back()});
            out.current.push_back(std::move(now));
            if (i + 1 == measurements.size()) out.final_estimate = std::move(est);
        }
        out.seconds = filter_seconds;
    } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
        spdlog::error("filter {} (L={}) failed: {}", filter.name, filter.cfg.lscan, e.what());
    }
    return out;
}

MonteCarloResult run_monte_carlo(const Scenario& scenario, const std::vector<NamedFilter>& filters,
                                 const MonteCarloOptions& options) {
    if (options.runs < 1) throw std::invalid_argument("run_monte_carlo: need at least one run");
    scenario.validate();
    options.metric.validate();
    for (const auto& f : filters) f.cfg.validate();

    const RicianGridModel model = scenario.model();
    MonteCarloResult result;
    result.runs.resize(static_cast<std::size_t>(options.runs));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next++; i < options.runs; i = next++) {
            RunRecord rec;
            rec.index = i;
            rec.seed = options.base_seed + static_cast<std::uint64_t>(i);
            Rng rng(rec.seed);
            rec.truth = generate_truth(scenario, rng);
            rec.measurements = generate_measurements(rec.truth, model, scenario.duration, rng);
            for (const auto& f : filters) {
                rec.filters.push_back(run_filter(scenario, model, f, rec.truth, rec.measurements, options.metric));
            }
            result.runs[static_cast<std::size_t>(i)] = std::move(rec);
        }
    };

    const int workers = std::clamp(options.workers, 1, options.runs);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return result;
}

}  // namespace tiemb
