#include "tiemb/tmb_filter.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tiemb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)); returns the other argument exactly when one is -inf.
double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double safe_log(double v) {
    return v > 0.0 ? std::log(v) : kNegInf;
}

bool finite_density(const GaussianDensity& g) {
    return g.mean().allFinite() && g.cov().allFinite();
}

/// Sigma-point moments used by the SLR: E[g], C[g], C[x,g] and E[Psi].
struct SlrMoments {
    Vec E_g;
    Mat C_g;
    Mat C_xg;
    Mat E_psi;
};

SlrMoments slr_moments(const GaussianDensity& lin, const CorrectionMoments& corr, const SuperpositionalModel& model,
                       double central_weight) {
    const SigmaPointSet sp = draw_sigma_points(lin, central_weight);
    const Index n = sp.count();
    const Index mdim = model.meas_dim();
    const bool has_scorr = corr.S_corr.size() > 0 && !corr.S_corr.isZero(0.0);

    Mat G(mdim, n);
    Vec sigma_mean = Vec::Zero(mdim);
    Mat jac_outer = Mat::Zero(has_scorr ? mdim : 0, has_scorr ? mdim : 0);
    for (Index s = 0; s < n; ++s) {
        const Vec x = sp.points.col(s);
        const Vec feat = model.h(x) + corr.h_corr;
        G.col(s) = model.m(feat);
        sigma_mean += sp.weights(s) * model.sigma_diag(model.R(x) + corr.R_corr);
        if (has_scorr) {
            const Vec jac = model.m_jac_diag(feat);
            jac_outer.noalias() += sp.weights(s) * jac * jac.transpose();
        }
    }

    SlrMoments out;
    out.E_g = G * sp.weights;
    const Mat G_c = G.colwise() - out.E_g;
    const Mat X_c = sp.points.colwise() - lin.mean();
    const Mat G_w = G_c * sp.weights.asDiagonal();
    out.C_g = G_w * G_c.transpose();
    out.C_xg = X_c * G_w.transpose();
    // E[M S M^T] for diagonal M is S o E[m' m'^T].
    out.E_psi = has_scorr ? Mat(corr.S_corr.cwiseProduct(jac_outer)) : Mat::Zero(mdim, mdim);
    out.E_psi.diagonal() += sigma_mean;
    return out;
}

}  // namespace

// --- configuration ----------------------------------------------------------

MotionModel MotionModel::ncv(double period, double sigma_q, double p_survival) {
    Mat block_f(2, 2);
    block_f << 1.0, period, 0.0, 1.0;
    Mat block_q(2, 2);
    block_q << std::pow(period, 3) / 3.0, period * period / 2.0, period * period / 2.0, period;
    MotionModel mm;
    mm.F = Mat::Zero(4, 4);
    mm.Q = Mat::Zero(4, 4);
    mm.F.topLeftCorner(2, 2) = block_f;
    mm.F.bottomRightCorner(2, 2) = block_f;
    mm.Q.topLeftCorner(2, 2) = sigma_q * sigma_q * block_q;
    mm.Q.bottomRightCorner(2, 2) = sigma_q * sigma_q * block_q;
    mm.p_survival = p_survival;
    return mm;
}

void FilterConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("filter config: " + what); };
    if (lscan < 1) fail("lscan must be >= 1");
    if (!(gamma_d > 0.0 && gamma_d < 1.0)) fail("gamma_d must lie in (0, 1)");
    if (!(gamma_a >= 0.0 && gamma_a < 1.0)) fail("gamma_a must lie in [0, 1)");
    if (iplf_max_iters < 1) fail("iplf_max_iters must be >= 1");
    if (!(iplf_kld_threshold >= 0.0)) fail("iplf_kld_threshold must be nonnegative");
    if (!(sigma_central_weight > 0.0 && sigma_central_weight < 1.0)) fail("sigma_central_weight must lie in (0, 1)");
}

CorrectionMoments CorrectionMoments::zero(Index feature_dim) {
    return {Vec::Zero(feature_dim), Mat::Zero(feature_dim, feature_dim), Vec::Zero(feature_dim)};
}

double BernoulliTrajectory::beta_at(int l) const {
    const auto it = beta.find(l);
    return it == beta.end() ? 0.0 : it->second;
}

std::vector<Vec> BernoulliTrajectory::live_means() const {
    std::vector<Vec> out = frozen;
    for (int i = 0; i < window_states(); ++i) out.emplace_back(window.mean().segment(i * nx, nx));
    return out;
}

// --- prediction -------------------------------------------------------------

TmbDensity predict(const TmbDensity& state, const MotionModel& motion, const BirthModel& birth,
                   const FilterConfig& cfg) {
    TmbDensity out;
    out.mode = state.mode;
    out.time = state.time + 1;
    out.next_id = state.next_id;
    const int k = out.time;
    const double ps = motion.p_survival;

    out.components.reserve(state.components.size() + birth.size());
    for (const auto& b : state.components) {
        BernoulliTrajectory nb = b;
        if (b.dead) {
            out.components.push_back(std::move(nb));
            continue;
        }
        const Index nx = b.nx;
        const Index n = b.window.dim();
        const Mat& P = b.window.cov();
        const Vec& mu = b.window.mean();

        // Appending x_k = F x_{k-1} + q only touches the trailing block.
        const Mat p_fbar_t = P.rightCols(nx) * motion.F.transpose();
        Vec mean(n + nx);
        mean.head(n) = mu;
        mean.tail(nx) = motion.F * mu.tail(nx);
        Mat cov(n + nx, n + nx);
        cov.topLeftCorner(n, n) = P;
        cov.topRightCorner(n, nx) = p_fbar_t;
        cov.bottomLeftCorner(nx, n) = p_fbar_t.transpose();
        cov.bottomRightCorner(nx, nx) = motion.F * p_fbar_t.bottomRows(nx) + motion.Q;

        if (state.mode == TrajectoryMode::alive) {
            nb.r = ps * b.r;
            nb.beta = {{k, 1.0}};
        } else {
            const double old = b.beta_at(k - 1);
            nb.beta.erase(k - 1);
            if ((1.0 - ps) * old > 0.0) {
                nb.beta[k - 1] = (1.0 - ps) * old;
                nb.ended[k - 1] = b.live_means();
            }
            nb.beta[k] = ps * old;
        }

        // L-scan truncation: states leaving the window keep their mean only.
        Index start = 0;
        const Index keep = static_cast<Index>(cfg.lscan) * nx;
        while ((n + nx) - start > keep) {
            nb.frozen.emplace_back(mean.segment(start, nx));
            start += nx;
        }
        const Index w = n + nx - start;
        nb.window = GaussianDensity(mean.tail(w), clamp_psd(cov.bottomRightCorner(w, w)));
        out.components.push_back(std::move(nb));
    }

    for (const auto& entry : birth) {
        BernoulliTrajectory nb;
        nb.id = out.next_id++;
        nb.t_start = k;
        nb.nx = entry.density.dim();
        nb.r = entry.p_b;
        nb.beta = {{k, 1.0}};
        nb.window = entry.density;
        out.components.push_back(std::move(nb));
    }
    return out;
}

// --- update building blocks -------------------------------------------------

CurrentMarginal marginalize_current(const BernoulliTrajectory& b, int k) {
    if (b.dead || b.window.dim() == 0 || b.t_last() != k) {
        std::ostringstream os;
        os << "marginalize_current: trajectory " << b.id << " has no live component ending at " << k;
        throw std::logic_error(os.str());
    }
    const Index nx = b.nx;
    return {b.r * b.beta_at(k),
            GaussianDensity(b.window.mean().tail(nx), b.window.cov().bottomRightCorner(nx, nx))};
}

TargetMoments per_target_moments(const GaussianDensity& single, const SuperpositionalModel& model,
                                 double central_weight, bool with_second_moment) {
    const SigmaPointSet sp = draw_sigma_points(single, central_weight);
    const Index f = model.feature_dim();
    Mat H(f, sp.count());
    Vec E_R = Vec::Zero(f);
    for (Index s = 0; s < sp.count(); ++s) {
        const Vec x = sp.points.col(s);
        H.col(s) = model.h(x);
        E_R += sp.weights(s) * model.R(x);
    }
    TargetMoments out;
    out.E_h = H * sp.weights;
    if (with_second_moment) out.E_hh = H * sp.weights.asDiagonal() * H.transpose();
    out.E_R = std::move(E_R);
    return out;
}

MomentTotals moment_totals(const std::vector<TargetMoments>& moments, const std::vector<double>& r,
                           Index feature_dim) {
    if (moments.size() != r.size()) throw std::invalid_argument("moment_totals: size mismatch");
    MomentTotals t{Vec::Zero(feature_dim), Mat::Zero(feature_dim, feature_dim), Vec::Zero(feature_dim)};
    for (std::size_t i = 0; i < moments.size(); ++i) {
        const auto& mo = moments[i];
        t.mean += r[i] * mo.E_h;
        t.cov += r[i] * mo.E_hh;
        t.cov.noalias() -= (r[i] * r[i]) * mo.E_h * mo.E_h.transpose();
        t.R += r[i] * mo.E_R;
    }
    return t;
}

CorrectionMoments correction_moments(const MomentTotals& totals, const TargetMoments& own, double r_own) {
    CorrectionMoments c;
    c.h_corr = totals.mean - r_own * own.E_h;
    Mat own_cov = r_own * own.E_hh;
    own_cov.noalias() -= (r_own * r_own) * own.E_h * own.E_h.transpose();
    c.S_corr = symmetrize(totals.cov - own_cov);
    c.R_corr = totals.R - r_own * own.E_R;
    return c;
}

CorrectionMoments correction_moments(const std::vector<TargetMoments>& moments, const std::vector<double>& r,
                                     std::size_t exclude) {
    if (exclude >= moments.size()) throw std::out_of_range("correction_moments: excluded index out of range");
    const Index f = moments[exclude].E_h.size();
    return correction_moments(moment_totals(moments, r, f), moments[exclude], r[exclude]);
}

ConditionalMoments conditional_moments(const std::optional<Vec>& x_u, const CorrectionMoments& corr,
                                       const SuperpositionalModel& model) {
    Vec feat = corr.h_corr;
    Vec cov_feat = corr.R_corr;
    if (x_u) {
        feat += model.h(*x_u);
        cov_feat += model.R(*x_u);
    }
    ConditionalMoments out;
    out.mean = model.m(feat);
    const Vec jac = model.m_jac_diag(feat);
    out.cov = corr.S_corr.cwiseProduct(jac * jac.transpose());
    out.cov.diagonal() += model.sigma_diag(cov_feat);
    return out;
}

AffineLikelihood slr_generalized(const GaussianDensity& lin, const CorrectionMoments& corr,
                                 const SuperpositionalModel& model, double central_weight) {
    const SlrMoments mo = slr_moments(lin, corr, model, central_weight);
    const Index d = lin.dim();
    const Index mdim = model.meas_dim();
    const Mat& P = lin.cov();

    AffineLikelihood lik;
    if (P.trace() <= 0.0) {
        lik.A = Mat::Zero(mdim, d);
    } else {
        Eigen::LLT<Mat> llt(P);
        if (llt.info() != Eigen::Success) {
            Mat jittered = P;
            jittered.diagonal().array() += kEigenFloorRel * P.trace();
            llt.compute(jittered);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("slr_generalized: linearisation covariance is singular\n" + format_matrix(P));
            }
        }
        lik.A = llt.solve(mo.C_xg).transpose();
    }
    lik.b = mo.E_g - lik.A * lin.mean();
    Mat omega = mo.C_g + mo.E_psi;
    omega.noalias() -= lik.A * P * lik.A.transpose();
    lik.omega = clamp_psd(omega);
    return lik;
}

IplfResult iplf_update(const GaussianDensity& prior, const CorrectionMoments& corr, const SuperpositionalModel& model,
                       const Vec& z, const FilterConfig& cfg) {
    const int max_iters = cfg.effective_iters();
    IplfResult res;
    GaussianDensity current = prior;
    for (int it = 0; it < max_iters; ++it) {
        AffineLikelihood lik;
        KalmanStep step;
        try {
            lik = slr_generalized(current, corr, model, cfg.sigma_central_weight);
            step = kf_update_step(prior, lik, z);
        } catch (const NumericalError& e) {
            if (it == 0) throw;
            spdlog::debug("iplf: iteration {} failed ({}), keeping previous iterate", it + 1, e.what());
            break;
        }
        if (!finite_density(step.posterior) || !std::isfinite(step.log_likelihood) ||
            !is_psd(step.posterior.cov())) {
            if (it == 0) throw NumericalError("iplf: first update produced an invalid posterior");
            spdlog::debug("iplf: iteration {} diverged, keeping previous iterate", it + 1);
            break;
        }
        double kld = std::numeric_limits<double>::infinity();
        try {
            kld = kld_gaussians(step.posterior, current);
        } catch (const NumericalError&) {
            kld = 0.0;  // previous iterate degenerate: nothing left to compare against
        }
        res.posterior = step.posterior;
        res.lik = std::move(lik);
        res.log_p_exist = step.log_likelihood;
        res.iterations = it + 1;
        current = std::move(step.posterior);
        if (kld < cfg.iplf_kld_threshold) break;
    }
    return res;
}

double log_p_empty(const CorrectionMoments& corr, const SuperpositionalModel& model, const Vec& z) {
    const ConditionalMoments cm = conditional_moments(std::nullopt, corr, model);
    return log_gaussian_eval(z, cm.mean, cm.cov);
}

ExistenceLikelihoods existence_likelihoods(const GaussianDensity& prior, const AffineLikelihood& lik,
                                           const CorrectionMoments& corr, const SuperpositionalModel& model,
                                           const Vec& z) {
    return {kf_update_step(prior, lik, z).log_likelihood, log_p_empty(corr, model, z)};
}

double updated_existence(double log_rho, double log_p_empty, double r) {
    const double a = log_rho + safe_log(r);
    const double c = log_p_empty + std::log1p(-r);
    if (std::isnan(a) || std::isnan(c) || (a == kNegInf && c == kNegInf)) {
        spdlog::warn("existence update: both hypotheses have zero likelihood, keeping r = {}", r);
        return r;
    }
    const double out = std::exp(a - log_add(a, c));
    return std::clamp(out, 0.0, 1.0);
}

BernoulliTrajectory update_bernoulli_alive(const BernoulliTrajectory& b, double log_p_exist, double log_p_empty,
                                           const GaussianDensity& posterior_single) {
    BernoulliTrajectory nb = b;
    nb.r = updated_existence(log_p_exist, log_p_empty, b.r);
    nb.window = condition_past_states(b.window, posterior_single);
    return nb;
}

BernoulliTrajectory update_bernoulli_all(const BernoulliTrajectory& b, int k, double log_p_exist,
                                         double log_p_empty, const GaussianDensity& posterior_single) {
    BernoulliTrajectory nb = b;
    double earlier = 0.0;
    for (const auto& [l, w] : b.beta) {
        if (l < k) earlier += w;
    }
    const double log_beta_k = safe_log(b.beta_at(k));
    const double log_rho = log_add(log_p_exist + log_beta_k, log_p_empty + safe_log(earlier));
    nb.r = updated_existence(log_rho, log_p_empty, b.r);

    if (std::isfinite(log_rho)) {
        double total = 0.0;
        for (auto& [l, w] : nb.beta) {
            const double lw = (l == k ? log_p_exist : log_p_empty) + safe_log(w);
            w = std::exp(lw - log_rho);
            total += w;
        }
        if (total > 0.0 && total != 1.0) {
            for (auto& [l, w] : nb.beta) w /= total;
        }
    }
    nb.window = condition_past_states(b.window, posterior_single);
    return nb;
}

// --- full steps -------------------------------------------------------------

TmbDensity update(const TmbDensity& state, const Vec& z, const SuperpositionalModel& model, const FilterConfig& cfg) {
    const int k = state.time;
    if (z.size() != model.meas_dim()) {
        std::ostringstream os;
        os << "update: measurement has " << z.size() << " entries, model expects " << model.meas_dim();
        throw std::invalid_argument(os.str());
    }

    std::vector<std::size_t> active;
    std::vector<CurrentMarginal> marginals;
    for (std::size_t i = 0; i < state.components.size(); ++i) {
        const auto& b = state.components[i];
        if (b.dead || b.t_last() != k) continue;
        active.push_back(i);
        marginals.push_back(marginalize_current(b, k));
    }

    // Phases 1 and 2: per-target moments and their global sums.
    const Index f = model.feature_dim();
    std::vector<TargetMoments> moments;
    MomentTotals totals;
    double shared_log_p_empty = 0.0;
    if (cfg.exchange) {
        std::vector<double> r;
        moments.reserve(active.size());
        for (const auto& mg : marginals) {
            moments.push_back(per_target_moments(mg.single, model, cfg.sigma_central_weight));
            r.push_back(mg.r_at_k);
        }
        totals = moment_totals(moments, r, f);
    } else if (!active.empty()) {
        shared_log_p_empty = log_p_empty(CorrectionMoments::zero(f), model, z);
    }

    // Phase 3: per-target update.
    TmbDensity out = state;
    const CorrectionMoments no_exchange = cfg.exchange ? CorrectionMoments{} : CorrectionMoments::zero(f);
    for (std::size_t a = 0; a < active.size(); ++a) {
        const auto& b = state.components[active[a]];
        const CorrectionMoments corr =
            cfg.exchange ? correction_moments(totals, moments[a], marginals[a].r_at_k) : no_exchange;
        const IplfResult res = iplf_update(marginals[a].single, corr, model, z, cfg);
        const double lp0 = cfg.exchange ? log_p_empty(corr, model, z) : shared_log_p_empty;
        out.components[active[a]] = state.mode == TrajectoryMode::alive
                                        ? update_bernoulli_alive(b, res.log_p_exist, lp0, res.posterior)
                                        : update_bernoulli_all(b, k, res.log_p_exist, lp0, res.posterior);
    }
    return out;
}

TmbDensity prune_and_terminate(const TmbDensity& state, const FilterConfig& cfg) {
    TmbDensity out;
    out.mode = state.mode;
    out.time = state.time;
    out.next_id = state.next_id;
    for (const auto& b : state.components) {
        if (b.r < cfg.gamma_d) continue;
        BernoulliTrajectory nb = b;
        if (state.mode == TrajectoryMode::all && !nb.dead && nb.beta_at(state.time) < cfg.gamma_a) {
            nb.beta.erase(state.time);
            double total = 0.0;
            for (const auto& [l, w] : nb.beta) total += w;
            if (total > 0.0) {
                for (auto& [l, w] : nb.beta) w /= total;
                nb.dead = true;
            } else {
                continue;  // no earlier end time carries weight: nothing left to keep
            }
        }
        out.components.push_back(std::move(nb));
    }
    return out;
}

LabeledTrajectorySet estimate(const TmbDensity& state, const FilterConfig& cfg) {
    LabeledTrajectorySet out;
    for (const auto& b : state.components) {
        if (!(b.r > cfg.gamma_d)) continue;
        LabeledTrajectory t;
        t.label = b.id;
        t.t_start = b.t_start;
        if (state.mode == TrajectoryMode::alive) {
            t.states = b.live_means();
        } else {
            int best = -1;
            double best_w = -1.0;
            for (const auto& [l, w] : b.beta) {
                if (w >= best_w) {
                    best = l;
                    best_w = w;
                }
            }
            if (best < 0) continue;
            if (!b.dead && best == b.t_last()) {
                t.states = b.live_means();
            } else {
                t.states = b.ended.at(best);
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

TmbFilter::TmbFilter(const SuperpositionalModel& model, MotionModel motion, BirthModel birth, FilterConfig cfg)
    : model_(model), motion_(std::move(motion)), birth_(std::move(birth)), cfg_(cfg) {
    cfg_.validate();
    state_.mode = cfg_.mode;
}

LabeledTrajectorySet TmbFilter::step(const Vec& z) {
    state_ = predict(state_, motion_, birth_, cfg_);
    state_ = update(state_, z, model_, cfg_);
    state_ = prune_and_terminate(state_, cfg_);
    return estimate(state_, cfg_);
}

nlohmann::json to_json(const TmbDensity& state) {
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j;
    j["time"] = state.time;
    j["mode"] = state.mode == TrajectoryMode::alive ? "alive" : "all";
    j["components"] = nlohmann::json::array();
    for (const auto& b : state.components) {
        nlohmann::json c;
        c["id"] = b.id;
        c["t_start"] = b.t_start;
        c["r"] = b.r;
        c["dead"] = b.dead;
        nlohmann::json beta = nlohmann::json::object();
        for (const auto& [l, w] : b.beta) beta[std::to_string(l)] = w;
        c["beta"] = beta;
        c["lscan_anchor"] = b.lscan_anchor();
        nlohmann::json frozen = nlohmann::json::array();
        for (const auto& v : b.frozen) frozen.push_back(vec(v));
        c["frozen"] = frozen;
        c["mean"] = vec(b.window.mean());
        nlohmann::json cov = nlohmann::json::array();
        for (Index i = 0; i < b.window.cov().rows(); ++i) cov.push_back(vec(b.window.cov().row(i).transpose()));
        c["cov"] = cov;
        j["components"].push_back(std::move(c));
    }
    return j;
}

}  // namespace tiemb
