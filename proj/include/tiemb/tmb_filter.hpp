#pragma once

#include "tiemb/gaussian.hpp"
#include "tiemb/measurement.hpp"
#include "tiemb/trajectory.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <vector>

namespace tiemb {

enum class TrajectoryMode { alive, all };
enum class UpdateVariant { iplf, ukf };

struct MotionModel {
    Mat F;
    Mat Q;
    double p_survival = 0.99;

    /// Nearly-constant-velocity model for the [px, vx, py, vy] layout.
    [[nodiscard]] static MotionModel ncv(double period, double sigma_q, double p_survival);
};

struct BirthEntry {
    double p_b = 1e-6;
    GaussianDensity density;
};

using BirthModel = std::vector<BirthEntry>;

struct FilterConfig {
    UpdateVariant variant = UpdateVariant::iplf;
    bool exchange = true;  ///< false gives the independent (T-IMB) baseline
    TrajectoryMode mode = TrajectoryMode::alive;
    int lscan = 1;
    double gamma_d = 0.01;
    double gamma_a = 0.01;
    int iplf_max_iters = 20;
    double iplf_kld_threshold = 0.1;
    double sigma_central_weight = 1.0 / 3.0;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    /// Iterations actually used by the update (1 for the UKF variant).
    [[nodiscard]] int effective_iters() const { return variant == UpdateVariant::ukf ? 1 : iplf_max_iters; }
};

/// One potential trajectory.
///
/// The last (at most L) states are held jointly Gaussian in `window`; states
/// that fell out of the L-scan window are kept as fixed means in `frozen`.
/// In all mode `beta` holds the end-time weights and `ended` the mean sequence
/// of every hypothesis l < k, snapshotted when it was created.
struct BernoulliTrajectory {
    int id = 0;
    int t_start = 0;
    Index nx = 4;  ///< single-state dimension
    double r = 0.0;
    std::map<int, double> beta;
    std::vector<Vec> frozen;
    GaussianDensity window;
    std::map<int, std::vector<Vec>> ended;
    bool dead = false;

    [[nodiscard]] int window_states() const { return static_cast<int>(window.dim() / nx); }
    /// Time index of the first state inside the L-scan window.
    [[nodiscard]] int lscan_anchor() const { return t_start + static_cast<int>(frozen.size()); }
    /// Latest time the live hypothesis covers.
    [[nodiscard]] int t_last() const { return lscan_anchor() + window_states() - 1; }
    [[nodiscard]] double beta_at(int l) const;
    /// Full mean sequence of the live hypothesis (frozen prefix plus window).
    [[nodiscard]] std::vector<Vec> live_means() const;
};

struct TmbDensity {
    std::vector<BernoulliTrajectory> components;
    TrajectoryMode mode = TrajectoryMode::alive;
    int time = 0;
    int next_id = 0;
};

struct CurrentMarginal {
    double r_at_k;
    GaussianDensity single;
};

struct TargetMoments {
    Vec E_h;
    Mat E_hh;  ///< empty when not requested
    Vec E_R;
};

struct CorrectionMoments {
    Vec h_corr;
    Mat S_corr;
    Vec R_corr;

    [[nodiscard]] static CorrectionMoments zero(Index feature_dim);
};

/// Global sums over all components of the Bernoulli feature moments.
struct MomentTotals {
    Vec mean;
    Mat cov;
    Vec R;
};

struct IplfResult {
    GaussianDensity posterior;
    AffineLikelihood lik;
    double log_p_exist = 0.0;  ///< log N(z; A mu + b, A Xi A^T + Omega) at the final iterate
    int iterations = 0;
};

struct ExistenceLikelihoods {
    double log_p_exist;
    double log_p_empty;
};

// --- prediction ---------------------------------------------------------------

[[nodiscard]] TmbDensity predict(const TmbDensity& state, const MotionModel& motion, const BirthModel& birth,
                                 const FilterConfig& cfg);

// --- update building blocks ---------------------------------------------------

[[nodiscard]] CurrentMarginal marginalize_current(const BernoulliTrajectory& b, int k);

[[nodiscard]] TargetMoments per_target_moments(const GaussianDensity& single, const SuperpositionalModel& model,
                                               double central_weight, bool with_second_moment = true);

/// Sums r E[h], r E[hh^T] - r^2 E[h]E[h]^T and r E[R] over all targets.
[[nodiscard]] MomentTotals moment_totals(const std::vector<TargetMoments>& moments, const std::vector<double>& r,
                                         Index feature_dim);

/// Correction moments for target u: global totals minus the u-th contribution.
[[nodiscard]] CorrectionMoments correction_moments(const MomentTotals& totals, const TargetMoments& own,
                                                   double r_own);

/// Convenience overload that builds the totals itself.
[[nodiscard]] CorrectionMoments correction_moments(const std::vector<TargetMoments>& moments,
                                                   const std::vector<double>& r, std::size_t exclude);

struct ConditionalMoments {
    Vec mean;
    Mat cov;
};

/// Conditional mean and covariance of z given the u-th target state (or
/// given that it does not exist, when x_u is empty), with the other targets
/// summarised by their correction moments.
[[nodiscard]] ConditionalMoments conditional_moments(const std::optional<Vec>& x_u, const CorrectionMoments& corr,
                                                     const SuperpositionalModel& model);

[[nodiscard]] AffineLikelihood slr_generalized(const GaussianDensity& lin, const CorrectionMoments& corr,
                                               const SuperpositionalModel& model, double central_weight);

[[nodiscard]] IplfResult iplf_update(const GaussianDensity& prior, const CorrectionMoments& corr,
                                     const SuperpositionalModel& model, const Vec& z, const FilterConfig& cfg);

[[nodiscard]] double log_p_empty(const CorrectionMoments& corr, const SuperpositionalModel& model, const Vec& z);

[[nodiscard]] ExistenceLikelihoods existence_likelihoods(const GaussianDensity& prior, const AffineLikelihood& lik,
                                                         const CorrectionMoments& corr,
                                                         const SuperpositionalModel& model, const Vec& z);

/// Existence update r' = rho r / (rho r + p_empty (1 - r)) in log domain.
[[nodiscard]] double updated_existence(double log_rho, double log_p_empty, double r);

[[nodiscard]] BernoulliTrajectory update_bernoulli_alive(const BernoulliTrajectory& b, double log_p_exist,
                                                         double log_p_empty, const GaussianDensity& posterior_single);

[[nodiscard]] BernoulliTrajectory update_bernoulli_all(const BernoulliTrajectory& b, int k, double log_p_exist,
                                                       double log_p_empty, const GaussianDensity& posterior_single);

// --- full steps -----------------------------------------------------------------

[[nodiscard]] TmbDensity update(const TmbDensity& state, const Vec& z, const SuperpositionalModel& model,
                                const FilterConfig& cfg);

[[nodiscard]] TmbDensity prune_and_terminate(const TmbDensity& state, const FilterConfig& cfg);

/// Alive mode: trajectories with r > gamma_d. All mode: additionally picks
/// the most likely end time (ties towards the later one). Labels are ids.
[[nodiscard]] LabeledTrajectorySet estimate(const TmbDensity& state, const FilterConfig& cfg);

/// Drives predict / update / prune over a whole measurement sequence. The
/// model is held by reference and must outlive the filter.
class TmbFilter {
public:
    TmbFilter(const SuperpositionalModel& model, MotionModel motion, BirthModel birth, FilterConfig cfg);

    /// Processes the measurement of the next time step and returns the
    /// estimate at that step.
    LabeledTrajectorySet step(const Vec& z);

    [[nodiscard]] const TmbDensity& state() const { return state_; }
    [[nodiscard]] const FilterConfig& config() const { return cfg_; }

private:
    const SuperpositionalModel& model_;
    MotionModel motion_;
    BirthModel birth_;
    FilterConfig cfg_;
    TmbDensity state_;
};

[[nodiscard]] nlohmann::json to_json(const TmbDensity& state);

}  // namespace tiemb
