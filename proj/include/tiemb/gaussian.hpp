#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tiemb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when a linear-algebra step cannot proceed (singular or indefinite
/// matrix, dimension mismatch). The message carries enough context to debug.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Relative floor applied to eigenvalues of every produced covariance.
inline constexpr double kEigenFloorRel = 1e-12;

[[nodiscard]] Mat symmetrize(const Mat& c);

/// Symmetrize and lift eigenvalues below kEigenFloorRel * trace to that floor.
/// Matrices already above the floor are returned symmetrized but otherwise
/// untouched.
[[nodiscard]] Mat clamp_psd(const Mat& c);

/// True when all eigenvalues are >= -rel_tol * |trace|.
[[nodiscard]] bool is_psd(const Mat& c, double rel_tol = 1e-9);

/// Mean vector plus covariance. Construction checks dimensions and
/// symmetrizes the covariance.
class GaussianDensity {
public:
    GaussianDensity() = default;
    GaussianDensity(Vec mean, Mat cov);

    [[nodiscard]] const Vec& mean() const { return mean_; }
    [[nodiscard]] const Mat& cov() const { return cov_; }
    [[nodiscard]] Index dim() const { return mean_.size(); }

private:
    Vec mean_;
    Mat cov_;
};

/// Unscented point set; points are stored column-wise.
struct SigmaPointSet {
    Mat points;
    Vec weights;

    [[nodiscard]] Index count() const { return points.cols(); }
};

/// Linear-Gaussian surrogate z ~ A x + b + r, r ~ N(0, omega).
struct AffineLikelihood {
    Mat A;
    Vec b;
    Mat omega;
};

/// 2d+1 points: the mean with weight central_weight and +/- columns of the
/// symmetric square root of the covariance sharing the remaining mass.
[[nodiscard]] SigmaPointSet draw_sigma_points(const GaussianDensity& density, double central_weight);

/// Result of a Kalman update together with the log marginal likelihood
/// log N(z; A mean + b, A P A^T + omega) of the measurement under the prior.
struct KalmanStep {
    GaussianDensity posterior;
    double log_likelihood = 0.0;
};

[[nodiscard]] KalmanStep kf_update_step(const GaussianDensity& prior, const AffineLikelihood& lik, const Vec& z);

[[nodiscard]] GaussianDensity kf_update(const GaussianDensity& prior, const AffineLikelihood& lik, const Vec& z);

[[nodiscard]] double gaussian_eval(const Vec& z, const Vec& mean, const Mat& cov);

/// Log-density; adds a small diagonal jitter when cov is only semidefinite.
[[nodiscard]] double log_gaussian_eval(const Vec& z, const Vec& mean, const Mat& cov);

/// KL(p || q). Returns +inf when p is degenerate and q is not.
[[nodiscard]] double kld_gaussians(const GaussianDensity& p, const GaussianDensity& q);

/// Conditions the past block y of a joint Gaussian over (y, x) on an updated
/// marginal for the trailing block x (Rauch-Tung-Striebel style gain).
[[nodiscard]] GaussianDensity condition_past_states(const GaussianDensity& joint_prior,
                                                    const GaussianDensity& updated_current);

/// Human-readable dump used in error messages.
[[nodiscard]] std::string format_matrix(const Mat& m);

}  // namespace tiemb
