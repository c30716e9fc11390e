#pragma once

#include "tiemb/gaussian.hpp"

#include <functional>
#include <random>

namespace tiemb {

using Rng = std::mt19937_64;

/// Confluent hypergeometric function of the first kind M(a, b, x).
/// Accurate to ~1e-12 relative for the (a, b) pairs used by the Rician model
/// and any real x. Throws NumericalError if a series fails to converge.
[[nodiscard]] double kummer_m(double a, double b, double x);

/// Mean, variance and d(mean)/d(lambda) of a Rice amplitude with noncentrality
/// lambda and noise scale sigma_r.
[[nodiscard]] double rician_mean(double lambda, double sigma_r);
[[nodiscard]] double rician_variance(double lambda, double sigma_r);
[[nodiscard]] double rician_mean_derivative(double lambda, double sigma_r);

struct RayleighMoments {
    double mean;
    double variance;
};

/// Amplitude moments of a Rayleigh return with mean power s.
[[nodiscard]] RayleighMoments rayleigh_moments(double s);

/// Generalised superpositional measurement model.
///
/// A target with state x contributes h(x) (internal mean features) and R(x)
/// (internal covariance features). Given the superposed sums s and S over all
/// targets the measurement has mean m(s) and covariance Sigma(S). Both concrete
/// models have independent sensors with one scalar per sensor, so R, Sigma and
/// the Jacobian of m are diagonal and carried as vectors; a general model would
/// carry full blocks here.
class SuperpositionalModel {
public:
    virtual ~SuperpositionalModel() = default;

    [[nodiscard]] virtual Index state_dim() const = 0;
    [[nodiscard]] virtual Index feature_dim() const = 0;
    [[nodiscard]] virtual Index meas_dim() const = 0;

    [[nodiscard]] virtual Vec h(const Vec& x) const = 0;
    [[nodiscard]] virtual Vec R(const Vec& x) const = 0;
    [[nodiscard]] virtual Vec m(const Vec& s) const = 0;
    [[nodiscard]] virtual Vec sigma_diag(const Vec& S) const = 0;
    [[nodiscard]] virtual Vec m_jac_diag(const Vec& s) const = 0;

    /// Draws a measurement given the superposed features.
    [[nodiscard]] virtual Vec sample(const Vec& s_sum, const Vec& S_sum, Rng& rng) const = 0;

    [[nodiscard]] Mat Sigma(const Vec& S) const { return sigma_diag(S).asDiagonal(); }
    [[nodiscard]] Mat M_jac(const Vec& s) const { return m_jac_diag(s).asDiagonal(); }
};

/// Radar grid with Gaussian point-spread returns and Rician cell amplitudes.
/// State layout is [px, vx, py, vy]. The model is parameterised by the
/// noncentrality alone, so R(x) = h(x).
class RicianGridModel final : public SuperpositionalModel {
public:
    struct Params {
        double sigma_r = 2.0;
        double phi = 10.0;
        double sigma_x = 10.0;
        double sigma_y = 10.0;
    };

    /// cell_centers is M x 2 (columns c_x, c_y).
    RicianGridModel(Mat cell_centers, Params params);

    /// Row-major tiling of an extent_x by extent_y area centred at the origin.
    [[nodiscard]] static RicianGridModel grid(double extent_x, double extent_y, double cell_width, Params params);

    [[nodiscard]] Index state_dim() const override { return 4; }
    [[nodiscard]] Index feature_dim() const override { return centers_.rows(); }
    [[nodiscard]] Index meas_dim() const override { return centers_.rows(); }

    [[nodiscard]] Vec h(const Vec& x) const override;
    [[nodiscard]] Vec R(const Vec& x) const override { return h(x); }
    [[nodiscard]] Vec m(const Vec& s) const override;
    [[nodiscard]] Vec sigma_diag(const Vec& S) const override;
    [[nodiscard]] Vec m_jac_diag(const Vec& s) const override;
    [[nodiscard]] Vec sample(const Vec& s_sum, const Vec& S_sum, Rng& rng) const override;

    [[nodiscard]] double psf_return(const Vec& x, Index cell) const;
    [[nodiscard]] const Mat& cell_centers() const { return centers_; }
    [[nodiscard]] const Params& params() const { return params_; }

private:
    Mat centers_;
    Params params_;
};

/// Draws one Rice amplitude per cell: |(lambda + sigma_r n1) + i sigma_r n2|.
[[nodiscard]] Vec sample_rician(const Vec& lambda, double sigma_r, Rng& rng);

/// Swerling-1 style amplitude model: each target contributes mean power h(x),
/// the amplitude is Rayleigh with mean sqrt(pi s / 4). Only used with
/// nonempty superpositions (the empty-set likelihood is degenerate).
class RayleighAmplitudeModel final : public SuperpositionalModel {
public:
    using FeatureMap = std::function<Vec(const Vec&)>;

    RayleighAmplitudeModel(Index state_dim, Index feature_dim, FeatureMap h);

    [[nodiscard]] Index state_dim() const override { return state_dim_; }
    [[nodiscard]] Index feature_dim() const override { return feature_dim_; }
    [[nodiscard]] Index meas_dim() const override { return feature_dim_; }

    [[nodiscard]] Vec h(const Vec& x) const override { return h_(x); }
    [[nodiscard]] Vec R(const Vec& x) const override { return h_(x); }
    [[nodiscard]] Vec m(const Vec& s) const override;
    [[nodiscard]] Vec sigma_diag(const Vec& S) const override;
    [[nodiscard]] Vec m_jac_diag(const Vec& s) const override;
    [[nodiscard]] Vec sample(const Vec& s_sum, const Vec& S_sum, Rng& rng) const override;

private:
    Index state_dim_;
    Index feature_dim_;
    FeatureMap h_;
};

/// Standard additive model: h(x) = H x + c, R = 0, m = identity,
/// Sigma(S) = diag(noise) + S. Useful as a linear-Gaussian reference.
class AffineGaussianModel final : public SuperpositionalModel {
public:
    AffineGaussianModel(Mat H, Vec c, Vec noise_var);

    [[nodiscard]] Index state_dim() const override { return H_.cols(); }
    [[nodiscard]] Index feature_dim() const override { return H_.rows(); }
    [[nodiscard]] Index meas_dim() const override { return H_.rows(); }

    [[nodiscard]] Vec h(const Vec& x) const override { return H_ * x + c_; }
    [[nodiscard]] Vec R(const Vec& x) const override;
    [[nodiscard]] Vec m(const Vec& s) const override { return s; }
    [[nodiscard]] Vec sigma_diag(const Vec& S) const override { return noise_ + S; }
    [[nodiscard]] Vec m_jac_diag(const Vec& s) const override { return Vec::Ones(s.size()); }
    [[nodiscard]] Vec sample(const Vec& s_sum, const Vec& S_sum, Rng& rng) const override;

    [[nodiscard]] const Mat& H() const { return H_; }
    [[nodiscard]] const Vec& c() const { return c_; }
    [[nodiscard]] const Vec& noise() const { return noise_; }

private:
    Mat H_;
    Vec c_;
    Vec noise_;
};

}  // namespace tiemb
