#include "tiemb/measurement.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tiemb {

namespace {

constexpr int kSeriesBudget = 20000;
constexpr double kAsymptoticSwitch = 30.0;

/// Sum of (a)_n / (b)_n x^n / n! with compensated summation.
double kummer_series(double a, double b, double x) {
    double sum = 1.0;
    double carry = 0.0;
    double term = 1.0;
    for (int n = 0; n < kSeriesBudget; ++n) {
        term *= (a + n) / (b + n) * x / (n + 1);
        const double y = term - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
        if (term == 0.0 || (std::abs(term) < 1e-17 * std::abs(sum) && n > 2)) return sum;
    }
    std::ostringstream os;
    os << "kummer_m: power series did not converge for a=" << a << " b=" << b << " x=" << x;
    throw NumericalError(os.str());
}

/// Large negative argument: M(a,b,x) ~ G(b)/G(b-a) (-x)^-a sum (a)_n (1+a-b)_n / n! (-x)^-n.
/// The companion e^x term is below 1e-13 relative once -x exceeds 30.
double kummer_asymptotic(double a, double b, double x) {
    const double y = -x;
    double sum = 1.0;
    double term = 1.0;
    double smallest = 1.0;
    for (int n = 0; n < 400; ++n) {
        const double next = term * (a + n) * (1.0 + a - b + n) / ((n + 1) * y);
        if (std::abs(next) > std::abs(term) && n > 0) break;  // series starts diverging
        term = next;
        sum += term;
        smallest = std::abs(term);
        if (smallest < 1e-17 * std::abs(sum) || term == 0.0) break;
    }
    if (smallest > 1e-11 * std::abs(sum)) {
        std::ostringstream os;
        os << "kummer_m: asymptotic expansion did not converge for a=" << a << " b=" << b << " x=" << x;
        throw NumericalError(os.str());
    }
    const double log_pref = std::lgamma(b) - std::lgamma(b - a) - a * std::log(y);
    const double sign = std::tgamma(b) / std::tgamma(b - a) >= 0.0 ? 1.0 : -1.0;
    return sign * std::exp(log_pref) * sum;
}

}  // namespace

double kummer_m(double a, double b, double x) {
    if (b <= 0.0 && b == std::floor(b)) {
        throw std::invalid_argument("kummer_m: b must not be a nonpositive integer");
    }
    if (x == 0.0) return 1.0;
    if (x > 0.0) return kummer_series(a, b, x);
    const bool b_minus_a_pole = (b - a) <= 0.0 && (b - a) == std::floor(b - a);
    if (-x > kAsymptoticSwitch && !b_minus_a_pole) return kummer_asymptotic(a, b, x);
    // Kummer's transformation keeps all terms positive for b > a.
    return std::exp(x) * kummer_series(b - a, b, -x);
}

double rician_mean(double lambda, double sigma_r) {
    const double x = -lambda * lambda / (2.0 * sigma_r * sigma_r);
    return sigma_r * std::sqrt(std::numbers::pi / 2.0) * kummer_m(-0.5, 1.0, x);
}

double rician_variance(double lambda, double sigma_r) {
    const double mean = rician_mean(lambda, sigma_r);
    return 2.0 * sigma_r * sigma_r + lambda * lambda - mean * mean;
}

double rician_mean_derivative(double lambda, double sigma_r) {
    const double x = -lambda * lambda / (2.0 * sigma_r * sigma_r);
    return std::sqrt(std::numbers::pi / 2.0) * lambda / (2.0 * sigma_r) * kummer_m(0.5, 2.0, x);
}

RayleighMoments rayleigh_moments(double s) {
    if (s < 0.0) throw std::invalid_argument("rayleigh_moments: mean power must be nonnegative");
    return {std::sqrt(std::numbers::pi * s / 4.0), (4.0 - std::numbers::pi) * s / 4.0};
}

Vec sample_rician(const Vec& lambda, double sigma_r, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec z(lambda.size());
    for (Index j = 0; j < lambda.size(); ++j) {
        const double n1 = normal(rng);
        const double n2 = normal(rng);
        z(j) = std::hypot(lambda(j) + sigma_r * n1, sigma_r * n2);
    }
    return z;
}

// --- RicianGridModel --------------------------------------------------------

RicianGridModel::RicianGridModel(Mat cell_centers, Params params)
    : centers_(std::move(cell_centers)), params_(params) {
    if (centers_.cols() != 2) throw std::invalid_argument("RicianGridModel: cell centres must be M x 2");
    if (!(params_.sigma_r > 0.0 && params_.phi > 0.0 && params_.sigma_x > 0.0 && params_.sigma_y > 0.0)) {
        throw std::invalid_argument("RicianGridModel: sigma_r, phi, sigma_x and sigma_y must be positive");
    }
}

RicianGridModel RicianGridModel::grid(double extent_x, double extent_y, double cell_width, Params params) {
    if (!(cell_width > 0.0)) throw std::invalid_argument("RicianGridModel: cell width must be positive");
    const double nx_real = extent_x / cell_width;
    const double ny_real = extent_y / cell_width;
    const auto nx = static_cast<Index>(std::llround(nx_real));
    const auto ny = static_cast<Index>(std::llround(ny_real));
    if (nx < 1 || ny < 1 || std::abs(nx_real - nx) > 1e-9 || std::abs(ny_real - ny) > 1e-9) {
        std::ostringstream os;
        os << "RicianGridModel: cells of width " << cell_width << " do not tile a " << extent_x << " x " << extent_y
           << " area";
        throw std::invalid_argument(os.str());
    }
    Mat centers(nx * ny, 2);
    for (Index iy = 0; iy < ny; ++iy) {
        for (Index ix = 0; ix < nx; ++ix) {
            centers(iy * nx + ix, 0) = -extent_x / 2.0 + (ix + 0.5) * cell_width;
            centers(iy * nx + ix, 1) = -extent_y / 2.0 + (iy + 0.5) * cell_width;
        }
    }
    return {std::move(centers), params};
}

double RicianGridModel::psf_return(const Vec& x, Index cell) const {
    const double dx = centers_(cell, 0) - x(0);
    const double dy = centers_(cell, 1) - x(2);
    return params_.phi * std::exp(-dx * dx / (2.0 * params_.sigma_x * params_.sigma_x) -
                                  dy * dy / (2.0 * params_.sigma_y * params_.sigma_y));
}

Vec RicianGridModel::h(const Vec& x) const {
    const double ax = 1.0 / (2.0 * params_.sigma_x * params_.sigma_x);
    const double ay = 1.0 / (2.0 * params_.sigma_y * params_.sigma_y);
    const auto dx = (centers_.col(0).array() - x(0));
    const auto dy = (centers_.col(1).array() - x(2));
    return params_.phi * (-(dx.square() * ax) - dy.square() * ay).exp().matrix();
}

Vec RicianGridModel::m(const Vec& s) const {
    Vec out(s.size());
    for (Index j = 0; j < s.size(); ++j) out(j) = rician_mean(s(j), params_.sigma_r);
    return out;
}

Vec RicianGridModel::sigma_diag(const Vec& S) const {
    Vec out(S.size());
    for (Index j = 0; j < S.size(); ++j) out(j) = rician_variance(S(j), params_.sigma_r);
    return out;
}

Vec RicianGridModel::m_jac_diag(const Vec& s) const {
    Vec out(s.size());
    for (Index j = 0; j < s.size(); ++j) out(j) = rician_mean_derivative(s(j), params_.sigma_r);
    return out;
}

Vec RicianGridModel::sample(const Vec& s_sum, const Vec& /*S_sum*/, Rng& rng) const {
    return sample_rician(s_sum, params_.sigma_r, rng);
}

// --- RayleighAmplitudeModel -------------------------------------------------

RayleighAmplitudeModel::RayleighAmplitudeModel(Index state_dim, Index feature_dim, FeatureMap h)
    : state_dim_(state_dim), feature_dim_(feature_dim), h_(std::move(h)) {}

Vec RayleighAmplitudeModel::m(const Vec& s) const {
    Vec out(s.size());
    for (Index j = 0; j < s.size(); ++j) out(j) = rayleigh_moments(s(j)).mean;
    return out;
}

Vec RayleighAmplitudeModel::sigma_diag(const Vec& S) const {
    Vec out(S.size());
    for (Index j = 0; j < S.size(); ++j) out(j) = rayleigh_moments(S(j)).variance;
    return out;
}

Vec RayleighAmplitudeModel::m_jac_diag(const Vec& s) const {
    Vec out(s.size());
    for (Index j = 0; j < s.size(); ++j) {
        if (s(j) < 0.0) throw std::invalid_argument("RayleighAmplitudeModel: negative mean power");
        out(j) = std::sqrt(std::numbers::pi) / (4.0 * std::sqrt(s(j)));
    }
    return out;
}

Vec RayleighAmplitudeModel::sample(const Vec& s_sum, const Vec& /*S_sum*/, Rng& rng) const {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Vec z(s_sum.size());
    for (Index j = 0; j < s_sum.size(); ++j) {
        if (s_sum(j) < 0.0) throw std::invalid_argument("RayleighAmplitudeModel: negative mean power");
        const double u = 1.0 - uniform(rng);  // (0, 1]
        z(j) = std::sqrt(-s_sum(j) * std::log(u));
    }
    return z;
}

// --- AffineGaussianModel ----------------------------------------------------

AffineGaussianModel::AffineGaussianModel(Mat H, Vec c, Vec noise_var)
    : H_(std::move(H)), c_(std::move(c)), noise_(std::move(noise_var)) {
    if (c_.size() != H_.rows() || noise_.size() != H_.rows()) {
        throw std::invalid_argument("AffineGaussianModel: H, c and noise dimensions disagree");
    }
    if ((noise_.array() < 0.0).any()) throw std::invalid_argument("AffineGaussianModel: negative noise variance");
}

Vec AffineGaussianModel::R(const Vec& /*x*/) const {
    return Vec::Zero(H_.rows());
}

Vec AffineGaussianModel::sample(const Vec& s_sum, const Vec& S_sum, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vec var = sigma_diag(S_sum);
    Vec z(s_sum.size());
    for (Index j = 0; j < s_sum.size(); ++j) z(j) = s_sum(j) + std::sqrt(var(j)) * normal(rng);
    return z;
}

}  // namespace tiemb
