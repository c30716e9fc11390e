#include "tiemb/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tiemb {

namespace {

double eigen_floor(const Mat& c) {
    return kEigenFloorRel * std::max(c.trace(), 0.0);
}

bool all_finite(const Mat& m) {
    return m.allFinite();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw NumericalError(what);
}

}  // namespace

std::string format_matrix(const Mat& m) {
    std::ostringstream os;
    const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "\n", "[", "]");
    os << m.format(fmt);
    return os.str();
}

Mat symmetrize(const Mat& c) {
    return 0.5 * (c + c.transpose());
}

Mat clamp_psd(const Mat& c) {
    Mat s = symmetrize(c);
    if (s.size() == 0) return s;
    const double floor = eigen_floor(s);

    if (floor > 0.0) {
        Mat shifted = s;
        shifted.diagonal().array() -= floor;
        Eigen::LLT<Mat> llt(shifted);
        if (llt.info() == Eigen::Success) return s;
    }

    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    require(es.info() == Eigen::Success, "clamp_psd: eigendecomposition failed for\n" + format_matrix(s));
    Vec lambda = es.eigenvalues().cwiseMax(floor);
    Mat out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
    return symmetrize(out);
}

bool is_psd(const Mat& c, double rel_tol) {
    if (c.size() == 0) return true;
    if (!all_finite(c)) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(c), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -rel_tol * std::abs(c.trace());
}

GaussianDensity::GaussianDensity(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
        std::ostringstream os;
        os << "GaussianDensity: mean has dimension " << mean_.size() << " but covariance is " << cov_.rows()
           << "x" << cov_.cols();
        throw NumericalError(os.str());
    }
    cov_ = symmetrize(cov_);
}

SigmaPointSet draw_sigma_points(const GaussianDensity& density, double central_weight) {
    if (!(central_weight > 0.0 && central_weight < 1.0)) {
        throw std::invalid_argument("draw_sigma_points: central weight must lie in (0, 1)");
    }
    const Index d = density.dim();
    const Mat& p = density.cov();
    require(all_finite(p) && density.mean().allFinite(),
            "draw_sigma_points: non-finite density\n" + format_matrix(p));

    Eigen::SelfAdjointEigenSolver<Mat> es(p);
    require(es.info() == Eigen::Success, "draw_sigma_points: eigendecomposition failed for\n" + format_matrix(p));
    const double tol = 1e-9 * std::abs(p.trace());
    if (d > 0 && es.eigenvalues().minCoeff() < -tol) {
        throw NumericalError("draw_sigma_points: covariance is not positive semidefinite\n" + format_matrix(p));
    }
    const Vec root_lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat root = es.eigenvectors() * root_lambda.asDiagonal() * es.eigenvectors().transpose();

    const double side_weight = (1.0 - central_weight) / (2.0 * static_cast<double>(d));
    const double scale = std::sqrt(static_cast<double>(d) / (1.0 - central_weight));

    SigmaPointSet set;
    set.points.resize(d, 2 * d + 1);
    set.weights.resize(2 * d + 1);
    set.points.col(0) = density.mean();
    set.weights(0) = central_weight;
    for (Index j = 0; j < d; ++j) {
        set.points.col(1 + j) = density.mean() + scale * root.col(j);
        set.points.col(1 + d + j) = density.mean() - scale * root.col(j);
        set.weights(1 + j) = side_weight;
        set.weights(1 + d + j) = side_weight;
    }
    return set;
}

KalmanStep kf_update_step(const GaussianDensity& prior, const AffineLikelihood& lik, const Vec& z) {
    const Index d = prior.dim();
    const Index m = z.size();
    if (lik.A.rows() != m || lik.A.cols() != d || lik.b.size() != m || lik.omega.rows() != m ||
        lik.omega.cols() != m) {
        std::ostringstream os;
        os << "kf_update: inconsistent shapes (state " << d << ", measurement " << m << ", A " << lik.A.rows()
           << "x" << lik.A.cols() << ", b " << lik.b.size() << ", omega " << lik.omega.rows() << "x"
           << lik.omega.cols() << ")";
        throw NumericalError(os.str());
    }

    const Mat pat = prior.cov() * lik.A.transpose();
    Mat s = lik.A * pat + lik.omega;
    s = symmetrize(s);

    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success || !all_finite(s)) {
        Eigen::JacobiSVD<Mat> svd(s);
        const Vec sv = svd.singularValues();
        const double cond = sv.size() > 0 && sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                                        : std::numeric_limits<double>::infinity();
        std::ostringstream os;
        os << "kf_update: innovation covariance is singular (condition number " << cond << ")";
        throw NumericalError(os.str());
    }

    const Vec innovation = z - lik.A * prior.mean() - lik.b;
    const Mat gain = llt.solve(pat.transpose()).transpose();
    Vec mean = prior.mean() + gain * innovation;
    Mat cov = clamp_psd(prior.cov() - gain * pat.transpose());

    const Mat& l = llt.matrixLLT();
    double log_det = 0.0;
    for (Index i = 0; i < m; ++i) log_det += std::log(l(i, i));
    log_det *= 2.0;
    const Vec white = llt.matrixL().solve(innovation);
    const double log_lik =
        -0.5 * (white.squaredNorm() + log_det + static_cast<double>(m) * std::log(2.0 * std::numbers::pi));

    return {GaussianDensity(std::move(mean), std::move(cov)), log_lik};
}

GaussianDensity kf_update(const GaussianDensity& prior, const AffineLikelihood& lik, const Vec& z) {
    return kf_update_step(prior, lik, z).posterior;
}

double log_gaussian_eval(const Vec& z, const Vec& mean, const Mat& cov) {
    const Index d = z.size();
    if (mean.size() != d || cov.rows() != d || cov.cols() != d) {
        std::ostringstream os;
        os << "gaussian_eval: dimension mismatch (z " << d << ", mean " << mean.size() << ", cov " << cov.rows()
           << "x" << cov.cols() << ")";
        throw NumericalError(os.str());
    }
    Mat s = symmetrize(cov);
    Eigen::LLT<Mat> llt(s);
    double jitter = kEigenFloorRel * std::max(std::abs(s.trace()), 1.0);
    for (int attempt = 0; llt.info() != Eigen::Success && attempt < 8; ++attempt) {
        Mat jittered = s;
        jittered.diagonal().array() += jitter;
        llt.compute(jittered);
        jitter *= 10.0;
    }
    if (llt.info() != Eigen::Success) {
        throw NumericalError("gaussian_eval: covariance is not positive semidefinite\n" + format_matrix(s));
    }
    const Mat& l = llt.matrixLLT();
    double log_det = 0.0;
    for (Index i = 0; i < d; ++i) log_det += std::log(l(i, i));
    log_det *= 2.0;
    const Vec white = llt.matrixL().solve(z - mean);
    return -0.5 * (white.squaredNorm() + log_det + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

double gaussian_eval(const Vec& z, const Vec& mean, const Mat& cov) {
    return std::exp(log_gaussian_eval(z, mean, cov));
}

double kld_gaussians(const GaussianDensity& p, const GaussianDensity& q) {
    const Index d = p.dim();
    if (q.dim() != d) throw NumericalError("kld_gaussians: dimension mismatch");
    if (d == 0) return 0.0;

    Eigen::LLT<Mat> q_llt(q.cov());
    if (q_llt.info() != Eigen::Success) {
        throw NumericalError("kld_gaussians: q covariance is singular\n" + format_matrix(q.cov()));
    }
    Eigen::LLT<Mat> p_llt(p.cov());
    if (p_llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

    double log_det_q = 0.0;
    double log_det_p = 0.0;
    for (Index i = 0; i < d; ++i) {
        log_det_q += std::log(q_llt.matrixLLT()(i, i));
        log_det_p += std::log(p_llt.matrixLLT()(i, i));
    }
    const double trace_term = q_llt.solve(p.cov()).trace();
    const Vec diff = q.mean() - p.mean();
    const double maha = diff.dot(q_llt.solve(diff));
    const double kld = 0.5 * (trace_term + maha - static_cast<double>(d)) + (log_det_q - log_det_p);
    return std::max(kld, 0.0);
}

GaussianDensity condition_past_states(const GaussianDensity& joint_prior, const GaussianDensity& updated_current) {
    const Index n = joint_prior.dim();
    const Index nx = updated_current.dim();
    if (nx > n) throw NumericalError("condition_past_states: current block larger than joint density");
    const Index ny = n - nx;
    if (ny == 0) return updated_current;

    const Mat& p = joint_prior.cov();
    const Mat p_xx = p.bottomRightCorner(nx, nx);
    const Mat p_xy = p.bottomLeftCorner(nx, ny);
    Eigen::LLT<Mat> llt(p_xx);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("condition_past_states: current-state prior covariance is singular\n" +
                             format_matrix(p_xx));
    }
    const Mat gain = llt.solve(p_xy).transpose();  // ny x nx

    const Vec& w_mean_x = updated_current.mean();
    const Mat& w_xx = updated_current.cov();

    Vec mean(n);
    mean.head(ny) = joint_prior.mean().head(ny) + gain * (w_mean_x - joint_prior.mean().tail(nx));
    mean.tail(nx) = w_mean_x;

    Mat cov(n, n);
    cov.topLeftCorner(ny, ny) = p.topLeftCorner(ny, ny) - gain * (p_xx - w_xx) * gain.transpose();
    cov.topRightCorner(ny, nx) = gain * w_xx;
    cov.bottomLeftCorner(nx, ny) = w_xx * gain.transpose();
    cov.bottomRightCorner(nx, nx) = w_xx;
    return {std::move(mean), clamp_psd(cov)};
}

}  // namespace tiemb
