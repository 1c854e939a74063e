#include "cellcal/gp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cellcal {

namespace {

double matern52(double r, double ell) {
    const double q = std::sqrt(5.0) * r / ell;
    return (1.0 + q + q * q / 3.0) * std::exp(-q);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double ell, double noise) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = 1.0 + noise;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = (X.row(i) - X.row(j)).norm();
            K(i, j) = K(j, i) = matern52(r, ell);
        }
    }
    return K;
}

// Gaussian cdf/pdf for the EI formula.
double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

void GaussianProcess::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size() || X.rows() < 2) {
        throw std::invalid_argument("GP fit needs >= 2 matching samples");
    }
    X_ = X;
    y_mean_ = y.mean();
    const double var = (y.array() - y_mean_).square().sum() /
                       static_cast<double>(y.size() - 1);
    y_std_ = std::sqrt(std::max(var, 1e-12));
    const Eigen::VectorXd z = (y.array() - y_mean_) / y_std_;

    const std::vector<double> grid = {0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0};
    double best_ell = 0.0;
    double best_lml = -1e300;
    for (double ell : grid) {
        for (double noise : {1e-6, 1e-4, 1e-2}) {
            Eigen::MatrixXd K = kernel_matrix(X_, ell, noise);
            Eigen::LLT<Eigen::MatrixXd> llt(K);
            if (llt.info() != Eigen::Success) continue;
            const Eigen::VectorXd alpha = llt.solve(z);
            double logdet = 0.0;
            for (Eigen::Index i = 0; i < K.rows(); ++i) {
                logdet += 2.0 * std::log(llt.matrixL()(i, i));
            }
            const double lml = -0.5 * z.dot(alpha) - 0.5 * logdet;
            if (lml > best_lml) {
                best_lml = lml;
                best_ell = ell;
                noise_ = noise;
            }
        }
    }
    if (best_ell == 0.0) {
        throw std::runtime_error("GP covariance factorization failed");
    }
    lengthscale_ = best_ell;
    Eigen::MatrixXd K = kernel_matrix(X_, lengthscale_, noise_);
    llt_.compute(K);
    if (llt_.info() != Eigen::Success) {
        throw std::runtime_error("GP covariance factorization failed");
    }
    alpha_ = llt_.solve(z);
    fitted_ = true;
}

void GaussianProcess::predict(const Eigen::VectorXd& x, double& mean,
                              double& variance) const {
    if (!fitted_) throw std::logic_error("GP not fitted");
    const Eigen::Index n = X_.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i) = matern52((X_.row(i).transpose() - x).norm(), lengthscale_);
    }
    const double z_mean = k.dot(alpha_);
    const Eigen::VectorXd w = llt_.solve(k);
    const double z_var = std::max(1e-12, 1.0 - k.dot(w));
    mean = y_mean_ + y_std_ * z_mean;
    variance = y_std_ * y_std_ * z_var;
}

double log_expected_improvement(double mean, double variance, double best) {
    const double sigma = std::sqrt(std::max(variance, 1e-18));
    const double z = (best - mean) / sigma;
    // EI = sigma * (z * Phi(z) + phi(z)); guard the deep-tail underflow with
    // the asymptotic log form.
    if (z < -8.0) {
        return std::log(sigma) - 0.5 * z * z - std::log(z * z) -
               0.5 * std::log(2.0 * M_PI);
    }
    const double ei = sigma * (z * norm_cdf(z) + norm_pdf(z));
    return std::log(std::max(ei, 1e-300));
}

}  // namespace cellcal
