#pragma once

#include <Eigen/Dense>

namespace cellcal {

// Gaussian process with an isotropic Matern-5/2 kernel on inputs in [0,1]^d.
// Targets are standardized internally; the lengthscale is picked from a small
// grid by marginal likelihood.
class GaussianProcess {
public:
    // X: n x d, y: n. Throws std::runtime_error when the covariance cannot be
    // factorized even after jitter.
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

    bool fitted() const { return fitted_; }
    double lengthscale() const { return lengthscale_; }

    // Predictive mean and variance in the original target scale.
    void predict(const Eigen::VectorXd& x, double& mean, double& variance) const;

private:
    bool fitted_ = false;
    double lengthscale_ = 0.5;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    double noise_ = 1e-6;
    Eigen::MatrixXd X_;
    Eigen::VectorXd alpha_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// log(EI) of a minimization objective at a point with the given predictive
// mean/variance, against the incumbent best value.
double log_expected_improvement(double mean, double variance, double best);

}  // namespace cellcal
