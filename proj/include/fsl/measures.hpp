#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

namespace fsl {

/// Finitely supported probability measure on R^d. Atoms are stored as the
/// columns of a d x n matrix. Weights are nonnegative and sum to one within
/// 1e-12; both are immutable after construction.
class DiscreteMeasure {
   public:
    DiscreteMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights);

    static DiscreteMeasure dirac(const Eigen::VectorXd& x);
    static DiscreteMeasure dirac1d(double x);

    /// Build from unnormalized nonnegative weights.
    static DiscreteMeasure from_raw_weights(Eigen::MatrixXd atoms, const Eigen::VectorXd& raw);

    /// Build from log-weights (normalized stably; see normalize_log).
    static DiscreteMeasure from_log_weights(Eigen::MatrixXd atoms, const Eigen::VectorXd& logw);

    /// 1-d convenience: atoms given as scalars.
    static DiscreteMeasure from_points1d(const std::vector<double>& xs,
                                         const std::vector<double>& ws);

    Eigen::Index dim() const { return atoms_.rows(); }
    Eigen::Index size() const { return atoms_.cols(); }
    const Eigen::MatrixXd& atoms() const { return atoms_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    Eigen::VectorXd atom(Eigen::Index i) const { return atoms_.col(i); }

    /// Sum of w_i f(x_i).
    double integrate(const std::function<double(const Eigen::VectorXd&)>& f) const;

    Eigen::VectorXd mean() const;
    Eigen::MatrixXd covariance() const;

    /// CSV with header "atom_0,...,atom_{d-1},weight", one row per atom,
    /// full float precision.
    std::string to_csv() const;
    static DiscreteMeasure from_csv(const std::string& text);

   private:
    Eigen::MatrixXd atoms_;
    Eigen::VectorXd weights_;
};

/// Gaussian law: mean vector plus symmetric positive semidefinite covariance.
class GaussianMeasure {
   public:
    GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    Eigen::Index dim() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }

    /// Matrix square root L with L L^T = covariance (eigendecomposition with
    /// negative eigenvalues clamped to zero, so PSD inputs are accepted).
    Eigen::MatrixXd sqrt_covariance() const;

   private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

/// Additive observation noise law (Gaussian). Semantically distinct from
/// GaussianMeasure: this is the xi of the discrete-chain model and of the
/// convolution operators.
class GaussianNoise {
   public:
    GaussianNoise(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
    static GaussianNoise standard(Eigen::Index d);
    static GaussianNoise scalar(double mean, double variance);

    Eigen::Index dim() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }

    Eigen::VectorXd draw(RngStream& rng) const;

   private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

/// Gaussian density evaluator with precomputed Cholesky factor.
/// Throws SingularNoise when the covariance is not strictly positive definite.
class GaussianDensity {
   public:
    explicit GaussianDensity(const GaussianNoise& noise);

    double log_density(const Eigen::VectorXd& x) const;
    double density(const Eigen::VectorXd& x) const { return std::exp(log_density(x)); }

   private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd chol_lower_;
    double log_norm_;
};

/// Normalize nonnegative weights to sum to one. Throws AllWeightsZero when
/// every entry is zero (degenerate likelihood).
Eigen::VectorXd normalize(const Eigen::VectorXd& raw_weights);

/// Normalize log-weights: subtracts the maximum before exponentiating.
/// Throws AllWeightsZero when every entry is -inf.
Eigen::VectorXd normalize_log(const Eigen::VectorXd& log_weights);

/// Image measure under f: atoms mapped, weights untouched. Atoms whose images
/// coincide are kept as separate atoms.
DiscreteMeasure pushforward(const DiscreteMeasure& mu,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f);

/// n i.i.d. draws, returned as columns. Discrete sampling is inverse-CDF with
/// one uniform per draw.
Eigen::MatrixXd sample(const DiscreteMeasure& mu, Eigen::Index n, RngStream& rng);
Eigen::MatrixXd sample(const GaussianMeasure& mu, Eigen::Index n, RngStream& rng);

/// Density of mu * xi at y (Gaussian mixture). Requires xi nondegenerate.
double convolved_density(const DiscreteMeasure& mu, const GaussianNoise& xi,
                         const Eigen::VectorXd& y);

/// Law of -xi.
GaussianNoise reflect(const GaussianNoise& xi);

}  // namespace fsl
