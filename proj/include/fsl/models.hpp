#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fsl/measures.hpp"
#include "fsl/rng.hpp"

namespace fsl {

/// dX = A X dt + B dW,  dY = C X dt + D dV.
struct LinearGaussianModel {
    Eigen::MatrixXd A;  // d x d
    Eigen::MatrixXd B;  // d x p
    Eigen::MatrixXd C;  // q x d
    Eigen::MatrixXd D;  // q x r

    LinearGaussianModel(Eigen::MatrixXd A_, Eigen::MatrixXd B_, Eigen::MatrixXd C_,
                        Eigen::MatrixXd D_);
    static LinearGaussianModel scalar(double a, double b, double c, double d);

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index obs_dim() const { return C.rows(); }
    Eigen::MatrixXd observation_noise_cov() const { return D * D.transpose(); }
};

/// dX = b(X) dt + sigma(X) dW,  dY = h(X) dt + D dV with h(x) = C x + h0(x).
/// Lipschitz/bound constants are declared by the caller (they cannot be
/// inferred over all of R^q) and are validated by the diagnostics module.
struct DiffusionModel {
    using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
    using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

    VectorFn b;
    double lip_b = 0.0;  // declared ||b||_L
    MatrixFn sigma;
    double trace_bound = 0.0;  // declared K >= sup Tr[sigma^T sigma]
    Eigen::MatrixXd C;         // invertible q x q
    VectorFn h0;
    double lip_Cinv_h0 = 0.0;  // declared ||C^{-1} h0||_L, must be < 1
    Eigen::MatrixXd D;         // q x r

    DiffusionModel(VectorFn b_, double lip_b_, MatrixFn sigma_, double trace_bound_,
                   Eigen::MatrixXd C_, VectorFn h0_, double lip_Cinv_h0_, Eigen::MatrixXd D_);

    Eigen::Index state_dim() const { return C.cols(); }
    Eigen::VectorXd h(const Eigen::VectorXd& x) const { return C * x + h0(x); }
    double lip_h() const;       // ||C|| (1 + ||C^{-1} h0||_L) upper estimate is not used;
                                // declared as ||C||_2 + ||C||_2 * lip_Cinv_h0
    double norm_Cinv() const;   // spectral norm of C^{-1}
};

/// Deterministic exponential signal on [1, inf) observed through h(x) = 1/x:
///   X_t = X_0 e^{lambda t},  Y_t = int_0^t X_s^{-1} ds + W_t.
struct Example12Model {
    double lambda;

    explicit Example12Model(double lambda_);
    double signal(double x0, double t) const { return x0 * std::exp(lambda * t); }
    /// Exact drift integral int_{t}^{t+dt} x0^{-1} e^{-lambda s} ds.
    double drift_increment(double x0, double t, double dt) const;
};

/// Markov chain X' ~ P(x, .) observed through Y = h(X') + xi. The kernel is
/// given as a sampler; finite chains may also carry the exact transition
/// matrix over a fixed atom set, which the predictor can use instead of
/// sampling.
struct DiscreteChainModel {
    using KernelFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, RngStream&)>;
    using ObsFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    KernelFn kernel;
    ObsFn h;
    GaussianNoise xi;

    struct FiniteKernel {
        Eigen::MatrixXd states;      // d x s fixed atom set
        Eigen::MatrixXd transition;  // s x s row-stochastic
    };
    std::optional<FiniteKernel> finite;

    DiscreteChainModel(KernelFn kernel_, ObsFn h_, GaussianNoise xi_);
};

/// Finite hidden Markov chain with discrete observations; exact oracle
/// testbed for the filter-restart identity.
struct FiniteHMM {
    Eigen::MatrixXd transition;  // s x s row-stochastic
    Eigen::MatrixXd emission;    // s x o row-stochastic

    FiniteHMM(Eigen::MatrixXd transition_, Eigen::MatrixXd emission_);
    Eigen::Index states() const { return transition.rows(); }
    Eigen::Index symbols() const { return emission.cols(); }
};

/// Cumulative observation record on a strictly increasing grid with t_0 = 0
/// and Y_0 = 0.
struct ObservationPath {
    Eigen::VectorXd times;   // K
    Eigen::MatrixXd values;  // q x K, cumulative

    ObservationPath(Eigen::VectorXd times_, Eigen::MatrixXd values_);

    Eigen::Index steps() const { return times.size() - 1; }
    Eigen::Index obs_dim() const { return values.rows(); }
    double dt(Eigen::Index k) const { return times[k + 1] - times[k]; }
    Eigen::VectorXd increment(Eigen::Index k) const {
        return values.col(k + 1) - values.col(k);
    }
    /// FNV-1a over the raw bytes; used to assert that paired filters consumed
    /// the same path.
    std::uint64_t content_hash() const;
};

/// Signal sample path on the same grid.
struct SignalPath {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;  // d x K
};

using Prior = std::variant<GaussianMeasure, DiscreteMeasure>;

/// One draw from a prior.
Eigen::VectorXd draw_prior(const Prior& prior, RngStream& rng);

/// Exact-in-law discretization of the linear Gaussian model: the signal step
/// uses the matrix exponential and the Van Loan integral for the step noise
/// covariance, so the marginal law at grid times is exact for any dt; the
/// observation integral uses left-endpoint Euler.
std::pair<SignalPath, ObservationPath> simulate_linear_gaussian(
    const LinearGaussianModel& model, const Prior& prior, double T, double dt, RngStream& rng);

/// Euler-Maruyama for the diffusion signal and left-endpoint Euler for the
/// observation integral. Requires dt <= 0.1 / max(1, ||b||_L).
std::pair<SignalPath, ObservationPath> simulate_diffusion(const DiffusionModel& model,
                                                          const Eigen::VectorXd& x0, double T,
                                                          double dt, RngStream& rng);

/// Observation path of the exponential-signal model; the drift integral is
/// exact per step and the signal is never discretized. with_noise=false gives
/// the deterministic part only (testing hook).
ObservationPath simulate_example12(const Example12Model& model, double x0, double T, double dt,
                                   RngStream& rng, bool with_noise = true);

/// Deterministic flow eta_t(x) = x + int_0^t b(eta_s(x)) ds, classical
/// fourth-order stepper on a fixed substep grid.
Eigen::VectorXd eta_flow(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& b,
                         const Eigen::VectorXd& x, double t, int substeps);

/// One chain transition and the observation of the post-step state.
std::pair<Eigen::VectorXd, Eigen::VectorXd> step_discrete_chain(const DiscreteChainModel& model,
                                                                const Eigen::VectorXd& x,
                                                                RngStream& rng);

/// Step transition matrix e^{A dt} and integrated noise covariance
/// Q(dt) = int_0^dt e^{As} B B^T e^{A^T s} ds via the augmented exponential.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_lti(const Eigen::MatrixXd& A,
                                                           const Eigen::MatrixXd& B, double dt);

/// int_0^t e^{As} ds via exp([[A, I], [0, 0]] t), upper-right block.
Eigen::MatrixXd integral_exp(const Eigen::MatrixXd& A, double t);

}  // namespace fsl
