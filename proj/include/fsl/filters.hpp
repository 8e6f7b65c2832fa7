#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fsl/measures.hpp"
#include "fsl/models.hpp"
#include "fsl/rng.hpp"

namespace fsl {

/// Kalman-Bucy posterior at a grid time. P is resymmetrized every step.
struct KalmanState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double t = 0.0;
};

/// Conditional law of the signal given the cumulative observations, advanced
/// with classical fourth-order steps on the observation grid:
///   dP = AP + PA^T + BB^T - P C^T (DD^T)^{-1} C P,
///   dm = Am dt + P C^T (DD^T)^{-1} (dY - Cm dt).
/// Requires DD^T invertible.
std::vector<KalmanState> kalman_bucy_run(const LinearGaussianModel& model,
                                         const GaussianMeasure& prior,
                                         const ObservationPath& path);

/// Weighted particle cloud at a grid time.
struct ParticleState {
    DiscreteMeasure measure;      // atoms + normalized weights
    Eigen::VectorXd log_weights;  // raw accumulators (zero right after a resample)
    double ess = 0.0;             // 1 / sum w_i^2, in [1, N]
    double t = 0.0;
};

struct ParticleOptions {
    double resample_fraction = 0.5;  // resample when ess < fraction * N
};

using ParticleCallback = std::function<void(const ParticleState&)>;

/// Bootstrap filter against white-noise observations. Per observation step:
/// accumulate the Girsanov log-weight increment
///   h(x)^T (DD^T)^{-1} dY - 0.5 h(x)^T (DD^T)^{-1} h(x) dt
/// at each particle (left-endpoint discretization, matching the simulators),
/// normalize, resample systematically when the effective sample size drops
/// below the threshold, then propagate one simulator step. The callback sees
/// the state at every grid time starting with the initial cloud.
void particle_filter_run(const LinearGaussianModel& model, const Prior& prior,
                         const ObservationPath& path, Eigen::Index n_particles, RngStream& rng,
                         const ParticleCallback& cb, const ParticleOptions& opts = {});

void particle_filter_run(const DiffusionModel& model, const Prior& prior,
                         const ObservationPath& path, Eigen::Index n_particles, RngStream& rng,
                         const ParticleCallback& cb, const ParticleOptions& opts = {});

/// Convenience wrapper that keeps every strided state.
template <class Model>
std::vector<ParticleState> particle_filter_states(const Model& model, const Prior& prior,
                                                  const ObservationPath& path,
                                                  Eigen::Index n_particles, RngStream& rng,
                                                  Eigen::Index stride = 1,
                                                  const ParticleOptions& opts = {}) {
    std::vector<ParticleState> out;
    Eigen::Index k = 0;
    particle_filter_run(
        model, prior, path, n_particles, rng,
        [&](const ParticleState& s) {
            if (k % stride == 0) out.push_back(s);
            ++k;
        },
        opts);
    return out;
}

/// Exact filter for the exponential-signal model: because X_0 determines the
/// whole path, the posterior of X_t is the prior reweighted by
///   exp(x^{-1} int_0^t e^{-lambda s} dY_s - x^{-2}/2 int_0^t e^{-2lambda s} ds)
/// and pushed forward by x -> x e^{lambda t}. The stochastic integral is the
/// left-endpoint sum over the grid, the deterministic one is closed form, and
/// weights are combined in log space. t must lie on the observation grid.
DiscreteMeasure grid_filter_example12(const Example12Model& model, const DiscreteMeasure& prior,
                                      const ObservationPath& path, double t);

/// Infinite-horizon Bayes ratio of the same model:
///   E[f(X_0) | all observations]
///     = int f(x) exp(x^{-1} Z - x^{-2}/(4 lambda)) prior(dx) / (same without f),
/// where Z stands for int_0^inf e^{-lambda s} dY_s.
double limit_posterior_example12(const DiscreteMeasure& prior, double Z, double lambda,
                                 const std::function<double(double)>& f);

struct PredictorOptions {
    bool flat_likelihood = false;  // skip the reweighting (xi variance -> inf limit)
    bool exact_propagation = false;  // use the finite kernel matrix instead of sampling
    Eigen::Index resample_to = 0;    // 0 keeps the current atom count
};

/// One step of the one-step predictor pi_n = P(X_{n+1} in . | Y_0..Y_n):
/// weight the atoms with the xi-density at y - h(x), resample systematically,
/// and move every atom through one kernel draw.
DiscreteMeasure predictor_step_discrete(const DiscreteMeasure& pi, const Eigen::VectorXd& y,
                                        const DiscreteChainModel& model, RngStream& rng,
                                        const PredictorOptions& opts = {});

/// Forward recursion with per-step normalization. Returns the filtered law
/// after each observation; entry 0 is the prior. Observations are 0-based
/// symbol indices. Throws ZeroLikelihood when an observation has zero
/// probability under the predicted law.
std::vector<Eigen::VectorXd> finite_hmm_forward(const FiniteHMM& model,
                                                const Eigen::VectorXd& prior,
                                                const std::vector<int>& observations);

/// Systematic resampling: a pure function of the normalized weights and one
/// uniform draw. Returns the selected parent index for each output slot.
std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights, double u,
                                              Eigen::Index n_out = 0);

/// Effective sample size 1 / sum w_i^2 of normalized weights.
double effective_sample_size(const Eigen::VectorXd& weights);

}  // namespace fsl
