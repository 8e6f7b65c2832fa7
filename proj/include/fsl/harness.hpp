#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsl/config.hpp"
#include "fsl/diagnostics.hpp"
#include "fsl/filters.hpp"
#include "fsl/measures.hpp"
#include "fsl/metrics.hpp"
#include "fsl/models.hpp"
#include "fsl/report.hpp"

namespace fsl {

/// One sampled row of a merging experiment.
struct StabilityRecord {
    double t = 0.0;
    double bl = 0.0;  // exact value when available, else the certified upper bound
    bool bl_exact = true;
    double bl_upper = 0.0;
    double bl_lower = 0.0;
    double tv = 0.0;
    double mean_gap = 0.0;
    double aux = 0.0;  // covariance gap (Frobenius) for Gaussian/cloud runs
};

/// Distance trajectory of one seed's pair of filters driven by a shared
/// observation path.
struct StabilityTrace {
    std::vector<StabilityRecord> records;
    long seed = 0;
    std::uint64_t path_hash = 0;
    std::uint64_t path_hash_mu = 0;  // hash consumed by each filter; all three match
    std::uint64_t path_hash_nu = 0;
    std::string bl_mode;  // "exact" or "bounds"

    static std::vector<std::string> csv_columns();
    std::string to_csv() const;
};

/// Deterministic discretization of a Gaussian for BL evaluation: the mean,
/// the 2d axis points mean +- sqrt(3) L e_j, and n_quantile low-discrepancy
/// quantile atoms mean + L Phi^{-1}(u_k) with van der Corput u_k; uniform
/// weights.
DiscreteMeasure sigma_quantile_atoms(const GaussianMeasure& g, int n_quantile = 512);

// ---------------------------------------------------------------------------
// Stability experiments (observations always generated under the mu prior).
// ---------------------------------------------------------------------------

struct KalmanStabilityConfig {
    LinearGaussianModel model;
    GaussianMeasure prior_mu;
    GaussianMeasure prior_nu;
    double T = 20.0;
    double dt = 1e-3;
    double cadence = 0.5;
    std::vector<long> seeds;
    int quantile_atoms = 512;
    MetricOptions metrics;
};

StabilityTrace run_stability_kalman_seed(const KalmanStabilityConfig& cfg, long seed);
std::vector<StabilityTrace> run_stability_kalman(const KalmanStabilityConfig& cfg);

struct ParticleStabilityConfig {
    DiffusionModel model;
    Prior prior_mu;
    Prior prior_nu;
    double T = 10.0;
    double dt = 1e-2;
    double cadence = 0.5;
    Eigen::Index particles = 500;
    std::vector<long> seeds;
    MetricOptions metrics;
};

StabilityTrace run_stability_particle_seed(const ParticleStabilityConfig& cfg, long seed);
std::vector<StabilityTrace> run_stability_particle(const ParticleStabilityConfig& cfg);

// ---------------------------------------------------------------------------
// Non-merging counterexample.
// ---------------------------------------------------------------------------

struct CounterexampleConfig {
    double lambda = 1.0;
    DiscreteMeasure prior_mu;
    DiscreteMeasure prior_nu;
    int n_max = 8;
    double dt_target = 1e-3;  // rounded so the grid hits every t_n = 2 pi n / lambda
    int settle_n = 5;         // residual is max_{n >= settle_n} |g_n - g_limit|
    std::vector<long> seeds;
};

struct CounterexampleResult {
    long seed = 0;
    std::vector<double> gap;  // g_1 .. g_{n_max}
    double gap_limit = 0.0;
    double residual = 0.0;
};

CounterexampleResult run_counterexample_seed(const CounterexampleConfig& cfg, long seed);
std::vector<CounterexampleResult> run_counterexample(const CounterexampleConfig& cfg);

// ---------------------------------------------------------------------------
// One-step predictor merging for discrete chains.
// ---------------------------------------------------------------------------

struct PredictorMergingConfig {
    DiscreteChainModel model;
    Prior prior_mu;
    Prior prior_nu;
    int n_steps = 25;
    Eigen::Index particles = 10000;
    int cadence = 1;  // record every this many steps (row 0 always recorded)
    std::vector<long> seeds;
    MetricOptions metrics;
};

StabilityTrace run_predictor_merging_seed(const PredictorMergingConfig& cfg, long seed);
std::vector<StabilityTrace> run_predictor_merging(const PredictorMergingConfig& cfg);

// ---------------------------------------------------------------------------
// Convolution experiments (smoothing vs discrete TV).
// ---------------------------------------------------------------------------

struct ConvolutionRow {
    long n = 0;
    double bl = 0.0;            // || mu_n - nu ||_BL
    double tv_atoms = 0.0;      // || mu_n - nu ||_TV (stays 2 on the delta family)
    double tv_smoothed = 0.0;   // || mu_n * xi - nu * xi ||_TV
};

/// Rows for the family mu_n = delta_{scale/n}, nu = delta_0.
std::vector<ConvolutionRow> run_convolution_merging(const std::vector<long>& ns,
                                                    const GaussianNoise& xi, double scale = 1.0,
                                                    const QuadratureSpec& quad = {});

// ---------------------------------------------------------------------------
// Markov-additive identity on finite chains.
// ---------------------------------------------------------------------------

/// For every positive-probability observation prefix up to length t_max and
/// every functional of the next k <= k_max observations (indicator basis),
/// compares the path-enumeration conditional expectation with the
/// filter-restart expectation and returns the largest discrepancy.
/// Requires t_max + k_max <= 8 and at most 3 states/symbols.
double run_lemma42_check(const FiniteHMM& model, const Eigen::VectorXd& prior, int t_max,
                         int k_max);

/// Probability of an observation sequence by literal path enumeration
/// (testing oracle, independent of the forward recursion).
double hmm_sequence_probability(const FiniteHMM& model, const Eigen::VectorXd& prior,
                                const std::vector<int>& symbols);

// ---------------------------------------------------------------------------
// Output emission.
// ---------------------------------------------------------------------------

/// Write trace_seed<k>.csv files, plot.svg (first seed) and summary.txt.
void write_stability_outputs(const std::string& dir, const std::vector<StabilityTrace>& traces,
                             const std::vector<SummaryLine>& summary);

void write_counterexample_outputs(const std::string& dir,
                                  const std::vector<CounterexampleResult>& results,
                                  const std::vector<SummaryLine>& summary);

void write_convolution_outputs(const std::string& dir, const std::vector<ConvolutionRow>& rows,
                               const std::vector<SummaryLine>& summary);

/// Simulated path as CSV "t,x_0..x_{d-1},y_0..y_{q-1}".
std::string path_to_csv(const SignalPath& signal, const ObservationPath& obs);

/// Filter trace CSV "t,mean_0..,cov_00..,ess"; the Kalman columns stay empty
/// for particle runs and the particle column stays empty for Kalman runs.
std::string kalman_trace_to_csv(const std::vector<KalmanState>& states);
std::string particle_trace_to_csv(const std::vector<ParticleState>& states, Eigen::Index dim);

// ---------------------------------------------------------------------------
// Config-file loaders (CLI entry points).
// ---------------------------------------------------------------------------

KalmanStabilityConfig load_kalman_stability(const Config& cfg);
ParticleStabilityConfig load_particle_stability(const Config& cfg);
CounterexampleConfig load_counterexample(const Config& cfg);
PredictorMergingConfig load_predictor_merging(const Config& cfg);

/// Named scalar-field registry used by config files; see README for the
/// vocabulary ("zero", "cos", "sin", "identity", "linear:a",
/// "affine_sin:a", "clip_linear:a,c", "const:c").
std::function<double(double)> named_scalar_function(const std::string& spec);

/// Run indexed jobs on a small thread pool; results keep their slot order.
void parallel_for_index(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace fsl
