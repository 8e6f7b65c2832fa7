#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fsl/models.hpp"
#include "fsl/rng.hpp"

namespace fsl {

/// Outcome of the O(A,C) rank test.
struct ObservabilityReport {
    int rank = 0;
    Eigen::VectorXd singular_values;
    bool observable = false;
    double tolerance = 0.0;
};

/// Rank of the stacked matrix [C; CA; ...; CA^{d-1}] by SVD with the relative
/// threshold sigma > tol * sigma_max. Full rank iff the pair {A, C} is
/// observable.
ObservabilityReport observability_matrix_rank(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                              double tol = 1e-10);

/// Stacked reconstruction rows [int_0^{t_i} C e^{As} ds] and their rank; when
/// the stack has full column rank its pseudoinverse is a linear left inverse
/// recovering x from the noise-free integrated observations.
struct ReconstructionResult {
    Eigen::MatrixXd stacked;  // (k q) x d
    ObservabilityReport rank_report;
    Eigen::MatrixXd reconstruction;  // pseudoinverse, d x (k q); empty unless full rank
};

ReconstructionResult reconstruction_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                           const std::vector<double>& times, double tol = 1e-10);

/// Decomposition h(x) = Cx + h0(x) of a scalar bi-Lipschitz function:
/// C = +-(M + m)/2 by monotonicity, eps = (M - m)/(M + m); valid when the
/// grid slope range [m, M] stays positive and eps < 1. The slope range is
/// estimated from adjacent difference quotients on the probe grid.
struct BiLipschitzDecomposition {
    double C = 0.0;
    double eps = 0.0;
    bool valid = false;
    double slope_min = 0.0;   // m
    double slope_max = 0.0;   // M
    double grid_lip_h0 = 0.0; // grid estimate of ||C^{-1} h0||_L, <= eps when valid
};

BiLipschitzDecomposition bilipschitz_decompose_1d(const std::function<double(double)>& h,
                                                  const std::vector<double>& probe_grid);
BiLipschitzDecomposition bilipschitz_decompose_1d(const std::function<double(double)>& h,
                                                  double lo, double hi, int points = 2001);

/// Window constants of the averaged observation map
/// H_eps(x) = (1/eps) int_0^eps h(eta_s(x)) ds:
///   m(eps) = (1 - ||C^{-1}h0||_L e^{||b||_L eps} - ||b||_L eps e^{||b||_L eps}/2) / ||C^{-1}||
///   M(eps) = ||h||_L e^{||b||_L eps}
/// and eps0 = the window length where m crosses zero (infinite when b is
/// constant). Requires ||C^{-1}h0||_L < 1.
struct SandwichConstants {
    double eps = 0.0;
    double lower = 0.0;  // m(eps)
    double upper = 0.0;  // M(eps)
    double eps0 = 0.0;
};

SandwichConstants lemma51_constants(double lip_Ch0, double lip_b, double norm_Cinv, double lip_h,
                                    double eps);

/// Empirical check of m(eps)||x-y|| <= ||H_eps(x) - H_eps(y)|| <= M(eps)||x-y||
/// on random pairs drawn from a box. H_eps is evaluated by composite Simpson
/// over the fourth-order flow. Throws SandwichViolated with the witnessing
/// pair when a ratio escapes the predicted interval.
struct SandwichCheckReport {
    SandwichConstants constants;
    double worst_low_ratio = 0.0;   // min ||dH|| / ||dx||
    double worst_high_ratio = 0.0;  // max ||dH|| / ||dx||
    int pairs = 0;
};

SandwichCheckReport verify_sandwich(const DiffusionModel& model, double eps, int pair_count,
                                    const Eigen::VectorXd& box_lo, const Eigen::VectorXd& box_hi,
                                    RngStream& rng);

/// Monte Carlo check of the flow-deviation bound
///   sup_{s<=t} sup_x E||X_s - eta_s(x)|| <= e^{||b||_L t} sqrt(K t).
/// Throws BoundViolated when the estimate exceeds the bound beyond the 3 sigma
/// Monte Carlo allowance.
struct FlowDeviationReport {
    double bound = 0.0;         // e^{||b||_L t} sqrt(K t)
    double worst_estimate = 0.0;
    double worst_std_error = 0.0;
    double worst_time = 0.0;
    int paths = 0;
};

FlowDeviationReport verify_flow_deviation(const DiffusionModel& model,
                                          const std::vector<double>& check_times, int mc_paths,
                                          const std::vector<Eigen::VectorXd>& probe_points,
                                          double dt, RngStream& rng);

/// Evaluate H_eps(x) itself (Simpson over the flow; exposed for tests).
Eigen::VectorXd windowed_observation(const DiffusionModel& model, const Eigen::VectorXd& x,
                                     double eps, int subintervals = 64);

}  // namespace fsl
