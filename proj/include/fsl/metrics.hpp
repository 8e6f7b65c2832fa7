#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsl/measures.hpp"
#include "fsl/rng.hpp"

namespace fsl {

/// Scaled cos^2-bump partition of unity on R^d, indexed by k in Z^d:
///   member_k(x) = prod_i phi_{k_i}(alpha * x_i),
///   phi_k(u) = cos^2(pi (u - k) / 2) for |u - k| <= 1, else 0.
/// At every point the members are in [0,1], at most 2^d are active, they sum
/// to one, and each is Lipschitz with constant at most (alpha pi / 2) sqrt(d).
struct PartitionOfUnity {
    double alpha;
    int dim;

    PartitionOfUnity(double alpha_, int dim_);

    double member(const Eigen::VectorXi& k, const Eigen::VectorXd& x) const;

    /// Indices of all members that can be nonzero at x (cartesian product of
    /// the <= 3 candidate integers per axis).
    std::vector<Eigen::VectorXi> active_members(const Eigen::VectorXd& x) const;

    double lipschitz_bound() const;
};

/// One-dimensional factor phi_k evaluated at alpha * x; the tensor member is
/// the product over coordinates.
double partition_member_eval(const Eigen::VectorXi& k, double alpha, const Eigen::VectorXd& x);

/// Exact dual bounded-Lipschitz distance between discrete measures:
///   max sum_i f_i (mu_i - nu_i)  s.t. |f_i| <= 1, |f_i - f_j| <= |x_i - x_j|.
/// A feasible assignment on finitely many points extends to all of R^d
/// (McShane extension clipped to [-1,1]), so the program value equals the
/// supremum over Lip(R^d). In one dimension the pair constraints reduce to
/// adjacent atoms after sorting and the program is solved by an exact
/// concave-envelope recursion; in higher dimension the dense pair
/// formulation is handed to the simplex solver.
/// Throws SupportTooLarge when the union support exceeds `support_cap`.
double bl_distance_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         Eigen::Index support_cap = 2000);

/// Certified upper bound from the partition of unity at scale alpha:
///   min(2, 2 sqrt(d)/alpha + sum_k |mu(member_k) - nu(member_k)|).
/// Loose for well-separated atoms at fine scales; callers minimize over alpha.
double bl_upper_partition(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double alpha);

/// Randomized lower bound: max over sampled hinge test functions
/// x -> clip(<u,x> + c, -1, 1) with |u| = 1 of |mu(g) - nu(g)|.
double bl_lower_random(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int trials,
                       RngStream& rng);

/// Total variation in the sup_{|f|<=1} convention (twice the set-based TV):
/// sum over the union of atoms of |mu({x}) - nu({x})|, matching atoms only
/// when they coincide exactly.
double tv_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Composite-Simpson quadrature request for tv_convolved.
struct QuadratureSpec {
    int nodes_per_axis = 4001;  // forced odd
    double padding_sigmas = 8.0;
};

/// Total variation between mu * xi and nu * xi (integral of |density
/// difference| over a box covering all atoms +- padding_sigmas standard
/// deviations). Only d <= 2 is supported; requires xi nondegenerate.
double tv_convolved(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const GaussianNoise& xi, const QuadratureSpec& grid = {});

/// Bundle of the distances the experiments trace.
struct MetricReport {
    std::optional<double> exact_bl;  // absent when the support cap was exceeded
    double bl_upper = 0.0;
    double bl_lower = 0.0;
    double tv = 0.0;

    static std::string csv_header() { return "t,bl_exact,bl_upper,bl_lower,tv"; }
    std::string csv_row(double t) const;
};

struct MetricOptions {
    Eigen::Index support_cap = 2000;
    std::vector<double> upper_alphas = {1, 2, 5, 10, 20, 50};
    int lower_trials = 200;
};

/// Compute the full report: exact BL when the union support is within the
/// cap, the partition upper bound minimized over the alpha grid, the hinge
/// lower bound, and the discrete total variation.
MetricReport metric_report(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const MetricOptions& opts, RngStream& rng);

namespace detail {
/// Pairwise-constraint simplex route, any dimension (testing hook; the public
/// entry dispatches to the chain recursion when d == 1).
double bl_via_simplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
/// Sorted-chain recursion, d == 1 only.
double bl_via_chain(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
}  // namespace detail

}  // namespace fsl
