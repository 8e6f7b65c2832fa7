#pragma once

#include <Eigen/Dense>

#include "fsl/errors.hpp"

namespace fsl {

/// Result of a small dense LP solve.
struct LpSolution {
    double objective = 0.0;
    Eigen::VectorXd x;
    int iterations = 0;
};

/// Maximize c.x subject to A x <= b and x >= 0, where b >= 0 (the slack basis
/// is then feasible, so no phase-1 is needed). Full-tableau primal simplex
/// with Dantzig pricing and a Bland fallback against cycling. Intended for
/// the small dense programs produced by the metric module; optimality
/// tolerance 1e-9.
LpSolution simplex_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                            const Eigen::VectorXd& b, double tol = 1e-9);

}  // namespace fsl
