#include "fsl/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fsl {

LpSolution simplex_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                            const Eigen::VectorXd& b, double tol) {
    const Eigen::Index n = c.size();
    const Eigen::Index m = A.rows();
    if (A.cols() != n || b.size() != m)
        throw std::invalid_argument("simplex_maximize: dimension mismatch");
    if (m > 0 && b.minCoeff() < 0.0)
        throw std::invalid_argument("simplex_maximize: requires b >= 0");

    // Tableau: m constraint rows + objective row; columns = n structural,
    // m slack, 1 rhs.
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    T.block(0, 0, m, n) = A;
    T.block(0, n, m, m).setIdentity();
    T.col(n + m).head(m) = b;
    T.row(m).head(n) = -c.transpose();

    std::vector<Eigen::Index> basis(m);
    for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

    const long max_iter = 50L * static_cast<long>(m + n) + 1000;
    const long bland_after = 10L * static_cast<long>(m + n) + 100;
    long iter = 0;
    while (true) {
        // Entering column.
        Eigen::Index enter = -1;
        if (iter < bland_after) {
            double best = -tol;
            for (Eigen::Index j = 0; j < n + m; ++j) {
                if (T(m, j) < best) {
                    best = T(m, j);
                    enter = j;
                }
            }
        } else {
            // Bland's rule: first improving index.
            for (Eigen::Index j = 0; j < n + m; ++j) {
                if (T(m, j) < -tol) {
                    enter = j;
                    break;
                }
            }
        }
        if (enter < 0) break;  // optimal

        // Ratio test.
        Eigen::Index leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = T(i, enter);
            if (a > tol) {
                const double ratio = T(i, n + m) / a;
                if (ratio < best_ratio - 1e-15 ||
                    (ratio < best_ratio + 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0)
            throw Error("simplex_maximize: unbounded program");

        // Pivot.
        const double piv = T(leave, enter);
        T.row(leave) /= piv;
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const double factor = T(i, enter);
            if (factor != 0.0) T.row(i) -= factor * T.row(leave);
        }
        basis[leave] = enter;

        if (++iter > max_iter)
            throw Error("simplex_maximize: iteration limit exceeded");
    }

    LpSolution sol;
    sol.objective = T(m, n + m);
    sol.iterations = static_cast<int>(iter);
    sol.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i)
        if (basis[i] < n) sol.x[basis[i]] = T(i, n + m);
    return sol;
}

}  // namespace fsl
