#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsl/measures.hpp"
#include "fsl/report.hpp"

namespace fsl {

/// Result of one acceptance criterion (a group of pinned pass/fail checks
/// plus its runtime budget).
struct CriterionOutcome {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    double time_budget = 0.0;
    std::vector<SummaryLine> lines;
};

int acceptance_criterion_count();

/// Run one criterion (1-based id).
CriterionOutcome run_acceptance_criterion(int id);

/// Run every criterion, streaming one "PASS/FAIL ..." line each to `out`.
/// Returns 0 when all pass, 1 otherwise.
int run_acceptance_suite(std::ostream& out);

/// Independent grid-search optimum of the bounded-Lipschitz program over the
/// union atoms (coarse exhaustive scan plus local refinement down to 1e-6).
/// Test oracle: shares nothing with the production solvers.
double bl_grid_search_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

}  // namespace fsl
