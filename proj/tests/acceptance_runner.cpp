// Acceptance gate: one pass/fail line per criterion; exit 0 iff all pass.

#include <cstring>
#include <iostream>

#include "fsl/acceptance.hpp"

int main(int argc, char** argv) {
    if (argc == 3 && std::strcmp(argv[1], "--criterion") == 0) {
        const int id = std::atoi(argv[2]);
        const fsl::CriterionOutcome res = fsl::run_acceptance_criterion(id);
        std::cout << (res.pass ? "PASS" : "FAIL") << " criterion_" << res.id << "_" << res.name
                  << " (" << res.seconds << "s)\n";
        for (const auto& line : res.lines)
            std::cout << "  " << (line.pass ? "PASS" : "FAIL") << " " << line.name << " "
                      << line.value << " " << line.bound << " " << line.note << "\n";
        return res.pass ? 0 : 1;
    }
    return fsl::run_acceptance_suite(std::cout);
}
