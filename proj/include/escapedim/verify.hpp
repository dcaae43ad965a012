#pragma once

#include <string>
#include <vector>

namespace escapedim {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    bool skipped = false;
    std::string measured;
    double seconds = 0.0;
};

struct VerifyOptions {
    bool quick = false;         // skip the power-trick check and the alpha = 3/4 cases
    double tooth_scale = 1.0;   // multiplies every tooth length of the sector combs
    double dimension_slack = 0.05;
};

struct VerifyReport {
    std::vector<CriterionResult> results;
    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

// One line per criterion: "[PASS] 7 dimension formula trend (12.3 s): ..."
std::string format_result(const CriterionResult& r);

// Runs the acceptance checks in order; `on_result` sees each result as it completes.
VerifyReport run_all(const VerifyOptions& options = {},
                     void (*on_result)(const CriterionResult&) = nullptr);

// Single checks, numbered as in run_all.
CriterionResult check_elliptic_identities();
CriterionResult check_critical_values();
CriterionResult check_cosine_oracle();
CriterionResult check_comb_asymptotics();
CriterionResult check_synthetic_dimension();
CriterionResult check_lattice_sums();

}  // namespace escapedim
