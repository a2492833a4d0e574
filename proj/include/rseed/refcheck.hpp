#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rseed::refcheck {

struct CheckRow {
    std::string op;
    int instance = 0;
    int tensor_index = -1; // input whose gradient had the worst error
    double max_rel = 0.0;
    double max_abs = 0.0;
    int checked = 0;
    int skipped = 0; // coordinates excluded as kink-adjacent (|·| and leaky_relu)
    bool pass = true;
};

struct Report {
    std::vector<CheckRow> rows;
    int total_checks = 0;
    bool all_pass = true;
};

// Central finite-difference checks (h = 1e-3) of every differentiable graph
// op plus the full four-term objective on a miniature two-stage decoder pair.
// Every finite-difference evaluation runs through an independent
// double-precision forward implementation in this module, never through the
// graph being checked. A coordinate passes at rel ≤ 1e-3 or abs ≤ 1e-5.
//
// Coordinates where the objective is locally non-differentiable (an abs or
// leaky_relu argument crossing zero inside the probe step) are detected by
// disagreement between the forward and backward one-sided differences and
// excluded, bounded to a small fraction per case.
//
// defect_op, when non-empty, flips the analytic gradient's sign for that op
// so the reporting path itself can be exercised; the run must then fail.
Report run_gradchecks(uint64_t seed, int instances_per_op,
                      const std::string& defect_op = "");

std::string format_report(const Report& r, bool verbose);

} // namespace rseed::refcheck
