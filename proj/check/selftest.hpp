#pragma once

#include <iosfwd>

namespace oracle {

/// Property suite over every module, one line per check. True when all pass.
bool run_selftest(std::ostream& out);

/// Observed order of the closed-loop integrator: ‖s_h − s_{h/2}‖ / ‖s_{h/2} − s_{h/4}‖
/// at a fixed end time (≈ 16 for a fourth-order method).
double closed_loop_richardson_ratio(double h, double horizon);

}  // namespace oracle
