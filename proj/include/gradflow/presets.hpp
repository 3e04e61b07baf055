#pragma once

#include "gradflow/basis.hpp"
#include "gradflow/common.hpp"
#include "gradflow/lti_plant.hpp"

namespace gradflow {

/// The four-state benchmark: plant, input cost, Lyapunov weight and
/// the reference Lyapunov solution (four decimals).
struct BenchmarkCase {
  PlantModel plant;
  QuadraticCost phi;
  Matrix q;
  Matrix reference_p;
};

BenchmarkCase benchmark_case();

/// ψ(y) = ½‖y − ξ‖² as quadratic-basis coefficients.
Vector tracking_cost_coefficients(const Vector& target);

}  // namespace gradflow
