#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfop/grad_check.hpp"

namespace rfop {

struct OpCheck {
  std::string name;
  GradCheckReport report;
};

/// Gradient checks of every primitive, each loss, and the full model plus
/// weighted loss, on fixed-seed random inputs.
std::vector<OpCheck> run_gradcheck_suite(double tol = 1e-4, std::uint64_t seed = 7);

}  // namespace rfop
