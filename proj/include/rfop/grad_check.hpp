#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rfop/tape.hpp"

namespace rfop {

/// A deterministic scalar-valued program. It receives the tape and one Var per
/// checked parameter, in order, and returns the scalar root.
using TapeProgram = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  /// Empty unless evaluation produced a non-finite value.
  std::string error;
};

struct GradCheckOptions {
  double tol = 1e-4;
  double step = 1e-5;
  /// Entries where both the analytic and numeric gradient are below this
  /// magnitude are treated as agreeing.
  double abs_floor = 1e-8;
};

/// Compares analytic gradients of `f` to central finite differences, element
/// by element. The relative error of an element is |a - n| / max(|a|, |n|).
GradCheckReport grad_check(const TapeProgram& f, std::span<const Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace rfop
