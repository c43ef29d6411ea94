#include "rfop/grad_check.hpp"

#include <cmath>
#include <sstream>

namespace rfop {

namespace {

Real evaluate(const TapeProgram& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(params.size());
  for (const Tensor& p : params) inputs.push_back(tape.constant(p));
  return f(tape, inputs).item();
}

}  // namespace

GradCheckReport grad_check(const TapeProgram& f, std::span<const Tensor> params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  std::vector<Tensor> work(params.begin(), params.end());
  for (Tensor& t : work) {
    t.grad.reset();
    if (!t.all_finite()) {
      report.error = "non-finite parameter value";
      return report;
    }
  }

  {
    Tape tape;
    std::vector<Var> inputs;
    for (Tensor& t : work) inputs.push_back(tape.parameter(t));
    Var root = f(tape, inputs);
    if (!std::isfinite(root.item())) {
      report.error = "non-finite program output";
      return report;
    }
    tape.backward(root);
  }

  std::vector<Tensor> probe(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    const ArrayX analytic = work[p].grad ? *work[p].grad : ArrayX::Zero(work[p].size());
    if (!analytic.allFinite()) {
      std::ostringstream os;
      os << "non-finite analytic gradient for parameter " << p;
      report.error = os.str();
      return report;
    }
    for (Index i = 0; i < probe[p].size(); ++i) {
      const Real original = probe[p].data[i];
      probe[p].data[i] = original + options.step;
      const Real up = evaluate(f, probe);
      probe[p].data[i] = original - options.step;
      const Real down = evaluate(f, probe);
      probe[p].data[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.error = "non-finite value during finite differencing";
        return report;
      }
      const Real numeric = (up - down) / (2.0 * options.step);
      const Real scale = std::max(std::abs(analytic[i]), std::abs(numeric));
      if (scale < options.abs_floor) continue;
      report.max_rel_err = std::max(report.max_rel_err, std::abs(analytic[i] - numeric) / scale);
    }
  }
  report.pass = report.max_rel_err < options.tol;
  return report;
}

}  // namespace rfop
