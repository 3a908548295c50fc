#include "nocguard/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nocguard {

namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

Probe evaluate(const LossBuilder& build, const NamedTensors& inputs) {
  Tape<double> tape;
  tape.track_kinks(true);
  std::vector<Var> vars;
  for (const auto& [name, t] : inputs) vars.push_back(tape.parameter(t));
  const Var out = build(tape, vars);
  return {tape.value(out)[0], tape.kink_signature()};
}

}  // namespace

GradcheckReport gradcheck(const LossBuilder& build, const NamedTensors& inputs, const GradcheckOptions& opt) {
  GradcheckReport report;
  std::vector<Tensor<double>> analytic;
  std::uint64_t base_signature = 0;
  {
    Tape<double> tape;
    tape.track_kinks(true);
    if (!opt.fault_op.empty()) tape.inject_fault(opt.fault_op, opt.fault_factor);
    std::vector<Var> vars;
    for (const auto& [name, t] : inputs) vars.push_back(tape.parameter(t));
    const Var out = build(tape, vars);
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
    base_signature = tape.kink_signature();
  }

  Rng rng(opt.seed);
  NamedTensors work = inputs;
  for (std::size_t k = 0; k < work.size(); ++k) {
    auto& t = work[k].second;
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    std::size_t wanted = std::min(opt.coords_per_tensor, t.size());
    std::size_t resamples = 0;
    for (std::size_t c = 0; c < order.size() && wanted > 0; ++c) {
      const std::size_t i = order[c];
      const double orig = t[i];
      t[i] = orig + opt.eps;
      const Probe plus = evaluate(build, work);
      t[i] = orig - opt.eps;
      const Probe minus = evaluate(build, work);
      t[i] = orig;
      if (plus.signature != base_signature || minus.signature != base_signature) {
        ++report.kink_skips;
        if (++resamples > opt.max_resamples) break;
        continue;
      }
      --wanted;
      ++report.checked;
      const double numeric = (plus.loss - minus.loss) / (2.0 * opt.eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = work[k].first;
      }
    }
  }
  report.passed = report.max_rel_error < opt.tolerance && report.checked > 0;
  return report;
}

}  // namespace nocguard
