#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nocguard/autodiff.hpp"

namespace nocguard {

struct GradcheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps vanishing
  // gradients from turning round-off into huge ratios.
  double floor = 1e-6;
  std::size_t coords_per_tensor = 6;
  std::size_t max_resamples = 200;
  std::uint64_t seed = 1;
  std::string fault_op;  // negative control, see Tape::inject_fault
  double fault_factor = 1.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  std::size_t kink_skips = 0;
  bool passed = true;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor<double>>>;
using LossBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

/// Central finite differences against the tape's gradients. Every tensor in
/// `inputs` becomes a parameter; probes whose ReLU pattern differs from the
/// base point are redrawn.
GradcheckReport gradcheck(const LossBuilder& loss, const NamedTensors& inputs, const GradcheckOptions& opt = {});

}  // namespace nocguard
