#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nocguard/gradcheck.hpp"

// Checks shared by `nocguard self-test`, the unit tests and the acceptance run.
namespace nocguard {

struct LayerGradcheck {
  std::string layer;
  std::size_t trials = 0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "trial/tensor" of the worst probe
  bool passed = true;
};

/// conv1d, avg_pool1d, relu, dropout, linear, graph_conv, sigmoid, weighted_bce, model
const std::vector<std::string>& gradcheck_layers();

/// `trials` finite-difference checks of one layer, each with fresh random shapes
/// and inputs. "model" assembles the full default architecture on a 4-node graph.
LayerGradcheck gradcheck_layer(const std::string& layer, std::size_t trials, std::uint64_t seed,
                               const std::string& fault_op = "", double fault_factor = 1.0);

/// Max |tape graph_conv - X W1 - A X W2 - b| over every labeled simple graph on
/// 1..max_nodes nodes, with random features per graph.
double graphconv_oracle_error(std::size_t max_nodes, std::uint64_t seed);

/// Random 0/1 vectors whose graph decision disagrees with OR of the node decisions.
std::size_t alg1_failures(std::size_t vectors, std::uint64_t seed);

struct SelfTestOptions {
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  std::string fault_op;
  double fault_factor = 0.5;
};

struct SelfTestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelfTestCheck> run_self_test(const SelfTestOptions& opt);

}  // namespace nocguard
