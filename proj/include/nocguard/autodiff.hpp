#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nocguard/binary_io.hpp"
#include "nocguard/kernels.hpp"
#include "nocguard/rng.hpp"
#include "nocguard/tensor.hpp"

namespace nocguard {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Single-use recording of a forward pass. Values are checked for NaN/Inf after
/// every op; backward() walks the recording in reverse.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;  // backward closures hold `this`
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> v);
  Var parameter(Tensor<T> v);

  const Tensor<T>& value(Var v) const { return node(v).value; }
  /// Gradient after backward(); zeros for variables the loss does not reach.
  const Tensor<T>& grad(Var v);
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // x [B,Cin,L], w [Cout,Cin,K], b [Cout] -> [B,Cout,L']
  Var conv1d(Var x, Var w, Var b, std::size_t stride);
  // Pools the last axis.
  Var avg_pool1d(Var x, std::size_t kernel, std::size_t stride);
  Var relu(Var x);
  Var dropout(Var x, double rate, bool train, Rng& rng);
  Var reshape(Var x, Shape s);
  // x [M,I], w [I,O], b [O]
  Var linear(Var x, Var w, Var b);
  // x [N,F]: x W1 + (A x) W2 + b
  Var graph_conv(Var x, const kernels::Neighbors& adjacency, Var w1, Var w2, Var b);
  Var sigmoid(Var x);
  // Mean over entries of -w(y) [y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1-1e-7].
  Var weighted_bce(Var p, const std::vector<std::uint8_t>& labels, double w_negative, double w_positive);
  Var square(Var x);
  Var sum(Var x);

  /// Reverse pass from a scalar. Throws NoGradient if no parameter feeds `loss`.
  void backward(Var loss, T seed = T(1));

  /// Digest of every ReLU activation pattern recorded since tracking was enabled.
  /// Finite-difference probes compare it to detect kink crossings. Off by default
  /// because hashing every mask is costly during training.
  void track_kinks(bool on) noexcept { track_kinks_ = on; }
  std::uint64_t kink_signature() const noexcept { return kinks_.value(); }

  /// Test hook: scale the upstream gradient of every op named `op` during backward.
  void inject_fault(std::string op, T factor) {
    fault_op_ = std::move(op);
    fault_factor_ = factor;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    std::function<void(Node&)> backward;
    const char* op = "";
    bool requires_grad = false;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(const char* op, Tensor<T> value, std::vector<std::size_t> inputs, std::function<void(Node&)> bw);
  Tensor<T>& input_grad(std::size_t id) { return nodes_[id].grad; }
  bool wants(std::size_t id) const { return nodes_[id].requires_grad && !nodes_[id].grad.data.empty(); }

  std::vector<Node> nodes_;
  Digest64 kinks_;
  bool track_kinks_ = false;
  std::string fault_op_;
  T fault_factor_ = T(1);
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace nocguard
