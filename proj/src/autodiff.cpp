#include "nocguard/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace nocguard {

namespace {

void expect_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank)
    throw Error(ErrorCode::Shape, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                      ", got " + shape_string(s));
}

void expect(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::Shape, std::string(op) + ": " + msg);
}

// Dropout keeps element i when the hash of (key + i) clears the cut. The mask is
// random, so a branch mispredicts constantly; GCC turns a ternary or a 0/1
// multiply back into one, so the scale is masked at the bit level instead.
template <class T>
void dropout_apply(const T* __restrict in, T* __restrict out, std::size_t n, std::uint64_t key, std::uint64_t cut,
                   T scale, bool accumulate) {
  using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const Bits scale_bits = std::bit_cast<Bits>(scale);
  auto factor = [&](std::size_t i) {
    const Bits keep = Bits(0) - static_cast<Bits>((mix64(key + i) >> 11) >= cut);
    return std::bit_cast<T>(scale_bits & keep);
  };
  if (accumulate) {
    for (std::size_t i = 0; i < n; ++i) out[i] += in[i] * factor(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * factor(i);
  }
}

template <class T>
void relu_backward(const T* __restrict out, const T* __restrict up, T* __restrict g, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) g[i] += out[i] > T(0) ? up[i] : T(0);
}

}  // namespace

template <class T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id >= nodes_.size()) throw Error(ErrorCode::Shape, "variable does not belong to this tape");
  return nodes_[v.id];
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error(ErrorCode::Shape, "variable does not belong to this tape");
  return nodes_[v.id];
}

template <class T>
Var Tape<T>::push(const char* op, Tensor<T> value, std::vector<std::size_t> inputs, std::function<void(Node&)> bw) {
  if (!value.all_finite()) throw Error(ErrorCode::NonFinite, std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <class T>
Var Tape<T>::constant(Tensor<T> v) {
  return push("constant", std::move(v), {}, nullptr);
}

template <class T>
Var Tape<T>::parameter(Tensor<T> v) {
  Var out = push("parameter", std::move(v), {}, nullptr);
  nodes_[out.id].requires_grad = true;
  return out;
}

template <class T>
const Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = node(v);
  if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <class T>
Var Tape<T>::conv1d(Var x, Var w, Var b, std::size_t stride) {
  const auto& xs = value(x).shape;
  const auto& ws = value(w).shape;
  expect_rank(xs, 3, "conv1d", "input");
  expect_rank(ws, 3, "conv1d", "kernel");
  expect(xs[1] == ws[1], "conv1d", "input channels " + shape_string(xs) + " vs kernel " + shape_string(ws));
  expect(value(b).shape == Shape{ws[0]}, "conv1d", "bias must be [out_ch]");
  if (stride == 0) throw Error(ErrorCode::InvalidConfig, "conv1d: stride must be >= 1");
  if (xs[2] < ws[2])
    throw Error(ErrorCode::Length, "conv1d: length " + std::to_string(xs[2]) + " is shorter than kernel " +
                                       std::to_string(ws[2]));
  kernels::ConvShape s{xs[0], xs[1], ws[0], xs[2], ws[2], stride};
  Tensor<T> y({s.batch, s.out_ch, s.out_length()});
  kernels::conv1d_forward(s, value(x).ptr(), value(w).ptr(), value(b).ptr(), y.ptr());
  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return push("conv1d", std::move(y), {xi, wi, bi}, [this, s, xi, wi, bi](Node& self) {
    kernels::conv1d_backward(s, nodes_[xi].value.ptr(), nodes_[wi].value.ptr(), self.grad.ptr(),
                             wants(xi) ? input_grad(xi).ptr() : nullptr, wants(wi) ? input_grad(wi).ptr() : nullptr,
                             wants(bi) ? input_grad(bi).ptr() : nullptr);
  });
}

template <class T>
Var Tape<T>::avg_pool1d(Var x, std::size_t kernel, std::size_t stride) {
  const auto& xs = value(x).shape;
  expect(!xs.empty(), "avg_pool1d", "input must have rank >= 1");
  if (kernel == 0 || stride == 0) throw Error(ErrorCode::InvalidConfig, "avg_pool1d: kernel and stride must be >= 1");
  const std::size_t len = xs.back();
  if (len < kernel)
    throw Error(ErrorCode::Length, "avg_pool1d: length " + std::to_string(len) + " is shorter than window " +
                                       std::to_string(kernel));
  kernels::PoolShape s{value(x).size() / len, len, kernel, stride};
  Shape ys = xs;
  ys.back() = s.out_length();
  Tensor<T> y(ys);
  kernels::avg_pool_forward(s, value(x).ptr(), y.ptr());
  const std::size_t xi = x.id;
  return push("avg_pool1d", std::move(y), {xi}, [this, s, xi](Node& self) {
    if (wants(xi)) kernels::avg_pool_backward(s, self.grad.ptr(), input_grad(xi).ptr());
  });
}

template <class T>
Var Tape<T>::relu(Var x) {
  const auto& xv = value(x);
  Tensor<T> y(xv.shape);
  const std::size_t n = xv.size();
  const T* xp = xv.ptr();
  T* yp = y.ptr();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
  if (track_kinks_) {
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = xp[i] > T(0);
    kinks_.update(mask);
  }
  const std::size_t xi = x.id;
  // The output is positive exactly where the input was, so it doubles as the mask.
  return push("relu", std::move(y), {xi}, [this, xi](Node& self) {
    if (!wants(xi)) return;
    relu_backward(self.value.ptr(), self.grad.ptr(), input_grad(xi).ptr(), self.grad.size());
  });
}

template <class T>
Var Tape<T>::dropout(Var x, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout rate must lie in [0,1)");
  if (!train || rate == 0.0) return x;
  const auto& xv = value(x);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  // Mask bit i is a pure function of (key, i), so backward recomputes it
  // instead of storing a mask the size of the activation.
  const std::uint64_t key = rng.next();
  const auto cut = static_cast<std::uint64_t>(std::ldexp(rate, 53));
  Tensor<T> y(xv.shape);
  dropout_apply(xv.ptr(), y.ptr(), xv.size(), key, cut, keep_scale, false);
  const std::size_t xi = x.id;
  return push("dropout", std::move(y), {xi}, [this, xi, key, cut, keep_scale](Node& self) {
    if (!wants(xi)) return;
    dropout_apply(self.grad.ptr(), input_grad(xi).ptr(), self.grad.size(), key, cut, keep_scale, true);
  });
}

template <class T>
Var Tape<T>::reshape(Var x, Shape s) {
  Tensor<T> y = value(x).reshaped(std::move(s));
  const std::size_t xi = x.id;
  return push("reshape", std::move(y), {xi}, [this, xi](Node& self) {
    if (!wants(xi)) return;
    auto& g = input_grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <class T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const auto& xs = value(x).shape;
  const auto& ws = value(w).shape;
  expect_rank(xs, 2, "linear", "input");
  expect_rank(ws, 2, "linear", "weight");
  expect(xs[1] == ws[0], "linear", "input " + shape_string(xs) + " does not match weight " + shape_string(ws));
  expect(value(b).shape == Shape{ws[1]}, "linear", "bias must be [out]");
  kernels::LinearShape s{xs[0], ws[0], ws[1]};
  Tensor<T> y({s.rows, s.out});
  kernels::linear_forward(s, value(x).ptr(), value(w).ptr(), value(b).ptr(), y.ptr());
  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return push("linear", std::move(y), {xi, wi, bi}, [this, s, xi, wi, bi](Node& self) {
    kernels::linear_backward(s, nodes_[xi].value.ptr(), nodes_[wi].value.ptr(), self.grad.ptr(),
                             wants(xi) ? input_grad(xi).ptr() : nullptr, wants(wi) ? input_grad(wi).ptr() : nullptr,
                             wants(bi) ? input_grad(bi).ptr() : nullptr);
  });
}

template <class T>
Var Tape<T>::graph_conv(Var x, const kernels::Neighbors& adjacency, Var w1, Var w2, Var b) {
  const auto& xs = value(x).shape;
  expect_rank(xs, 2, "graph_conv", "input");
  expect_rank(value(w1).shape, 2, "graph_conv", "W1");
  expect(value(w1).shape == value(w2).shape, "graph_conv", "W1 and W2 must share a shape");
  expect(xs[1] == value(w1).dim(0), "graph_conv", "feature width does not match W1");
  expect(value(b).shape == Shape{value(w1).dim(1)}, "graph_conv", "bias must be [out]");
  if (adjacency.nodes() != xs[0])
    throw Error(ErrorCode::Shape, "graph_conv: adjacency has " + std::to_string(adjacency.nodes()) +
                                      " nodes, features have " + std::to_string(xs[0]));
  kernels::LinearShape s{xs[0], xs[1], value(w1).dim(1)};
  auto nb = std::make_shared<const kernels::Neighbors>(adjacency);
  auto agg = std::make_shared<Tensor<T>>(Shape{s.rows, s.in});
  kernels::neighbor_sum(*nb, s.in, value(x).ptr(), agg->ptr());
  Tensor<T> y({s.rows, s.out});
  Tensor<T> mixed({s.rows, s.out});
  kernels::linear_forward(s, value(x).ptr(), value(w1).ptr(), value(b).ptr(), y.ptr());
  kernels::linear_forward<T>(s, agg->ptr(), value(w2).ptr(), nullptr, mixed.ptr());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += mixed[i];
  const std::size_t xi = x.id, w1i = w1.id, w2i = w2.id, bi = b.id;
  return push("graph_conv", std::move(y), {xi, w1i, w2i, bi}, [this, s, nb, agg, xi, w1i, w2i, bi](Node& self) {
    const T* dy = self.grad.ptr();
    kernels::linear_backward(s, nodes_[xi].value.ptr(), nodes_[w1i].value.ptr(), dy,
                             wants(xi) ? input_grad(xi).ptr() : nullptr, wants(w1i) ? input_grad(w1i).ptr() : nullptr,
                             wants(bi) ? input_grad(bi).ptr() : nullptr);
    Tensor<T> dagg({s.rows, s.in});
    kernels::linear_backward<T>(s, agg->ptr(), nodes_[w2i].value.ptr(), dy, wants(xi) ? dagg.ptr() : nullptr,
                                wants(w2i) ? input_grad(w2i).ptr() : nullptr, nullptr);
    if (wants(xi)) {
      // A is symmetric, so the transpose of aggregation is aggregation.
      Tensor<T> back({s.rows, s.in});
      kernels::neighbor_sum(*nb, s.in, dagg.ptr(), back.ptr());
      auto& g = input_grad(xi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
    }
  });
}

template <class T>
Var Tape<T>::sigmoid(Var x) {
  const auto& xv = value(x);
  Tensor<T> y(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  const std::size_t xi = x.id;
  return push("sigmoid", std::move(y), {xi}, [this, xi](Node& self) {
    if (!wants(xi)) return;
    auto& g = input_grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T p = self.value[i];
      g[i] += self.grad[i] * p * (T(1) - p);
    }
  });
}

template <class T>
Var Tape<T>::weighted_bce(Var p, const std::vector<std::uint8_t>& labels, double w_negative, double w_positive) {
  const auto& pv = value(p);
  if (labels.size() != pv.size())
    throw Error(ErrorCode::Shape, "weighted_bce: " + std::to_string(labels.size()) + " labels for " +
                                      std::to_string(pv.size()) + " probabilities");
  if (pv.size() == 0) throw Error(ErrorCode::Shape, "weighted_bce: empty input");
  const double n = static_cast<double>(pv.size());
  double loss = 0.0;
  std::vector<T> dp(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double raw = static_cast<double>(pv[i]);
    const double q = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const bool clamped = q != raw;
    const double w = labels[i] ? w_positive : w_negative;
    if (labels[i]) {
      loss -= w * std::log(q);
      dp[i] = clamped ? T(0) : static_cast<T>(-w / (q * n));
    } else {
      loss -= w * std::log1p(-q);
      dp[i] = clamped ? T(0) : static_cast<T>(w / ((1.0 - q) * n));
    }
  }
  Tensor<T> out({1}, static_cast<T>(loss / n));
  const std::size_t pi = p.id;
  return push("weighted_bce", std::move(out), {pi}, [this, pi, dp = std::move(dp)](Node& self) {
    if (!wants(pi)) return;
    auto& g = input_grad(pi);
    for (std::size_t i = 0; i < dp.size(); ++i) g[i] += self.grad[0] * dp[i];
  });
}

template <class T>
Var Tape<T>::square(Var x) {
  const auto& xv = value(x);
  Tensor<T> y(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * xv[i];
  const std::size_t xi = x.id;
  return push("square", std::move(y), {xi}, [this, xi](Node& self) {
    if (!wants(xi)) return;
    auto& g = input_grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * nodes_[xi].value[i] * self.grad[i];
  });
}

template <class T>
Var Tape<T>::sum(Var x) {
  T acc = 0;
  for (T v : value(x).data) acc += v;
  const std::size_t xi = x.id;
  return push("sum", Tensor<T>({1}, acc), {xi}, [this, xi](Node& self) {
    if (!wants(xi)) return;
    auto& g = input_grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

template <class T>
void Tape<T>::backward(Var loss, T seed) {
  Node& root = node(loss);
  if (root.value.size() != 1)
    throw Error(ErrorCode::Shape, "backward needs a scalar loss, got " + shape_string(root.value.shape));
  if (!root.requires_grad) throw Error(ErrorCode::NoGradient, "loss does not depend on any parameter");

  std::vector<std::uint8_t> reach(nodes_.size(), 0);
  reach[loss.id] = 1;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!reach[i]) continue;
    for (auto in : nodes_[i].inputs) reach[in] = 1;
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    if (reach[i] && n.requires_grad && n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
  }
  root.grad[0] += seed;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!reach[i] || !n.requires_grad || !n.backward) continue;
    if (!fault_op_.empty() && fault_op_ == n.op)
      for (auto& g : n.grad.data) g *= fault_factor_;
    n.backward(n);
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    const auto& n = nodes_[i];
    if (reach[i] && n.requires_grad && !n.grad.all_finite())
      throw Error(ErrorCode::NonFinite, std::string("gradient of ") + n.op + " is non-finite");
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace nocguard
