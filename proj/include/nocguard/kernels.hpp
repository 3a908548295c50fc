#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nocguard/topology.hpp"

// Raw numeric kernels behind the tape. Every kernel exists twice: `serial` is the
// plain reference used by tests, `parallel` is the OpenMP/SIMD version the model
// runs. Backward kernels accumulate (+=) into their outputs; null outputs are skipped.
namespace nocguard::kernels {

struct ConvShape {
  std::size_t batch = 1, in_ch = 1, out_ch = 1, length = 1, kernel = 1, stride = 1;
  std::size_t out_length() const noexcept { return (length - kernel) / stride + 1; }
};

struct PoolShape {
  std::size_t rows = 1, length = 1, kernel = 1, stride = 1;
  std::size_t out_length() const noexcept { return (length - kernel) / stride + 1; }
};

struct LinearShape {
  std::size_t rows = 1, in = 1, out = 1;
};

/// Neighbor lists of a symmetric adjacency (CSR).
struct Neighbors {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> index;

  std::size_t nodes() const noexcept { return offsets.size() - 1; }
  bool operator==(const Neighbors&) const = default;
};

/// Throws Adjacency unless `a` is square, 0/1 and symmetric.
Neighbors neighbors_from_adjacency(const BinaryMatrix& a);

enum class Backend { Serial, Parallel };
void set_backend(Backend b) noexcept;
Backend backend() noexcept;

#define NOCGUARD_KERNEL_DECLS                                                                                  \
  template <class T>                                                                                           \
  void conv1d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);                          \
  template <class T>                                                                                           \
  void conv1d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);         \
  template <class T>                                                                                           \
  void avg_pool_forward(const PoolShape& s, const T* x, T* y);                                                \
  template <class T>                                                                                           \
  void avg_pool_backward(const PoolShape& s, const T* dy, T* dx);                                             \
  template <class T>                                                                                           \
  void linear_forward(const LinearShape& s, const T* x, const T* w, const T* b, T* y);                        \
  template <class T>                                                                                           \
  void linear_backward(const LinearShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);       \
  /* y[i,:] = sum over neighbors j of x[j,:]; y is overwritten */                                            \
  template <class T>                                                                                           \
  void neighbor_sum(const Neighbors& nb, std::size_t features, const T* x, T* y);

namespace serial {
NOCGUARD_KERNEL_DECLS
}
namespace parallel {
NOCGUARD_KERNEL_DECLS
}

#undef NOCGUARD_KERNEL_DECLS

// Dispatch on the active backend.
template <class T>
void conv1d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
  backend() == Backend::Serial ? serial::conv1d_forward(s, x, w, b, y) : parallel::conv1d_forward(s, x, w, b, y);
}
template <class T>
void conv1d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  backend() == Backend::Serial ? serial::conv1d_backward(s, x, w, dy, dx, dw, db)
                               : parallel::conv1d_backward(s, x, w, dy, dx, dw, db);
}
template <class T>
void avg_pool_forward(const PoolShape& s, const T* x, T* y) {
  backend() == Backend::Serial ? serial::avg_pool_forward(s, x, y) : parallel::avg_pool_forward(s, x, y);
}
template <class T>
void avg_pool_backward(const PoolShape& s, const T* dy, T* dx) {
  backend() == Backend::Serial ? serial::avg_pool_backward(s, dy, dx) : parallel::avg_pool_backward(s, dy, dx);
}
template <class T>
void linear_forward(const LinearShape& s, const T* x, const T* w, const T* b, T* y) {
  backend() == Backend::Serial ? serial::linear_forward(s, x, w, b, y) : parallel::linear_forward(s, x, w, b, y);
}
template <class T>
void linear_backward(const LinearShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  backend() == Backend::Serial ? serial::linear_backward(s, x, w, dy, dx, dw, db)
                               : parallel::linear_backward(s, x, w, dy, dx, dw, db);
}
template <class T>
void neighbor_sum(const Neighbors& nb, std::size_t features, const T* x, T* y) {
  backend() == Backend::Serial ? serial::neighbor_sum(nb, features, x, y)
                               : parallel::neighbor_sum(nb, features, x, y);
}

}  // namespace nocguard::kernels
