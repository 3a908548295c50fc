#include <atomic>

#include "nocguard/error.hpp"
#include "nocguard/kernels.hpp"

namespace nocguard::kernels {

namespace {
std::atomic<Backend> active{Backend::Parallel};
}

void set_backend(Backend b) noexcept { active.store(b, std::memory_order_relaxed); }
Backend backend() noexcept { return active.load(std::memory_order_relaxed); }

Neighbors neighbors_from_adjacency(const BinaryMatrix& a) {
  if (a.data.size() != a.n * a.n) throw Error(ErrorCode::Adjacency, "adjacency is not square");
  Neighbors nb;
  nb.offsets.reserve(a.n + 1);
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t j = 0; j < a.n; ++j) {
      const auto v = a(i, j);
      if (v > 1) throw Error(ErrorCode::Adjacency, "adjacency entries must be 0 or 1");
      if (v != a(j, i))
        throw Error(ErrorCode::Adjacency,
                    "adjacency is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (v) nb.index.push_back(static_cast<std::uint32_t>(j));
    }
    nb.offsets.push_back(static_cast<std::uint32_t>(nb.index.size()));
  }
  return nb;
}

// Reference kernels: direct transcriptions of the defining sums.
namespace serial {

template <class T>
void conv1d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
  const std::size_t lo = s.out_length();
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t co = 0; co < s.out_ch; ++co)
      for (std::size_t t = 0; t < lo; ++t) {
        T acc = b[co];
        for (std::size_t ci = 0; ci < s.in_ch; ++ci)
          for (std::size_t k = 0; k < s.kernel; ++k)
            acc += w[(co * s.in_ch + ci) * s.kernel + k] * x[(n * s.in_ch + ci) * s.length + t * s.stride + k];
        y[(n * s.out_ch + co) * lo + t] = acc;
      }
}

template <class T>
void conv1d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const std::size_t lo = s.out_length();
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t co = 0; co < s.out_ch; ++co)
      for (std::size_t t = 0; t < lo; ++t) {
        const T g = dy[(n * s.out_ch + co) * lo + t];
        if (db) db[co] += g;
        for (std::size_t ci = 0; ci < s.in_ch; ++ci)
          for (std::size_t k = 0; k < s.kernel; ++k) {
            const std::size_t xi = (n * s.in_ch + ci) * s.length + t * s.stride + k;
            const std::size_t wi = (co * s.in_ch + ci) * s.kernel + k;
            if (dx) dx[xi] += w[wi] * g;
            if (dw) dw[wi] += x[xi] * g;
          }
      }
}

template <class T>
void avg_pool_forward(const PoolShape& s, const T* x, T* y) {
  const std::size_t lo = s.out_length();
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t t = 0; t < lo; ++t) {
      T acc = 0;
      for (std::size_t j = 0; j < s.kernel; ++j) acc += x[r * s.length + t * s.stride + j];
      y[r * lo + t] = acc / static_cast<T>(s.kernel);
    }
}

template <class T>
void avg_pool_backward(const PoolShape& s, const T* dy, T* dx) {
  const std::size_t lo = s.out_length();
  const T inv = T(1) / static_cast<T>(s.kernel);
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t t = 0; t < lo; ++t)
      for (std::size_t j = 0; j < s.kernel; ++j) dx[r * s.length + t * s.stride + j] += dy[r * lo + t] * inv;
}

template <class T>
void linear_forward(const LinearShape& s, const T* x, const T* w, const T* b, T* y) {
  for (std::size_t m = 0; m < s.rows; ++m)
    for (std::size_t o = 0; o < s.out; ++o) {
      T acc = b ? b[o] : T(0);
      for (std::size_t i = 0; i < s.in; ++i) acc += x[m * s.in + i] * w[i * s.out + o];
      y[m * s.out + o] = acc;
    }
}

template <class T>
void linear_backward(const LinearShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  for (std::size_t m = 0; m < s.rows; ++m)
    for (std::size_t o = 0; o < s.out; ++o) {
      const T g = dy[m * s.out + o];
      if (db) db[o] += g;
      for (std::size_t i = 0; i < s.in; ++i) {
        if (dx) dx[m * s.in + i] += w[i * s.out + o] * g;
        if (dw) dw[i * s.out + o] += x[m * s.in + i] * g;
      }
    }
}

template <class T>
void neighbor_sum(const Neighbors& nb, std::size_t features, const T* x, T* y) {
  for (std::size_t i = 0; i < nb.nodes(); ++i)
    for (std::size_t f = 0; f < features; ++f) {
      T acc = 0;
      for (std::uint32_t e = nb.offsets[i]; e < nb.offsets[i + 1]; ++e) acc += x[nb.index[e] * features + f];
      y[i * features + f] = acc;
    }
}

#define NOCGUARD_INSTANTIATE(T)                                                                      \
  template void conv1d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);               \
  template void conv1d_backward<T>(const ConvShape&, const T*, const T*, const T*, T*, T*, T*);      \
  template void avg_pool_forward<T>(const PoolShape&, const T*, T*);                                 \
  template void avg_pool_backward<T>(const PoolShape&, const T*, T*);                                \
  template void linear_forward<T>(const LinearShape&, const T*, const T*, const T*, T*);             \
  template void linear_backward<T>(const LinearShape&, const T*, const T*, const T*, T*, T*, T*);    \
  template void neighbor_sum<T>(const Neighbors&, std::size_t, const T*, T*);

NOCGUARD_INSTANTIATE(float)
NOCGUARD_INSTANTIATE(double)

}  // namespace serial
}  // namespace nocguard::kernels
