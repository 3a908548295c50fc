#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <vector>

#include "nocguard/kernels.hpp"
#include "nocguard/tensor.hpp"

// OpenMP over nodes, Eigen GEMM inside each node. Convolutions go through an
// im2col buffer so every stride reads contiguous memory. Weight gradients are
// reduced in fixed node chunks, which keeps results independent of the thread count.
namespace nocguard::kernels::parallel {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<MatR<T>>;
template <class T>
using CMap = Eigen::Map<const MatR<T>>;
template <class T>
using CVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <class T>
using Vec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

constexpr std::size_t kChunk = 8;

// cols[(ci*K + k), t] = x[ci, t*stride + k]
template <class T>
void im2col(const ConvShape& s, const T* x, T* cols) {
  const std::size_t lo = s.out_length();
  for (std::size_t ci = 0; ci < s.in_ch; ++ci)
    for (std::size_t k = 0; k < s.kernel; ++k) {
      T* dst = cols + (ci * s.kernel + k) * lo;
      const T* src = x + ci * s.length + k;
      if (s.stride == 1)
        std::copy(src, src + lo, dst);
      else
        for (std::size_t t = 0; t < lo; ++t) dst[t] = src[t * s.stride];
    }
}

template <class T>
void col2im_add(const ConvShape& s, const T* cols, T* dx) {
  const std::size_t lo = s.out_length();
  for (std::size_t ci = 0; ci < s.in_ch; ++ci)
    for (std::size_t k = 0; k < s.kernel; ++k) {
      const T* src = cols + (ci * s.kernel + k) * lo;
      T* dst = dx + ci * s.length + k;
      if (s.stride == 1) {
#pragma omp simd
        for (std::size_t t = 0; t < lo; ++t) dst[t] += src[t];
      } else {
        for (std::size_t t = 0; t < lo; ++t) dst[t * s.stride] += src[t];
      }
    }
}

}  // namespace

template <class T>
void conv1d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y) {
  const std::size_t lo = s.out_length();
  const std::size_t depth = s.in_ch * s.kernel;
  const CMap<T> W(w, s.out_ch, depth);
  const CVec<T> B(b, s.out_ch);
#pragma omp parallel
  {
    Buffer<T> cols(depth * lo);
#pragma omp for schedule(static)
    for (std::size_t n = 0; n < s.batch; ++n) {
      im2col(s, x + n * s.in_ch * s.length, cols.data());
      Map<T> Y(y + n * s.out_ch * lo, s.out_ch, lo);
      Y.noalias() = W * CMap<T>(cols.data(), depth, lo);
      Y.colwise() += B;
    }
  }
}

template <class T>
void conv1d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const std::size_t lo = s.out_length();
  const std::size_t depth = s.in_ch * s.kernel;
  const CMap<T> W(w, s.out_ch, depth);
  if (dx) {
#pragma omp parallel
    {
      MatR<T> dcols(depth, lo);
#pragma omp for schedule(static)
      for (std::size_t n = 0; n < s.batch; ++n) {
        dcols.noalias() = W.transpose() * CMap<T>(dy + n * s.out_ch * lo, s.out_ch, lo);
        col2im_add(s, dcols.data(), dx + n * s.in_ch * s.length);
      }
    }
  }
  if (dw || db) {
    const std::size_t chunks = (s.batch + kChunk - 1) / kChunk;
    std::vector<MatR<T>> partial_w(dw ? chunks : 0);
    std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> partial_b(db ? chunks : 0);
#pragma omp parallel
    {
      Buffer<T> cols(depth * lo);
#pragma omp for schedule(static)
      for (std::size_t c = 0; c < chunks; ++c) {
        if (dw) partial_w[c] = MatR<T>::Zero(s.out_ch, depth);
        if (db) partial_b[c] = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(s.out_ch);
        for (std::size_t n = c * kChunk; n < std::min(s.batch, (c + 1) * kChunk); ++n) {
          const CMap<T> G(dy + n * s.out_ch * lo, s.out_ch, lo);
          if (dw) {
            im2col(s, x + n * s.in_ch * s.length, cols.data());
            partial_w[c].noalias() += G * CMap<T>(cols.data(), depth, lo).transpose();
          }
          if (db) partial_b[c] += G.rowwise().sum();
        }
      }
    }
    for (std::size_t c = 0; c < chunks; ++c) {
      if (dw) Map<T>(dw, s.out_ch, depth) += partial_w[c];
      if (db) Vec<T>(db, s.out_ch) += partial_b[c];
    }
  }
}

// Window offset outermost so the inner loop streams over output positions.
template <class T>
void avg_pool_forward(const PoolShape& s, const T* x, T* y) {
  const std::size_t lo = s.out_length();
  const T inv = T(1) / static_cast<T>(s.kernel);
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < s.rows; ++r) {
    T* __restrict yr = y + r * lo;
    const T* __restrict xr = x + r * s.length;
    std::fill(yr, yr + lo, T(0));
    for (std::size_t j = 0; j < s.kernel; ++j)
      for (std::size_t t = 0; t < lo; ++t) yr[t] += xr[t * s.stride + j];
    for (std::size_t t = 0; t < lo; ++t) yr[t] *= inv;
  }
}

template <class T>
void avg_pool_backward(const PoolShape& s, const T* dy, T* dx) {
  const std::size_t lo = s.out_length();
  const T inv = T(1) / static_cast<T>(s.kernel);
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < s.rows; ++r) {
    const T* __restrict gr = dy + r * lo;
    T* __restrict dr = dx + r * s.length;
    for (std::size_t j = 0; j < s.kernel; ++j)
      for (std::size_t t = 0; t < lo; ++t) dr[t * s.stride + j] += gr[t] * inv;
  }
}

template <class T>
void linear_forward(const LinearShape& s, const T* x, const T* w, const T* b, T* y) {
  Map<T> Y(y, s.rows, s.out);
  const CMap<T> X(x, s.rows, s.in);
  const CMap<T> W(w, s.in, s.out);
  // Row blocks are independent GEMMs.
  const std::size_t chunks = (s.rows + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t r0 = c * kChunk, rows = std::min(s.rows, r0 + kChunk) - r0;
    auto block = Y.middleRows(r0, rows);
    block.noalias() = X.middleRows(r0, rows) * W;
    if (b) block.rowwise() += CVec<T>(b, s.out).transpose();
  }
}

template <class T>
void linear_backward(const LinearShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const CMap<T> X(x, s.rows, s.in);
  const CMap<T> W(w, s.in, s.out);
  const CMap<T> G(dy, s.rows, s.out);
  if (dx) {
    Map<T> DX(dx, s.rows, s.in);
    const std::size_t chunks = (s.rows + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t r0 = c * kChunk, rows = std::min(s.rows, r0 + kChunk) - r0;
      DX.middleRows(r0, rows).noalias() += G.middleRows(r0, rows) * W.transpose();
    }
  }
  if (dw) {
    Map<T> DW(dw, s.in, s.out);
    const std::size_t chunks = (s.in + kChunk * 8 - 1) / (kChunk * 8);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t i0 = c * kChunk * 8, cols = std::min(s.in, i0 + kChunk * 8) - i0;
      DW.middleRows(i0, cols).noalias() += X.middleCols(i0, cols).transpose() * G;
    }
  }
  if (db) Vec<T>(db, s.out) += G.colwise().sum().transpose();
}

template <class T>
void neighbor_sum(const Neighbors& nb, std::size_t features, const T* x, T* y) {
  const std::size_t n = nb.nodes();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    T* __restrict yr = y + i * features;
    std::fill(yr, yr + features, T(0));
    for (std::uint32_t e = nb.offsets[i]; e < nb.offsets[i + 1]; ++e) {
      const T* __restrict xr = x + std::size_t{nb.index[e]} * features;
#pragma omp simd
      for (std::size_t f = 0; f < features; ++f) yr[f] += xr[f];
    }
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

}  // namespace nocguard::kernels::parallel
