#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include "nocguard/error.hpp"

namespace nocguard {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

// Eigen's vectorized reductions peel unaligned heads, so their summation order
// follows the buffer address. A fixed alignment makes results depend on shapes only.
inline constexpr std::size_t kBufferAlignment = 64;

template <class T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kBufferAlignment}); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor.
template <class T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, Buffer<T> values) : shape(std::move(s)), data(std::move(values)) { check_length(); }
  Tensor(Shape s, const std::vector<T>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
    check_length();
  }
  Tensor(Shape s, std::initializer_list<T> values) : shape(std::move(s)), data(values) { check_length(); }

  void check_length() const {
    if (data.size() != shape_size(shape))
      throw Error(ErrorCode::Shape, "tensor data length " + std::to_string(data.size()) + " does not match shape " +
                                        shape_string(shape));
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }
  T& operator[](std::size_t i) noexcept { return data[i]; }
  const T& operator[](std::size_t i) const noexcept { return data[i]; }

  std::vector<T> values() const { return {data.begin(), data.end()}; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  Tensor reshaped(Shape s) const {
    if (shape_size(s) != size())
      throw Error(ErrorCode::Shape, "cannot reshape " + shape_string(shape) + " to " + shape_string(s));
    return Tensor(std::move(s), data);
  }

  bool all_finite() const noexcept {
    // Exponent-all-ones test on the raw bits; the integer reduction vectorizes.
    using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    constexpr Bits exp_mask = sizeof(T) == 8 ? Bits(0x7FF0000000000000ull) : Bits(0x7F800000u);
    Bits bad = 0;
    for (T v : data) {
      const Bits b = std::bit_cast<Bits>(v);
      bad |= static_cast<Bits>((b & exp_mask) == exp_mask);
    }
    return bad == 0;
  }

  bool operator==(const Tensor&) const = default;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

}  // namespace nocguard
