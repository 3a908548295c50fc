#pragma once

#include <doctest.h>

#include <optional>

#include "nocguard/error.hpp"

// Error code raised by f, or nullopt when f returns normally.
template <class F>
std::optional<nocguard::ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const nocguard::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

#define CHECK_ERROR(code, expr) CHECK(error_of([&] { (void)(expr); }) == std::optional(nocguard::ErrorCode::code))
