#pragma once

#include <doctest.h>

#include <optional>
#include <string>

#include "otomech/error.hpp"

namespace otomech::testing {

// Runs fn and returns the code of the otomech::Error it threw, if any.
template <class Fn>
std::optional<ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

template <class Fn>
std::string error_message_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace otomech::testing
