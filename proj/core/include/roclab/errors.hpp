// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace roclab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimMismatch : Error {
  using Error::Error;
};
struct ZeroVector : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct BadConfig : Error {
  using Error::Error;
};
struct TokenOutOfRange : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptChecksum : Error {
  using Error::Error;
};
struct SeparationFailure : Error {
  using Error::Error;
};
struct ExhaustedVariants : Error {
  using Error::Error;
};
struct RateCeilingExceeded : Error {
  using Error::Error;
};
struct BadTrigger : Error {
  using Error::Error;
};
struct NotSimilarEnough : Error {
  using Error::Error;
};
struct BatchLargerThanPool : Error {
  using Error::Error;
};
struct DegenerateSplit : Error {
  using Error::Error;
};
struct DigestMismatch : Error {
  using Error::Error;
};

}  // namespace roclab
