// Copyright (c) 2026 The sis Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sis {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes: bad magic, truncated payload, unparsable header.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed container using a variant this library does not read
/// (ASCII PNM, Fortran-order NPY, non-float dtypes, ...).
class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// A precondition on shapes or parameter values was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Requested more instances than there are salient superpixels.
class InstanceCountError : public Error {
 public:
  InstanceCountError(std::size_t requested, std::size_t feasible_max)
      : Error("requested " + std::to_string(requested) + " instances but only " +
              std::to_string(feasible_max) + " salient superpixels exist"),
        requested_(requested),
        feasible_max_(feasible_max) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t feasible_max() const noexcept { return feasible_max_; }

 private:
  std::size_t requested_;
  std::size_t feasible_max_;
};

/// Synthetic fixture shapes could not be placed without overlap.
class PlacementError : public Error {
 public:
  using Error::Error;
};

}  // namespace sis
