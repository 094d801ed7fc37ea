// Copyright 2026 The histocap Authors.
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

#include <stdexcept>
#include <string>

namespace histocap {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied value is outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or missing on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public DataError {
 public:
  using DataError::DataError;
};

// NaN or Inf produced by a forward pass, backward pass or optimizer step.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace histocap
