// Copyright 2026 The ISM Authors
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

namespace ism {

// A precondition of an operation was violated by the caller.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An exhaustive routine was asked to enumerate beyond its configured cap.
class CapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A JSON document did not match the expected schema. `path` is a JSON
// pointer to the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Action generation produced no usable motion for a robot.
class DegenerateActions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ISM_REQUIRE(cond, msg)                       \
  do {                                               \
    if (!(cond)) throw ::ism::ContractViolation(msg); \
  } while (0)

}  // namespace ism
