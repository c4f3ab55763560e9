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

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

#include "ism/error.hpp"

namespace ism {

using json = nlohmann::json;

// Typed accessors that report failures as SchemaError with a JSON pointer.
namespace js {

inline std::string child(const std::string& path, const std::string& key) {
  return path + "/" + key;
}

inline std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

inline const json& at(const json& j, const std::string& path,
                      const std::string& key) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(child(path, key), "required field is missing");
  return *it;
}

inline bool has(const json& j, const std::string& key) {
  return j.is_object() && j.contains(key) && !j.at(key).is_null();
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<long long>();
}

inline bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
  return j.get<bool>();
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

inline double number_or(const json& j, const std::string& path,
                        const std::string& key, double fallback) {
  return has(j, key) ? number(j.at(key), child(path, key)) : fallback;
}

inline long long integer_or(const json& j, const std::string& path,
                            const std::string& key, long long fallback) {
  return has(j, key) ? integer(j.at(key), child(path, key)) : fallback;
}

inline bool boolean_or(const json& j, const std::string& path,
                       const std::string& key, bool fallback) {
  return has(j, key) ? boolean(j.at(key), child(path, key)) : fallback;
}

inline Eigen::VectorXd vector(const json& j, const std::string& path) {
  array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], child(path, i));
  }
  return v;
}

inline std::vector<int> int_list(const json& j, const std::string& path) {
  array(j, path);
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(static_cast<int>(integer(j[i], child(path, i))));
  }
  return out;
}

inline json from_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace js
}  // namespace ism
