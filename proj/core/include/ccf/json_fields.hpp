// Copyright 2026 The CCF Authors.
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

// Strict JSON object reading for configs: typed fields, unknown keys rejected.

#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ccf/error.hpp"

namespace ccf {

template <typename Json>
class BasicJsonFields {
 public:
  BasicJsonFields(const Json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) throw InvalidInput(context_ + ": expected a JSON object");
  }

  template <typename T>
  bool Optional(const char* key, T& value) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return false;
    try {
      value = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidInput(context_ + ": key '" + key + "' has the wrong type (" +
                         it->type_name() + ")");
    }
    return true;
  }

  template <typename T>
  void Required(const char* key, T& value) {
    if (!Optional(key, value)) {
      throw InvalidInput(context_ + ": missing required key '" + key + "'");
    }
  }

  void RejectUnknown() const {
    for (const auto& [key, unused] : object_.items()) {
      if (!seen_.count(key)) {
        throw InvalidInput(context_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  const Json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

using JsonFields = BasicJsonFields<nlohmann::json>;
using OrderedJsonFields = BasicJsonFields<nlohmann::ordered_json>;

}  // namespace ccf
