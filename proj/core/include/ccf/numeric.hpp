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

#pragma once

#include <algorithm>
#include <cmath>

namespace ccf {

// Logistic arguments are clamped to this range before exponentiation.
inline constexpr double kLogitClamp = 30.0;

inline double ClampLogit(double x) {
  return std::clamp(x, -kLogitClamp, kLogitClamp);
}

inline double Logistic(double x) { return 1.0 / (1.0 + std::exp(-ClampLogit(x))); }

// d/dx Logistic(x); zero outside the clamp window, matching the clamped forward.
inline double LogisticGrad(double x) {
  if (x < -kLogitClamp || x > kLogitClamp) return 0.0;
  const double p = Logistic(x);
  return p * (1.0 - p);
}

}  // namespace ccf
