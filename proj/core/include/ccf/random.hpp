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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ccf {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed expansion: every random stream in the library is keyed by
// the root seed plus a fixed stream tag and a few counters (epoch, user, ...),
// so the streams never depend on the order in which they are consumed.
inline std::uint64_t DeriveSeed(std::uint64_t root,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = Mix64(root);
  for (std::uint64_t p : path) s = Mix64(s ^ Mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng MakeRng(std::uint64_t root,
                   std::initializer_list<std::uint64_t> path) {
  return Rng(DeriveSeed(root, path));
}

// Stream tags.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kEpochShuffle = 2;
inline constexpr std::uint64_t kTrainNegative = 3;
inline constexpr std::uint64_t kEvalNegative = 4;
inline constexpr std::uint64_t kSelectNegative = 5;
inline constexpr std::uint64_t kGenerate = 6;
inline constexpr std::uint64_t kContinuous = 7;
inline constexpr std::uint64_t kClone = 8;
inline constexpr std::uint64_t kSplit = 9;
inline constexpr std::uint64_t kWorld = 10;
inline constexpr std::uint64_t kObservational = 11;
inline constexpr std::uint64_t kRandomized = 12;
}  // namespace stream

}  // namespace ccf
