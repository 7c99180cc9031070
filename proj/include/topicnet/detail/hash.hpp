// Copyright 2026 The topicnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Stable, platform-independent hashing and counter-based random numbers.
// std::hash and the <random> distributions are implementation-defined, so
// nothing that feeds a persisted artifact may use them.

#ifndef TOPICNET_DETAIL_HASH_HPP_
#define TOPICNET_DETAIL_HASH_HPP_

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace topicnet::detail {

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Keyed combination of several words; order matters.
constexpr std::uint64_t combine(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto w : words) h = mix64(h ^ mix64(w));
  return h;
}

// Maps a 64-bit word to a double in [0, 1) using the top 53 bits.
constexpr double unit_interval(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based stream: the i-th draw is a pure function of (key, i).
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t next() { return combine({key_, counter_++}); }
  constexpr double uniform() { return unit_interval(next()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace topicnet::detail

#endif  // TOPICNET_DETAIL_HASH_HPP_
