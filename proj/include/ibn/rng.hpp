/*
 * Copyright 2026 The ibn-forecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IBN_RNG_HPP_
#define IBN_RNG_HPP_

#include <cstdint>

namespace ibn {

// Counter-based random stream. A stream is a 64-bit key; child(i) derives an
// independent substream, and uniform(c) is a pure function of (key, c), so
// draws do not depend on evaluation order.
class Stream
{
public:
  explicit constexpr Stream(std::uint64_t seed = 0) : _key(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  constexpr Stream child(std::uint64_t index) const
  {
    Stream s;
    s._key = mix(_key ^ mix(index + 0x9e3779b97f4a7c15ULL));
    return s;
  }

  constexpr std::uint64_t bits(std::uint64_t counter) const
  {
    return mix(_key + counter * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const
  {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const { return _key; }

private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t _key = 0;
};

} // namespace ibn

#endif
