// Copyright 2026 The qrc-rydberg Authors
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

#pragma once

#include <cstdint>
#include <limits>

namespace qrc {

/// SplitMix64 finalizer. Bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Counter-based random stream.
 *
 * A stream is a 64-bit key; the n-th draw is a pure function of (key, n).
 * Child streams are derived by mixing an index into the key, so the draws
 * for any (datapoint, probe, shot) triple can be reproduced without
 * replaying the draws that precede it.
 */
class CounterRng {
  public:
    constexpr explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }

    [[nodiscard]] constexpr CounterRng derive(std::uint64_t index) const noexcept {
        return CounterRng(splitmix64(key_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
    }

    [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return splitmix64(splitmix64(counter ^ key_) + key_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    [[nodiscard]] constexpr double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t key_;
};

/// Sequential adaptor satisfying UniformRandomBitGenerator (for std::shuffle).
class SequentialRng {
  public:
    using result_type = std::uint64_t;

    explicit SequentialRng(CounterRng stream, std::uint64_t start = 0) noexcept
        : stream_(stream), counter_(start) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return stream_.bits(counter_++); }
    double uniform() noexcept { return stream_.uniform(counter_++); }

    /// Uniform integer in [0, n) by rejection (unbiased).
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return r % n;
    }

  private:
    CounterRng stream_;
    std::uint64_t counter_;
};

}  // namespace qrc
