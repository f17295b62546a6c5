// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pfgan {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG with an explicitly serializable state. normal() always
// consumes exactly two uniform draws (no cached spare), so the stream
// position is a pure function of the call history and survives checkpoints.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t u64() { return eng_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Rejection-sampled truncated normal; bounds are absolute.
    double truncated_normal(double mean, double stddev, double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("pfgan: rng: bad truncation bounds");
        for (int i = 0; i < 10000; ++i) {
            double v = normal(mean, stddev);
            if (v >= lo && v <= hi) return v;
        }
        throw std::runtime_error("pfgan: rng: truncated normal rejection failed");
    }

    int64_t index(int64_t n) { return static_cast<int64_t>(u64() % static_cast<uint64_t>(n)); }

    // Independent child stream; stable under reordering of fork calls.
    Rng fork(uint64_t stream_id) const {
        std::ostringstream os;
        os << eng_;
        std::istringstream is(os.str());
        uint64_t first = 0;
        is >> first;
        return Rng(splitmix64(first ^ splitmix64(stream_id)));
    }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw std::runtime_error("pfgan: rng: bad serialized state");
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace pfgan
