#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sgeig {

// Deterministic per-stream random source.  Streams are derived from a
// (seed, stream index) pair so sample-level parallelism is schedule
// independent.  Uniform and normal variates are generated from the raw
// mt19937_64 output (53-bit mantissa trick + Box-Muller) instead of the
// std distributions, whose output is implementation defined.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream & 0xffffffffu),
                          static_cast<std::uint32_t>(stream >> 32)};
        gen_.seed(seq);
    }

    // Uniform on [0, 1).
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (-1, 1); rejects the exact endpoint -1 (probability ~2^-53).
    double uniform_sym() {
        for (;;) {
            double u = 2.0 * uniform01() - 1.0;
            if (u > -1.0) return u;
        }
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace sgeig
