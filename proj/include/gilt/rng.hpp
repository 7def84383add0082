#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gilt::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A draw is a pure function of (seed, stream, counter), so replicate r of
// experiment e is reproducible regardless of how work is scheduled.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
        : ctr_{static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
               static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
          key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          buf_pos_(4) {}

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    /// Uniform on the open interval (0,1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    /// Standard normal via Box-Muller; consumption per call is fixed.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform(), u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double next_exponential() { return -std::log(next_uniform()); }

    /// Gamma(1/2, 1) = N(0,1)^2 / 2; rejection-free.
    double next_gamma_half() {
        double z = next_normal();
        return 0.5 * z * z;
    }

private:
    void refill() {
        std::uint32_t c[4] = {ctr_[0], ctr_[1], ctr_[2], ctr_[3]};
        std::uint32_t k[2] = {key_[0], key_[1]};
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = 0xD2511F53ULL * c[0];
            std::uint64_t p1 = 0xCD9E8D57ULL * c[2];
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = hi1 ^ c[1] ^ k[0];
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c[3] ^ k[1];
            std::uint32_t n3 = lo0;
            c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        buf_[0] = c[0]; buf_[1] = c[1]; buf_[2] = c[2]; buf_[3] = c[3];
        buf_pos_ = 0;
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    std::uint32_t ctr_[4];
    std::uint32_t key_[2];
    std::uint32_t buf_[4];
    int buf_pos_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// splitmix64 mix, used to derive stream ids from (tag, index) pairs.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace gilt::rng
