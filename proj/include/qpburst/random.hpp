#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qpburst {

// Counter-based Philox4x32-10 generator (Salmon et al. round constants).
// Each (seed, stream) pair is an independent substream: the 64-bit seed forms
// the key and the 64-bit stream id occupies the high counter words, so
// substreams never overlap and any trace can be generated out of order.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    // One keyed block: pure function of (counter, key), exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

    std::uint32_t next_u32() noexcept {
        if (have_ == 0) refill();
        return buf_[--have_];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second deviate is cached.
    double next_gauss() noexcept {
        if (has_gauss_) {
            has_gauss_ = false;
            return gauss_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        gauss_ = r * std::sin(a);
        has_gauss_ = true;
        return r * std::cos(a);
    }

    // Exponential deviate with unit mean.
    double next_exp() noexcept {
        double u = next_double();
        while (u <= 0.0) u = next_double();
        return -std::log(u);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    void refill() noexcept {
        const auto out = block(ctr_, key_);
        // buf_ is consumed from the top so out[0] is produced first
        buf_ = {out[3], out[2], out[1], out[0]};
        have_ = 4;
        if (++ctr_[0] == 0) ++ctr_[1];  // 64-bit position counter
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> buf_{};
    int have_ = 0;
    double gauss_ = 0.0;
    bool has_gauss_ = false;
};

}  // namespace qpburst
