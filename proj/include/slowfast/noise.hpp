#pragma once

#include <cmath>
#include <cstdint>
#include <array>

namespace slowfast {

// Philox-4x32-10 counter-based generator (Salmon et al. 2011). A draw is a
// pure function of (key, counter), so Gaussian increments can be indexed by
// (seed, stream, step, mode) and are identical regardless of thread
// scheduling or evaluation order.
namespace philox {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, ctr[0], hi0, lo0);
        mulhilo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

}  // namespace philox

enum class EquationTag : std::uint32_t { W1 = 1, W2 = 2 };

/// Reproducible Gaussian stream. Identical (master_seed, sample, tag,
/// replica, step, mode) always yields the identical N(0,1) draw; draws at
/// distinct indices are independent.
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t sample_index,
                EquationTag tag, std::uint32_t replica_tag = 0)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          hi_word_((static_cast<std::uint32_t>(tag) << 28) ^ (replica_tag << 20)
                   ^ static_cast<std::uint32_t>(sample_index >> 32)),
          sample_lo_(static_cast<std::uint32_t>(sample_index)) {}

    /// Standard normal draw indexed by (step, mode).
    double normal(std::uint64_t step, std::uint32_t mode) const {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(step),
            static_cast<std::uint32_t>(step >> 32) ^ hi_word_,
            mode ^ sample_lo_,
            sample_lo_};
        const auto r = philox::block(ctr, key_);
        // 53-bit uniform in (0,1] from two words, second pair gives the angle.
        const std::uint64_t u64 =
            (static_cast<std::uint64_t>(r[0]) << 21) ^ (static_cast<std::uint64_t>(r[1]) >> 11);
        const double u1 = (static_cast<double>(u64 & ((1ull << 53) - 1)) + 1.0) * 0x1p-53;
        const double u2 = static_cast<double>(r[2]) * 0x1p-32
                        + static_cast<double>(r[3]) * 0x1p-64;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t hi_word_;
    std::uint32_t sample_lo_;
};

}  // namespace slowfast
