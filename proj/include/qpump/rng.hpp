#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qpump {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
//
// Each (seed, stream, fork) triple addresses an independent random stream;
// simulation trials map the trial index to `stream` and per-readout
// continuations to `fork`, so results are reproducible regardless of how
// trials are scheduled across threads.
class Philox4x32 {
public:
    Philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint32_t fork) {
        key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        counter_ = {0, fork, static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
    }

    std::uint64_t next_u64() {
        if (pos_ >= 4) refill();
        const std::uint64_t lo = block_[pos_];
        const std::uint64_t hi = block_[pos_ + 1];
        pos_ += 2;
        return lo | (hi << 32);
    }

    // Uniform in the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) {
        return -std::log(uniform()) / rate;
    }

    // One keyed block; exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key);

private:
    void refill() {
        block_ = block(counter_, key_);
        ++counter_[0];  // 2^32 blocks per (seed, stream, fork)
        pos_ = 0;
    }

    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
};

}  // namespace qpump
