#pragma once

#include <array>
#include <cstdint>

namespace gspin {

/// Philox4x32-10 counter-based block function (Salmon et al. 2011).
/// Stateless: the same (counter, key) always yields the same block.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Uniform double in (0, 1] built from 64 random bits (53-bit resolution).
double to_unit_open_closed(std::uint64_t bits) noexcept;

/// Standard normal for the noise key (seed, replica, site, step).
/// Every Wiener increment in the engine comes from here, so two runs that
/// share a key share the increment regardless of schedule or volume.
double keyed_normal(std::uint64_t seed, std::uint32_t replica, std::uint32_t site,
                    std::uint64_t step) noexcept;

/// Uniform in (0, 1] for the same key layout as keyed_normal.
double keyed_uniform(std::uint64_t seed, std::uint32_t replica, std::uint32_t site,
                     std::uint64_t step) noexcept;

/// Sequential stream over Philox blocks. Two streams with different
/// (seed, stream_id) never share blocks with each other or with keyed_normal.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;  // (0, 1]
    double normal() noexcept;
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    void refill() noexcept;

    Philox4x32::Key key_{};
    std::uint64_t stream_id_ = 0;
    std::uint64_t block_index_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace gspin
