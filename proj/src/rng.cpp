#include "gspin/rng.hpp"

#include <cmath>
#include <numbers>

namespace gspin {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Domain tag folded into the key of sequential streams so they never
// collide with the keyed noise blocks.
constexpr std::uint64_t kStreamDomain = 0x5f3759df2b7e1516ull;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

Philox4x32::Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

std::uint64_t join(std::uint32_t hi, std::uint32_t lo) {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

Philox4x32::Counter noise_block(std::uint64_t seed, std::uint32_t replica, std::uint32_t site,
                                std::uint64_t step) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(step >> 32), site, replica};
    return Philox4x32::block(ctr, key_from_seed(seed));
}

double box_muller(std::uint64_t a, std::uint64_t b, double* spare) {
    const double u1 = to_unit_open_closed(a);
    const double u2 = to_unit_open_closed(b);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    if (spare != nullptr) *spare = radius * std::sin(angle);
    return radius * std::cos(angle);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double to_unit_open_closed(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double keyed_normal(std::uint64_t seed, std::uint32_t replica, std::uint32_t site,
                    std::uint64_t step) noexcept {
    const auto block = noise_block(seed, replica, site, step);
    return box_muller(join(block[0], block[1]), join(block[2], block[3]), nullptr);
}

double keyed_uniform(std::uint64_t seed, std::uint32_t replica, std::uint32_t site,
                     std::uint64_t step) noexcept {
    const auto block = noise_block(seed, replica, site, step);
    return to_unit_open_closed(join(block[0], block[1]));
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : key_(key_from_seed(splitmix64(seed ^ kStreamDomain))), stream_id_(stream_id) {}

void CounterStream::refill() noexcept {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(block_index_), static_cast<std::uint32_t>(block_index_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    buffer_ = Philox4x32::block(ctr, key_);
    ++block_index_;
    used_ = 0;
}

std::uint64_t CounterStream::next_u64() noexcept {
    if (used_ > 2) refill();
    const std::uint64_t value = join(buffer_[used_], buffer_[used_ + 1]);
    used_ += 2;
    return value;
}

double CounterStream::uniform() noexcept { return to_unit_open_closed(next_u64()); }

double CounterStream::normal() noexcept {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    const std::uint64_t a = next_u64();
    const std::uint64_t b = next_u64();
    has_spare_normal_ = true;
    return box_muller(a, b, &spare_normal_);
}

std::uint64_t CounterStream::below(std::uint64_t n) noexcept {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

}  // namespace gspin
