#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace ddbh {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
class Philox4x32 {
public:
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static constexpr ctr_type block(ctr_type c, key_type k) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += kW0;
                k[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        }
        return c;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// splitmix64 finalizer; used to derive independent per-cell seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

namespace detail {
// 53-bit uniform in (0, 1]; never returns 0 so log() below is safe.
constexpr double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}
} // namespace detail

/**
 * Pure function (seed, step, site, stream) -> two independent standard
 * normals. No state, so evaluation order and threading never change results.
 */
class CounterNormal {
public:
    explicit constexpr CounterNormal(std::uint64_t seed, std::uint32_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

    std::pair<double, double> operator()(std::uint64_t step, std::uint64_t site) const noexcept {
        const auto r = Philox4x32::block({static_cast<std::uint32_t>(site), stream_ ^ static_cast<std::uint32_t>(site >> 32),
                                          static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)},
                                         key_);
        const double u1 = detail::to_unit(r[0], r[1]);
        const double u2 = detail::to_unit(r[2], r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        return {rad * std::cos(ang), rad * std::sin(ang)};
    }

    std::uint64_t seed() const noexcept { return key_[0] | (static_cast<std::uint64_t>(key_[1]) << 32); }

private:
    Philox4x32::key_type key_;
    std::uint32_t stream_;
};

/// Sequential engine over the same block function, satisfying
/// UniformRandomBitGenerator for use with <random> distributions.
class PhiloxEngine {
public:
    using result_type = std::uint32_t;

    explicit PhiloxEngine(std::uint64_t seed = 0, std::uint32_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return 0xFFFFFFFFu; }

    result_type operator()() noexcept {
        if (pos_ == 4) {
            buf_ = Philox4x32::block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                      stream_, 0x5EED5EEDu},
                                     key_);
            ++counter_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    double uniform() noexcept {
        const std::uint32_t hi = (*this)();
        const std::uint32_t lo = (*this)();
        return detail::to_unit(hi, lo);
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double rad = std::sqrt(-2.0 * std::log(uniform()));
        const double ang = 2.0 * std::numbers::pi * uniform();
        spare_ = rad * std::sin(ang);
        has_spare_ = true;
        return rad * std::cos(ang);
    }

private:
    Philox4x32::key_type key_;
    std::uint32_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32::ctr_type buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ddbh
