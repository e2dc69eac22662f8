#pragma once

#include <bit>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace sa_steady {

/// SplitMix64 finalizer, used to decorrelate stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Key of an independent stream addressed by (seed, stream, index).
///
/// Every replica of every plan draws from its own generator seeded with this
/// key, so results do not depend on thread count or execution order.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    return mix64(mix64(mix64(seed) ^ stream) ^ mix64(index ^ 0x5851f42d4c957f2dULL));
}

/// Stream id derived from the bit pattern of a real parameter (e.g. a stepsize).
inline std::uint64_t real_stream(double x) noexcept {
    return mix64(std::bit_cast<std::uint64_t>(x));
}

/// xoshiro256++ by Blackman and Vigna; satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t z = seed;
        for (auto& w : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            w = x ^ (x >> 31);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t s_[4]{};
};

using Rng = Xoshiro256pp;

/// Ziggurat standard normal sampler.
using NormalDist = boost::random::normal_distribution<double>;

}  // namespace sa_steady
