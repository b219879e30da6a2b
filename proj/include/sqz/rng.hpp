#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sqz::rng {

// Philox4x32-10 counter-based generator. A sample is a pure function of
// (counter, key), so independent streams never share state and ensembles
// parallelize without changing results. Inline: this is the innermost loop
// of every simulation.
inline std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                               const std::array<std::uint32_t, 2>& key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    std::uint32_t x0 = counter[0], x1 = counter[1], x2 = counter[2], x3 = counter[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x2;
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        x0 = hi1 ^ x1 ^ k0;
        x1 = lo1;
        x2 = hi0 ^ x3 ^ k1;
        x3 = lo0;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return {x0, x1, x2, x3};
}

struct GaussianPair {
    double a;
    double b;
};

// Standard-normal pair addressed by (seed, stream, channel, index).
// stream = trajectory index, channel = noise port. Box-Muller on the
// four Philox words, so the map is deterministic and collision-free.
inline GaussianPair gaussian_pair(std::uint64_t seed, std::uint32_t stream, std::uint32_t channel,
                                  std::uint64_t index) {
    const auto w = philox4x32({static_cast<std::uint32_t>(index),
                               static_cast<std::uint32_t>(index >> 32), channel, stream},
                              {static_cast<std::uint32_t>(seed),
                               static_cast<std::uint32_t>(seed >> 32)});
    // (0,1) strictly, from 53 bits per uniform
    const std::uint64_t v1 = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t v2 = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    const double u1 = (static_cast<double>(v1 >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(v2 >> 11) + 0.5) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phase = 6.28318530717958647692 * u2;
    return {r * std::cos(phase), r * std::sin(phase)};
}

// Sequential view over one (seed, stream, channel) lane.
class GaussianChannel {
  public:
    GaussianChannel(std::uint64_t seed, std::uint32_t stream, std::uint32_t channel)
        : seed_(seed), stream_(stream), channel_(channel) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const GaussianPair g = gaussian_pair(seed_, stream_, channel_, index_++);
        spare_ = g.b;
        have_spare_ = true;
        return g.a;
    }

  private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint32_t channel_;
    std::uint64_t index_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sqz::rng
