#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace rmtd {

// SplitMix64 finalizer. Used to turn structured coordinates (seed, sweep
// index, trial index, component tag) into well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) noexcept { return mix64(seed); }

// derive_seed(seed, i, j, ...) chains the finalizer over a coordinate path.
// Identical paths give identical seeds; sibling paths give independent ones.
template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) noexcept {
    return derive_seed(mix64(seed ^ mix64(head)), rest...);
}

// Sub-stream tags for the components of one generated trial. The numbering is
// part of the reproducibility contract: changing it changes every output.
enum class StreamTag : std::uint64_t {
    Signal = 1,
    Channel = 2,
    Noise = 3,
    WishartZ = 4,
};

// Value-type random stream: an mt19937_64 engine plus the seed it was built
// from. Children are derived from the seed, not the engine state, so the
// stream tree is independent of how much any node has been consumed. The
// mt19937_64 sequence and the transforms below are pinned by the C++
// standard and IEEE arithmetic, which is what makes experiment outputs
// reproducible across runs and thread counts.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    template <typename... Ids>
    RngStream child(Ids... ids) const {
        return RngStream(derive_seed(seed_, static_cast<std::uint64_t>(ids)...));
    }

    RngStream child_tag(StreamTag tag) const { return child(static_cast<std::uint64_t>(tag)); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform01_open_low() { return 1.0 - uniform01(); }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform01_open_low()));
        const double t = 2.0 * std::numbers::pi * uniform01();
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // Circularly symmetric complex normal with E|z|^2 = variance.
    std::complex<double> complex_gaussian(double variance) {
        const double r = std::sqrt(-variance * std::log(uniform01_open_low()));
        const double t = 2.0 * std::numbers::pi * uniform01();
        return {r * std::cos(t), r * std::sin(t)};
    }

    // Fair +/-1.
    double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rmtd
