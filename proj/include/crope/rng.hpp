#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace crope {

// Counter-based generator: every value is a pure function of
// (seed, stream, counter), so independent streams can be split off by name
// without sharing state, and any draw can be replayed from its coordinates.
class Rng {
  public:
    Rng() = default;
    Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    // FNV-1a, used to derive a stream id from a parameter path.
    static uint64_t stream_of(std::string_view name) {
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : name) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    Rng split(std::string_view name) const { return Rng(seed_, mix(stream_, stream_of(name), 0x9e3779b97f4a7c15ull)); }
    Rng split(uint64_t sub) const { return Rng(seed_, mix(stream_, sub, 0x9e3779b97f4a7c15ull)); }

    uint64_t next_u64() { return mix(seed_, stream_, counter_++); }

    // Uniform in [0, 1): top 53 bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; hand-rolled so draws are identical across standard libraries.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

  private:
    static uint64_t mix(uint64_t a, uint64_t b, uint64_t c) {
        uint64_t z = a;
        z ^= rot(b, 25) + 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z ^= rot(c, 47) + 0x94d049bb133111ebull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = (z ^ (z >> 31));
        z += b * 0x2545f4914f6cdd1dull + c;
        z = (z ^ (z >> 29)) * 0xbf58476d1ce4e5b9ull;
        return z ^ (z >> 32);
    }
    static uint64_t rot(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_ = 0;
    uint64_t stream_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace crope
