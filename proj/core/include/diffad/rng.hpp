#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "diffad/common.hpp"

namespace diffad {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derives a child seed from a base seed plus a textual tag and up to three
// integer coordinates (slide row/col/repeat). Stable across platforms, so
// per-patch streams are reproducible for any thread count.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a = 0,
                            uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = base ^ 0x51'7c'c1'b7'27'22'0a'95ull;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        splitmix64(h);
    }
    h ^= a;
    splitmix64(h);
    h ^= b;
    splitmix64(h);
    h ^= c;
    splitmix64(h);
    return splitmix64(h);
}

// mt19937_64 engine with hand-rolled uniform/normal transforms. The standard
// pins the engine's output exactly; doing the transforms ourselves keeps the
// streams (and therefore every generated artifact) independent of library
// internals. normal() is Box-Muller without the cached second value, so the
// engine state is the whole RNG state.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // [0, bound)
    uint64_t uniform_u64(uint64_t bound) {
        if (bound == 0) throw InvariantError("uniform_u64: bound must be positive");
        const uint64_t limit = UINT64_MAX / bound * bound;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    // [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw InvariantError("uniform_int: empty range");
        return lo + static_cast<int>(uniform_u64(static_cast<uint64_t>(hi - lo) + 1));
    }

    Latent normal_vec(size_t dim) {
        Latent v(dim);
        for (auto& x : v) x = normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }
    const std::mt19937_64& engine() const { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace diffad
