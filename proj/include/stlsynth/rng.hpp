#pragma once

#include <cstdint>
#include <random>

namespace stlsynth {

// mt19937_64 with hand-rolled draw functions so that streams are identical
// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        std::uint64_t n = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next() % n);
    }

    bool coin() { return (next() & 1) != 0; }

    // Independent child stream; distinct `stream` values give distinct seeds.
    Rng fork(std::uint64_t stream) {
        std::uint64_t z = seed_mix_ ^ (stream + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31) ^ next());
    }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_mix_ = 0x243f6a8885a308d3ULL;
};

}  // namespace stlsynth
