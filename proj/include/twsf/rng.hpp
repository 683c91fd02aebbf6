#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace twsf {

// Counter-based generator (splitmix64 finalizer over seed + counter).
// Every draw is a pure function of (seed, counter), so a run that replays
// the same call sequence reproduces the exact stream: dropout masks, weight
// init and epoch shuffles are all bit-identical across runs.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * ++counter_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

    double next_normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; draws two uniforms per call, no cached state.
        double u1 = next_uniform();
        double u2 = next_uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
};

// Independent substream for a given purpose tag.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    CounterRng r(base ^ (0xD1B54A32D192ED03ull * (stream + 1)));
    return r.next_u64();
}

// Fisher-Yates over indices 0..n-1.
inline std::vector<int64_t> shuffled_indices(int64_t n, CounterRng& rng) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i) {
        int64_t j = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(i + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

}  // namespace twsf
