#pragma once

#include <cstdint>

namespace cellcal {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so task enumeration order never affects the stream of any other task.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    static std::uint64_t hash(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1) + counter;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() { return hash(seed_, stream_, counter_++); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

}  // namespace cellcal
