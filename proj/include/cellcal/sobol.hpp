#pragma once

#include <cstdint>
#include <vector>

namespace cellcal {

// Low-discrepancy sequence in [0, 1)^dim, up to 21 dimensions. Gray-code
// construction; the all-zero first point is skipped.
class SobolSequence {
public:
    static constexpr int kMaxDimension = 21;

    explicit SobolSequence(int dim);

    std::vector<double> next();

    // The point at 1-based position n, independent of generator state.
    static std::vector<double> point(int dim, std::uint64_t n);

private:
    int dim_;
    std::uint64_t index_ = 0;
    std::vector<std::uint32_t> x_;
    std::vector<std::vector<std::uint32_t>> v_;  // [dim][32] direction numbers
};

}  // namespace cellcal
