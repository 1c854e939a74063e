#include "cellcal/sobol.hpp"

#include <stdexcept>

namespace cellcal {

namespace {

constexpr int kBits = 32;

struct DirectionSpec {
    int s;                // polynomial degree
    std::uint32_t a;      // polynomial coefficients (without leading/trailing 1)
    std::uint32_t m[7];   // initial odd direction integers
};

// One spec per dimension beyond the first (which uses the van der Corput
// radix-2 sequence).
constexpr DirectionSpec kSpecs[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
};

std::vector<std::vector<std::uint32_t>> direction_numbers(int dim) {
    std::vector<std::vector<std::uint32_t>> v(static_cast<std::size_t>(dim),
                                              std::vector<std::uint32_t>(kBits));
    for (int i = 0; i < kBits; ++i) {
        v[0][static_cast<std::size_t>(i)] = 1u << (kBits - 1 - i);
    }
    for (int d = 1; d < dim; ++d) {
        const DirectionSpec& spec = kSpecs[d - 1];
        auto& vd = v[static_cast<std::size_t>(d)];
        const int s = spec.s;
        for (int i = 0; i < s && i < kBits; ++i) {
            vd[static_cast<std::size_t>(i)] = spec.m[i] << (kBits - 1 - i);
        }
        for (int i = s; i < kBits; ++i) {
            std::uint32_t value = vd[static_cast<std::size_t>(i - s)] ^
                                  (vd[static_cast<std::size_t>(i - s)] >> s);
            for (int k = 1; k < s; ++k) {
                if ((spec.a >> (s - 1 - k)) & 1u) {
                    value ^= vd[static_cast<std::size_t>(i - k)];
                }
            }
            vd[static_cast<std::size_t>(i)] = value;
        }
    }
    return v;
}

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDimension) {
        throw std::invalid_argument("sobol dimension must be in [1, 21]");
    }
    x_.assign(static_cast<std::size_t>(dim), 0u);
    v_ = direction_numbers(dim);
}

std::vector<double> SobolSequence::next() {
    // Gray-code update: flip the direction number of the lowest zero bit of
    // the running index.
    std::uint64_t c = 0;
    std::uint64_t value = index_;
    while (value & 1u) {
        value >>= 1;
        ++c;
    }
    ++index_;
    std::vector<double> out(static_cast<std::size_t>(dim_));
    for (int d = 0; d < dim_; ++d) {
        x_[static_cast<std::size_t>(d)] ^= v_[static_cast<std::size_t>(d)][c];
        out[static_cast<std::size_t>(d)] =
            static_cast<double>(x_[static_cast<std::size_t>(d)]) * 0x1.0p-32;
    }
    return out;
}

std::vector<double> SobolSequence::point(int dim, std::uint64_t n) {
    if (n < 1) throw std::invalid_argument("sobol position is 1-based");
    SobolSequence seq(dim);
    std::vector<double> p;
    for (std::uint64_t i = 0; i < n; ++i) p = seq.next();
    return p;
}

}  // namespace cellcal
