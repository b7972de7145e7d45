#pragma once

#include <cstdint>
#include <vector>

namespace mvq {

// Deterministic generator with a fixed, self-contained algorithm
// (xoshiro256** seeded via splitmix64). Identical seeds produce identical
// draw sequences on every platform; no libc or libstdc++ distribution
// machinery is involved.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Marsaglia polar method (one value cached).
    double normal();

    std::vector<double> gaussian_vector(size_t dim, double sigma = 1.0);
    std::vector<double> unit_vector(size_t dim);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Independent child generator; `stream` distinguishes siblings.
    SeededRng fork(uint64_t stream);

private:
    uint64_t state_[4];
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace mvq
