#pragma once

#include <cstdint>
#include <initializer_list>

#include "dmpc/common.hpp"

namespace dmpc {

// xoshiro256++ seeded through splitmix64. Substreams are derived by hashing
// (seed, id...) so any unit of work can own an independent, reproducible
// stream regardless of thread count.
class Rng {
public:
    explicit Rng(uint64_t seed);

    static Rng derive(uint64_t seed, std::initializer_list<uint64_t> ids);

    uint64_t next_u64();
    double uniform01();                       // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int n);                   // {0, ..., n-1}
    double gaussian();                        // standard normal, Box-Muller
    Vec gaussian_vec(int n);
    Mat gaussian_mat(int rows, int cols);     // filled column by column

private:
    uint64_t s_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Convenience: n i.i.d. standard normals.
Vec gaussian(Rng& rng, int n);

}  // namespace dmpc
