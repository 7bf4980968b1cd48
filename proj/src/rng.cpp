#include "dmpc/rng.hpp"

#include <cmath>

namespace dmpc {

namespace {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

Rng Rng::derive(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t sm = seed;
    uint64_t h = splitmix64(sm);
    for (uint64_t id : ids) {
        sm ^= id + 0x9E3779B97F4A7C15ULL + (sm << 6) + (sm >> 2);
        h = splitmix64(sm);
    }
    return Rng(h);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

int Rng::uniform_int(int n) {
    // n is small everywhere this is used; modulo bias is < n/2^64.
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    // Box-Muller on (0,1] x [0,1).
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

Vec Rng::gaussian_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gaussian();
    return v;
}

Mat Rng::gaussian_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
}

Vec gaussian(Rng& rng, int n) { return rng.gaussian_vec(n); }

}  // namespace dmpc
