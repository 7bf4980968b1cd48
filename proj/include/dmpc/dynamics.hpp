#pragma once

#include <functional>

#include "dmpc/cost.hpp"

namespace dmpc {

// One-dimensional mass-spring-damper: p'' = (-k_s p - c p' + u) / m.
struct MsdParams {
    double m = 1.0;    // kg
    double k_s = 1.0;  // N/m
    double c = 0.2;    // N*s/m
    double dt = 0.05;  // s
};

struct DiscreteLinearSystem {
    Mat a_d;  // d_x x d_x
    Mat b_d;  // d_x x d_u
    int d_x = 0;
    int d_u = 0;
};

struct InitBox {
    Vec lower;
    Vec upper;
};

void validate(const MsdParams& params);
void validate(const InitBox& box);

Mat msd_continuous_a(const MsdParams& params);
Mat msd_continuous_b(const MsdParams& params);

// Exact zero-order-hold discretization via the augmented-matrix exponential
// exp([[A,B],[0,0]] dt), scaled-and-squared truncated Taylor.
DiscreteLinearSystem discretize_zoh(const MsdParams& params);
DiscreteLinearSystem discretize_zoh(const Mat& a, const Mat& b, double dt);

Vec step(const DiscreteLinearSystem& sys, const Vec& x, const Vec& u);

// Controller: (t, x, rng) -> u. Stateful controllers capture shared state.
using Controller = std::function<Vec(int, const Vec&, Rng&)>;

// process_sigma, when nonempty, adds N(0, diag(process_sigma^2)) to every
// transition; the default (empty) keeps the dynamics deterministic and
// consumes no rng draws for it.
Trajectory rollout(const DiscreteLinearSystem& sys, const Vec& x0,
                   const Controller& controller, int steps, Rng& rng,
                   const Vec& process_sigma = Vec());

Vec sample_init(const InitBox& box, Rng& rng);

// Scaled-and-squared truncated Taylor matrix exponential (terms until the
// running term falls below 1e-16 relative).
Mat expm(const Mat& m);

}  // namespace dmpc
