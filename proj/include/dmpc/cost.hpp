#pragma once

#include "dmpc/common.hpp"
#include "dmpc/rng.hpp"

namespace dmpc {

// Diagonal quadratic weights omega = (q, r).
struct CostParams {
    Vec q;  // d_x nonnegative state weights
    Vec r;  // d_u nonnegative control weights
};

// Sampling box Omega = [q_min,q_max]^d_x x [r_min,r_max]^d_u.
struct CostBox {
    double q_min = 0.5;
    double q_max = 5.0;
    double r_min = 0.05;
    double r_max = 1.0;
};

// H-step trajectory in absolute coordinates: states row t is x_t,
// controls row t is u_t.
struct Trajectory {
    Mat states;    // (H+1) x d_x
    Mat controls;  // H x d_u

    int horizon() const { return static_cast<int>(controls.rows()); }
    int state_dim() const { return static_cast<int>(states.cols()); }
    int control_dim() const { return static_cast<int>(controls.cols()); }
};

// Planning query c = (x0, omega): the conditioning input of every generator.
struct Query {
    Vec x0;
    CostParams omega;
};

void validate(const CostParams& omega);
void validate(const CostBox& box);
void validate(const Trajectory& tau);

// Flattened layout [x_0 | u_0 | x_1 | u_1 | ... | u_{H-1} | x_H].
inline int flat_dim(int horizon, int d_x, int d_u) {
    return (horizon + 1) * d_x + horizon * d_u;
}
inline int flat_x_offset(int t, int d_x, int d_u) { return t * (d_x + d_u); }
inline int flat_u_offset(int t, int d_x, int d_u) {
    return t * (d_x + d_u) + d_x;
}

// Sum_{t<H} (x_t'Qx_t + u_t'Ru_t) + x_H'Qx_H, summed in order t = 0..H.
double cost(const Trajectory& tau, const CostParams& omega);

// Gradient of cost() w.r.t. the flattened trajectory. With fix_initial the
// x_0 block is zeroed (x_0 is conditioning, not a decision variable).
Vec cost_gradient(const Trajectory& tau, const CostParams& omega,
                  bool fix_initial);

// omega ~ Unif(Omega), coordinates i.i.d.
CostParams sample_omega(const CostBox& box, int d_x, int d_u, Rng& rng);

}  // namespace dmpc
