#pragma once

#include <vector>

#include "dmpc/dynamics.hpp"

namespace dmpc {

// Finite-horizon LQR solution: gains[t] is K_t (u = -K_t x) and
// value_mats[t] is P_t with cost-to-go x'P_t x; P_H = Q.
struct RiccatiSolution {
    std::vector<Mat> gains;       // H entries, d_u x d_x
    std::vector<Mat> value_mats;  // H+1 entries, d_x x d_x
    int horizon = 0;
};

RiccatiSolution solve_riccati(const DiscreteLinearSystem& sys,
                              const CostParams& omega, int horizon);

Vec oracle_control(const RiccatiSolution& sol, int t, const Vec& x);

// Closed-loop controllers for rollout(); sigma adds N(0, sigma^2) per
// control coordinate.
Controller oracle_controller(const RiccatiSolution& sol);
Controller noisy_oracle_controller(const RiccatiSolution& sol, double sigma);

}  // namespace dmpc
