#include "dmpc/cost.hpp"

namespace dmpc {

void validate(const CostParams& omega) {
    require(omega.q.size() > 0 && omega.r.size() > 0,
            "cost params: empty q or r");
    require((omega.q.array() >= 0.0).all(), "cost params: q must be >= 0");
    require((omega.r.array() >= 0.0).all(), "cost params: r must be >= 0");
}

void validate(const CostBox& box) {
    require(box.q_min >= 0.0 && box.q_min <= box.q_max,
            "cost box: need 0 <= q_min <= q_max");
    require(box.r_min >= 0.0 && box.r_min <= box.r_max,
            "cost box: need 0 <= r_min <= r_max");
}

void validate(const Trajectory& tau) {
    require(tau.states.rows() == tau.controls.rows() + 1,
            "trajectory: states must have H+1 rows");
    require(tau.states.allFinite() && tau.controls.allFinite(),
            "trajectory: non-finite entries");
}

double cost(const Trajectory& tau, const CostParams& omega) {
    const int H = tau.horizon();
    require(omega.q.size() == tau.state_dim(),
            "cost: q size != state dim");
    require(omega.r.size() == tau.control_dim(),
            "cost: r size != control dim");
    double total = 0.0;
    for (int t = 0; t < H; ++t) {
        total += tau.states.row(t).cwiseAbs2().dot(omega.q.transpose());
        total += tau.controls.row(t).cwiseAbs2().dot(omega.r.transpose());
    }
    total += tau.states.row(H).cwiseAbs2().dot(omega.q.transpose());
    return total;
}

Vec cost_gradient(const Trajectory& tau, const CostParams& omega,
                  bool fix_initial) {
    const int H = tau.horizon();
    const int d_x = tau.state_dim();
    const int d_u = tau.control_dim();
    require(omega.q.size() == d_x && omega.r.size() == d_u,
            "cost_gradient: omega dims mismatch");
    Vec g = Vec::Zero(flat_dim(H, d_x, d_u));
    for (int t = 0; t <= H; ++t) {
        g.segment(flat_x_offset(t, d_x, d_u), d_x) =
            2.0 * omega.q.cwiseProduct(tau.states.row(t).transpose());
    }
    for (int t = 0; t < H; ++t) {
        g.segment(flat_u_offset(t, d_x, d_u), d_u) =
            2.0 * omega.r.cwiseProduct(tau.controls.row(t).transpose());
    }
    if (fix_initial) g.segment(flat_x_offset(0, d_x, d_u), d_x).setZero();
    return g;
}

CostParams sample_omega(const CostBox& box, int d_x, int d_u, Rng& rng) {
    validate(box);
    CostParams omega;
    omega.q.resize(d_x);
    omega.r.resize(d_u);
    for (int i = 0; i < d_x; ++i) omega.q[i] = rng.uniform(box.q_min, box.q_max);
    for (int i = 0; i < d_u; ++i) omega.r[i] = rng.uniform(box.r_min, box.r_max);
    return omega;
}

}  // namespace dmpc
