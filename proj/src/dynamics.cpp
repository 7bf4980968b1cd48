#include "dmpc/dynamics.hpp"

#include <cmath>

namespace dmpc {

void validate(const MsdParams& params) {
    require(params.m > 0.0, "msd: mass must be > 0");
    require(params.dt > 0.0, "msd: dt must be > 0");
    require(params.k_s >= 0.0, "msd: spring constant must be >= 0");
    require(params.c >= 0.0, "msd: damping must be >= 0");
}

void validate(const InitBox& box) {
    require(box.lower.size() == box.upper.size(), "init box: size mismatch");
    require((box.lower.array() <= box.upper.array()).all(),
            "init box: lower > upper");
}

Mat msd_continuous_a(const MsdParams& params) {
    Mat a(2, 2);
    a << 0.0, 1.0, -params.k_s / params.m, -params.c / params.m;
    return a;
}

Mat msd_continuous_b(const MsdParams& params) {
    Mat b(2, 1);
    b << 0.0, 1.0 / params.m;
    return b;
}

Mat expm(const Mat& m) {
    const int n = static_cast<int>(m.rows());
    require(m.cols() == n, "expm: square matrix required");

    // Scale so the infinity norm is <= 0.5, Taylor to convergence, square back.
    double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    const Mat ms = m * scale;

    Mat result = Mat::Identity(n, n);
    Mat term = Mat::Identity(n, n);
    for (int k = 1; k <= 60; ++k) {
        term = (term * ms) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-16) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    if (!result.allFinite()) throw NumericError("expm: non-finite result");
    return result;
}

DiscreteLinearSystem discretize_zoh(const Mat& a, const Mat& b, double dt) {
    require(dt > 0.0, "zoh: dt must be > 0");
    const int d_x = static_cast<int>(a.rows());
    const int d_u = static_cast<int>(b.cols());
    require(a.cols() == d_x && b.rows() == d_x, "zoh: shape mismatch");

    Mat aug = Mat::Zero(d_x + d_u, d_x + d_u);
    aug.topLeftCorner(d_x, d_x) = a;
    aug.topRightCorner(d_x, d_u) = b;
    const Mat e = expm(aug * dt);

    DiscreteLinearSystem sys;
    sys.a_d = e.topLeftCorner(d_x, d_x);
    sys.b_d = e.topRightCorner(d_x, d_u);
    sys.d_x = d_x;
    sys.d_u = d_u;
    if (!sys.a_d.allFinite() || !sys.b_d.allFinite())
        throw NumericError("zoh: non-finite discretization");
    return sys;
}

DiscreteLinearSystem discretize_zoh(const MsdParams& params) {
    validate(params);
    return discretize_zoh(msd_continuous_a(params), msd_continuous_b(params),
                          params.dt);
}

Vec step(const DiscreteLinearSystem& sys, const Vec& x, const Vec& u) {
    require(x.size() == sys.d_x, "step: state dim mismatch");
    require(u.size() == sys.d_u, "step: control dim mismatch");
    return sys.a_d * x + sys.b_d * u;
}

Trajectory rollout(const DiscreteLinearSystem& sys, const Vec& x0,
                   const Controller& controller, int steps, Rng& rng,
                   const Vec& process_sigma) {
    require(steps >= 1, "rollout: need at least one step");
    require(x0.size() == sys.d_x, "rollout: x0 dim mismatch");
    const bool noisy = process_sigma.size() > 0;
    require(!noisy || process_sigma.size() == sys.d_x,
            "rollout: process noise dim mismatch");
    Trajectory tau;
    tau.states.resize(steps + 1, sys.d_x);
    tau.controls.resize(steps, sys.d_u);
    Vec x = x0;
    for (int t = 0; t < steps; ++t) {
        tau.states.row(t) = x.transpose();
        Vec u = controller(t, x, rng);
        if (u.size() != sys.d_u || !u.allFinite())
            throw NumericError("rollout: controller returned bad control");
        tau.controls.row(t) = u.transpose();
        x = step(sys, x, u);
        if (noisy)
            x += process_sigma.cwiseProduct(rng.gaussian_vec(sys.d_x));
    }
    tau.states.row(steps) = x.transpose();
    return tau;
}

Vec sample_init(const InitBox& box, Rng& rng) {
    validate(box);
    Vec x(box.lower.size());
    for (int i = 0; i < x.size(); ++i)
        x[i] = rng.uniform(box.lower[i], box.upper[i]);
    return x;
}

}  // namespace dmpc
