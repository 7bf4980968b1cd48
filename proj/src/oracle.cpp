#include "dmpc/oracle.hpp"

#include <cmath>
#include <memory>

namespace dmpc {

namespace {

// Solve M X = Rhs with a determinant guard; M is d_u x d_u (tiny).
Mat guarded_solve(const Mat& m, const Mat& rhs) {
    if (m.rows() == 1) {
        if (!(std::abs(m(0, 0)) > 1e-14))
            throw NumericError("riccati: singular (R + B'PB)");
        return rhs / m(0, 0);
    }
    Eigen::PartialPivLU<Mat> lu(m);
    if (!(std::abs(lu.determinant()) > 1e-14))
        throw NumericError("riccati: singular (R + B'PB)");
    return lu.solve(rhs);
}

}  // namespace

RiccatiSolution solve_riccati(const DiscreteLinearSystem& sys,
                              const CostParams& omega, int horizon) {
    require(horizon >= 1, "riccati: horizon must be >= 1");
    require(omega.q.size() == sys.d_x && omega.r.size() == sys.d_u,
            "riccati: omega dims mismatch");
    const Mat q = omega.q.asDiagonal();
    const Mat r = omega.r.asDiagonal();

    RiccatiSolution sol;
    sol.horizon = horizon;
    sol.gains.resize(horizon);
    sol.value_mats.resize(horizon + 1);
    sol.value_mats[horizon] = q;

    for (int t = horizon - 1; t >= 0; --t) {
        const Mat& p_next = sol.value_mats[t + 1];
        const Mat btp = sys.b_d.transpose() * p_next;
        const Mat k = guarded_solve(r + btp * sys.b_d, btp * sys.a_d);
        Mat p = q + sys.a_d.transpose() * p_next * (sys.a_d - sys.b_d * k);
        p = 0.5 * (p + p.transpose().eval());  // symmetrize each step
        sol.gains[t] = k;
        sol.value_mats[t] = p;
    }
    return sol;
}

Vec oracle_control(const RiccatiSolution& sol, int t, const Vec& x) {
    require(t >= 0 && t < sol.horizon, "oracle_control: step out of range");
    return -(sol.gains[t] * x);
}

Controller oracle_controller(const RiccatiSolution& sol) {
    auto shared = std::make_shared<RiccatiSolution>(sol);
    return [shared](int t, const Vec& x, Rng&) {
        return oracle_control(*shared, t, x);
    };
}

Controller noisy_oracle_controller(const RiccatiSolution& sol, double sigma) {
    auto shared = std::make_shared<RiccatiSolution>(sol);
    return [shared, sigma](int t, const Vec& x, Rng& rng) {
        Vec u = oracle_control(*shared, t, x);
        for (int i = 0; i < u.size(); ++i) u[i] += sigma * rng.gaussian();
        return u;
    };
}

}  // namespace dmpc
