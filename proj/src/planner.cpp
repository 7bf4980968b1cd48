#include "dmpc/planner.hpp"

#include <cmath>

#include "dmpc/runtime.hpp"

namespace dmpc {

void TrajectorySampler::sample_batch(const Query& query, int count, Rng& rng,
                                     std::vector<FlatTraj>& out) {
    out.clear();
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(sample(query, rng));
}

DriftingSampler::DriftingSampler(GeneratorModel model, bool condition_on_omega,
                                 int horizon, int d_x, int d_u)
    : model_(std::move(model)),
      condition_on_omega_(condition_on_omega),
      horizon_(horizon),
      d_x_(d_x),
      d_u_(d_u) {
    validate(model_);
    require(flat_dim(horizon_, d_x_, d_u_) == model_.out_dim,
            "drifting sampler: layout does not match model out_dim");
}

FlatTraj DriftingSampler::sample(const Query& query, Rng& rng) {
    std::vector<FlatTraj> out;
    sample_batch(query, 1, rng, out);
    return out[0];
}

void DriftingSampler::sample_batch(const Query& query, int count, Rng& rng,
                                   std::vector<FlatTraj>& out) {
    Vec c;
    if (condition_on_omega_) {
        c.resize(query.x0.size() + query.omega.q.size() + query.omega.r.size());
        c << query.x0, query.omega.q, query.omega.r;
    } else {
        c = query.x0;
    }
    require(c.size() == model_.cond_dim, "drifting sampler: cond dim mismatch");
    const Mat eps = rng.gaussian_mat(model_.d_eps, count);
    Mat cond(model_.cond_dim, count);
    for (int j = 0; j < count; ++j) cond.col(j) = c;
    const Mat raw = generator_forward_batch(model_, eps, cond);

    out.assign(count, FlatTraj{});
    for (int j = 0; j < count; ++j) {
        FlatTraj& flat = out[j];
        flat.frame = Frame::Relative;
        flat.horizon = horizon_;
        flat.d_x = d_x_;
        flat.d_u = d_u_;
        flat.vec = raw.col(j);
    }
}

OracleSampler::OracleSampler(DiscreteLinearSystem sys, RiccatiSolution sol)
    : sys_(std::move(sys)), sol_(std::move(sol)) {}

FlatTraj OracleSampler::sample(const Query& query, Rng&) {
    const int horizon = sol_.horizon;
    Trajectory tau;
    tau.states.resize(horizon + 1, sys_.d_x);
    tau.controls.resize(horizon, sys_.d_u);
    Vec x = query.x0;
    for (int i = 0; i < horizon; ++i) {
        tau.states.row(i) = x.transpose();
        const int gain_index = std::min(t_ + i, horizon - 1);
        const Vec u = oracle_control(sol_, gain_index, x);
        tau.controls.row(i) = u.transpose();
        x = step(sys_, x, u);
    }
    tau.states.row(horizon) = x.transpose();
    return to_relative(tau);
}

ZeroControlSampler::ZeroControlSampler(int horizon, int d_x, int d_u)
    : horizon_(horizon), d_x_(d_x), d_u_(d_u) {}

FlatTraj ZeroControlSampler::sample(const Query&, Rng&) {
    FlatTraj flat;
    flat.frame = Frame::Relative;
    flat.horizon = horizon_;
    flat.d_x = d_x_;
    flat.d_u = d_u_;
    flat.vec = Vec::Zero(flat.dim());
    return flat;
}

PlanStep plan_step(TrajectorySampler& sampler, const Vec& x,
                   const CostParams& omega, int m_plan, Rng& rng) {
    require(m_plan >= 1, "plan_step: m_plan must be >= 1");
    Timer timer;
    const Query query{x, omega};
    std::vector<FlatTraj> candidates;
    sampler.sample_batch(query, m_plan, rng, candidates);

    PlanStep result;
    result.candidate_costs.resize(m_plan);
    int best = 0;
    for (int m = 0; m < m_plan; ++m) {
        const Trajectory tau = to_absolute(candidates[m], x);
        result.candidate_costs[m] = cost(tau, omega);
        if (result.candidate_costs[m] < result.candidate_costs[best]) best = m;
    }
    result.chosen = best;
    const FlatTraj& winner = candidates[best];
    result.control =
        winner.vec.segment(flat_u_offset(0, winner.d_x, winner.d_u),
                           winner.d_u);
    result.seconds = timer.seconds();
    return result;
}

ClosedLoopResult run_closed_loop(TrajectorySampler& sampler,
                                 const DiscreteLinearSystem& sys,
                                 const Vec& x0, const CostParams& omega,
                                 int horizon, int m_plan, Rng& rng) {
    require(horizon >= 1, "run_closed_loop: horizon must be >= 1");
    Timer total;
    sampler.on_episode_start();
    ClosedLoopResult result;
    result.realized.states.resize(horizon + 1, sys.d_x);
    result.realized.controls.resize(horizon, sys.d_u);
    result.step_seconds.reserve(horizon);
    Vec x = x0;
    for (int t = 0; t < horizon; ++t) {
        sampler.on_step(t);
        const PlanStep plan = plan_step(sampler, x, omega, m_plan, rng);
        require(plan.control.size() == sys.d_u,
                "run_closed_loop: control dim mismatch");
        result.realized.states.row(t) = x.transpose();
        result.realized.controls.row(t) = plan.control.transpose();
        result.step_seconds.push_back(plan.seconds);
        x = step(sys, x, plan.control);
    }
    result.realized.states.row(horizon) = x.transpose();
    result.cost = cost(result.realized, omega);
    result.seconds = total.seconds();
    return result;
}

double best_of_m_failure_rate(TrajectorySampler& sampler, const Query& query,
                              double cost_threshold, int m_plan, int trials,
                              Rng& rng) {
    require(trials >= 1, "best_of_m_failure_rate: trials must be >= 1");
    int failures = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const PlanStep plan =
            plan_step(sampler, query.x0, query.omega, m_plan, rng);
        if (plan.candidate_costs[plan.chosen] > cost_threshold) ++failures;
    }
    return static_cast<double>(failures) / trials;
}

BernoulliCostSampler::BernoulliCostSampler(double p_hit, double low_control,
                                           double high_control)
    : p_hit_(p_hit), low_(low_control), high_(high_control) {}

FlatTraj BernoulliCostSampler::sample(const Query&, Rng& rng) {
    FlatTraj flat;
    flat.frame = Frame::Relative;
    flat.horizon = 1;
    flat.d_x = 1;
    flat.d_u = 1;
    flat.vec = Vec::Zero(flat.dim());
    flat.vec[flat_u_offset(0, 1, 1)] = rng.uniform01() < p_hit_ ? low_ : high_;
    return flat;
}

}  // namespace dmpc
