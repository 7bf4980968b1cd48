#pragma once

#include <memory>

#include "dmpc/drift.hpp"
#include "dmpc/neuralcore.hpp"
#include "dmpc/oracle.hpp"

namespace dmpc {

// Proposal interface for the best-of-M loop: one relative trajectory per
// draw. sample_batch exists so models can run one batched forward.
class TrajectorySampler {
public:
    virtual ~TrajectorySampler() = default;
    virtual FlatTraj sample(const Query& query, Rng& rng) = 0;
    virtual void sample_batch(const Query& query, int count, Rng& rng,
                              std::vector<FlatTraj>& out);
    virtual void on_episode_start() {}
    virtual void on_step(int /*t*/) {}
};

class DriftingSampler : public TrajectorySampler {
public:
    // horizon/d_x/d_u give the flattened-output layout (from the checkpoint).
    DriftingSampler(GeneratorModel model, bool condition_on_omega, int horizon,
                    int d_x, int d_u);
    FlatTraj sample(const Query& query, Rng& rng) override;
    void sample_batch(const Query& query, int count, Rng& rng,
                      std::vector<FlatTraj>& out) override;

private:
    GeneratorModel model_;
    bool condition_on_omega_;
    int horizon_, d_x_, d_u_;
};

// Emits the finite-horizon LQR plan from the current state using the gain
// tail K_t, K_{t+1}, ... (clamped at the last gain); with m_plan = 1 the
// executed sequence is exactly the time-varying LQR.
class OracleSampler : public TrajectorySampler {
public:
    OracleSampler(DiscreteLinearSystem sys, RiccatiSolution sol);
    FlatTraj sample(const Query& query, Rng& rng) override;
    void on_episode_start() override { t_ = 0; }
    void on_step(int t) override { t_ = t; }

private:
    DiscreteLinearSystem sys_;
    RiccatiSolution sol_;
    int t_ = 0;
};

class ZeroControlSampler : public TrajectorySampler {
public:
    ZeroControlSampler(int horizon, int d_x, int d_u);
    FlatTraj sample(const Query& query, Rng& rng) override;

private:
    int horizon_, d_x_, d_u_;
};

struct PlanStep {
    Vec candidate_costs;
    int chosen = 0;  // argmin, smallest index on ties
    Vec control;     // first control of the winner
    double seconds = 0.0;
};

PlanStep plan_step(TrajectorySampler& sampler, const Vec& x,
                   const CostParams& omega, int m_plan, Rng& rng);

struct ClosedLoopResult {
    Trajectory realized;
    double cost = 0.0;
    std::vector<double> step_seconds;
    double seconds = 0.0;
};

ClosedLoopResult run_closed_loop(TrajectorySampler& sampler,
                                 const DiscreteLinearSystem& sys,
                                 const Vec& x0, const CostParams& omega,
                                 int horizon, int m_plan, Rng& rng);

// Fraction of trials in which no candidate's evaluated cost is below the
// threshold; drives the best-of-M tail-bound checks with synthetic samplers.
double best_of_m_failure_rate(TrajectorySampler& sampler, const Query& query,
                              double cost_threshold, int m_plan, int trials,
                              Rng& rng);

// Synthetic sampler for the tail bound: emits an H=1, d_x=1, d_u=1 relative
// trajectory whose evaluated cost from x = 0 is low with probability p_hit
// and high otherwise.
class BernoulliCostSampler : public TrajectorySampler {
public:
    BernoulliCostSampler(double p_hit, double low_control, double high_control);
    FlatTraj sample(const Query& query, Rng& rng) override;

private:
    double p_hit_, low_, high_;
};

}  // namespace dmpc
