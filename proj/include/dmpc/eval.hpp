#pragma once

#include <functional>
#include <memory>

#include "dmpc/planner.hpp"

namespace dmpc {

struct EvalRecord {
    std::string method;
    int horizon = 0;
    uint64_t seed = 0;
    Vec x0;
    double cost = 0.0;
    double time_ms = 0.0;
    std::vector<double> step_ms;
    std::shared_ptr<Trajectory> trace;  // kept for episode 0 only
};

enum class BootstrapMethod { Percentile, Bca };
enum class Statistic { Mean, Median };

struct BootstrapSummary {
    double mean = 0.0;  // arithmetic mean of the data
    double se = 0.0;    // bootstrap SE of the chosen statistic
    double ci_low = 0.0;
    double ci_high = 0.0;
    double median = 0.0;  // data quantiles, type-7
    double q25 = 0.0;
    double q75 = 0.0;
    int resamples = 0;
    BootstrapMethod method = BootstrapMethod::Bca;
    bool fell_back = false;  // BCa degenerate -> percentile
};

// Type-7 quantile (linear interpolation between order statistics);
// values must be sorted ascending.
double quantile_type7(const std::vector<double>& sorted, double p);

double normal_cdf(double x);
double normal_inv_cdf(double p);

// 95% CI by percentile or BCa (bias correction from the resample CDF,
// acceleration from jackknife skewness). Constant input under BCa falls
// back to percentile with fell_back set.
BootstrapSummary bootstrap(const std::vector<double>& values, Statistic stat,
                           int resamples, BootstrapMethod method, Rng& rng);

struct MethodSpec {
    std::string label;
    bool oracle = false;  // time-varying finite-horizon LQR, no sampler
    int m_plan = 16;
    std::function<std::unique_ptr<TrajectorySampler>(int horizon)> make_sampler;
};

struct EvalOptions {
    std::vector<int> horizons{30, 50, 100};
    int episodes = 100;
    CostParams omega;
    uint64_t seed = 0;
};

// Paired design: episode e shares x0 across methods at each horizon. When
// an oracle method is present, every record is checked against the
// per-episode optimality bound (cost >= oracle cost - 1e-6).
std::vector<EvalRecord> evaluate(const std::vector<MethodSpec>& methods,
                                 const EvalOptions& options,
                                 const DiscreteLinearSystem& sys,
                                 const InitBox& init_box);

// episodes.csv, summary.csv, rollout_<method>_<H>.csv under out_dir.
void export_records(const std::vector<EvalRecord>& records,
                    const std::string& out_dir, int resamples,
                    BootstrapMethod method, uint64_t seed);

// Recomputes summary.csv rows from an episodes.csv (the stats CLI command).
void summarize_episodes_csv(const std::string& episodes_csv,
                            const std::string& out_csv, int resamples,
                            BootstrapMethod method, uint64_t seed);

}  // namespace dmpc
