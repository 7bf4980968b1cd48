#include "dmpc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dmpc/runtime.hpp"

namespace dmpc {

namespace {

constexpr uint64_t kX0Stream = 0xE0;
constexpr uint64_t kEpisodeStream = 0xA7;
constexpr uint64_t kSummaryStream = 0x5B;

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double stat_value(const std::vector<double>& values, Statistic stat) {
    if (stat == Statistic::Mean) {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    return quantile_type7(sorted, 0.5);
}

}  // namespace

double quantile_type7(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), "quantile: empty input");
    require(p >= 0.0 && p <= 1.0, "quantile: p out of [0,1]");
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = (static_cast<double>(n) - 1.0) * p;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_inv_cdf(double p) {
    require(p > 0.0 && p < 1.0, "normal_inv_cdf: p out of (0,1)");
    // Acklam's rational approximation with one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
             a[5]) *
            q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
              c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

BootstrapSummary bootstrap(const std::vector<double>& values, Statistic stat,
                           int resamples, BootstrapMethod method, Rng& rng) {
    const int n = static_cast<int>(values.size());
    require(n >= 2, "bootstrap: need at least 2 values");
    require(resamples >= 2, "bootstrap: need at least 2 resamples");

    BootstrapSummary summary;
    summary.resamples = resamples;
    summary.method = method;

    double mean = 0.0;
    for (double v : values) mean += v;
    summary.mean = mean / n;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    summary.median = quantile_type7(sorted, 0.5);
    summary.q25 = quantile_type7(sorted, 0.25);
    summary.q75 = quantile_type7(sorted, 0.75);

    const double theta_hat = stat_value(values, stat);

    std::vector<double> reps(resamples);
    std::vector<double> sample(n);
    for (int b = 0; b < resamples; ++b) {
        for (int i = 0; i < n; ++i) sample[i] = values[rng.uniform_int(n)];
        reps[b] = stat_value(sample, stat);
    }
    double rep_mean = 0.0;
    for (double v : reps) rep_mean += v;
    rep_mean /= resamples;
    double rep_var = 0.0;
    for (double v : reps) rep_var += (v - rep_mean) * (v - rep_mean);
    summary.se = std::sqrt(rep_var / (resamples - 1));

    std::sort(reps.begin(), reps.end());
    const double alpha = 0.05;

    if (method == BootstrapMethod::Bca) {
        int below = 0;
        for (double v : reps) {
            if (v < theta_hat) ++below;
        }
        const bool degenerate = (below == 0 || below == resamples);
        if (!degenerate) {
            const double z0 =
                normal_inv_cdf(static_cast<double>(below) / resamples);
            // Jackknife acceleration.
            std::vector<double> loo(n);
            std::vector<double> reduced(n - 1);
            for (int i = 0; i < n; ++i) {
                int k = 0;
                for (int j = 0; j < n; ++j)
                    if (j != i) reduced[k++] = values[j];
                loo[i] = stat_value(reduced, stat);
            }
            double loo_mean = 0.0;
            for (double v : loo) loo_mean += v;
            loo_mean /= n;
            double num = 0.0, den = 0.0;
            for (double v : loo) {
                const double d = loo_mean - v;
                num += d * d * d;
                den += d * d;
            }
            double accel = 0.0;
            if (den > 0.0) accel = num / (6.0 * std::pow(den, 1.5));

            auto adjusted = [&](double z_alpha) {
                const double t = z0 + z_alpha;
                return normal_cdf(z0 + t / (1.0 - accel * t));
            };
            const double a1 = adjusted(normal_inv_cdf(alpha / 2));
            const double a2 = adjusted(normal_inv_cdf(1.0 - alpha / 2));
            summary.ci_low = quantile_type7(reps, a1);
            summary.ci_high = quantile_type7(reps, a2);
            return summary;
        }
        summary.fell_back = true;  // constant input: acceleration undefined
    }
    summary.ci_low = quantile_type7(reps, alpha / 2);
    summary.ci_high = quantile_type7(reps, 1.0 - alpha / 2);
    return summary;
}

namespace {

EvalRecord run_episode(const MethodSpec& method, int horizon, int episode,
                       const EvalOptions& options,
                       const DiscreteLinearSystem& sys,
                       const InitBox& init_box) {
    Rng x0_rng = Rng::derive(options.seed,
                             {kX0Stream, static_cast<uint64_t>(horizon),
                              static_cast<uint64_t>(episode)});
    const Vec x0 = sample_init(init_box, x0_rng);

    EvalRecord record;
    record.method = method.label;
    record.horizon = horizon;
    record.seed = options.seed ^ (static_cast<uint64_t>(horizon) << 32) ^
                  static_cast<uint64_t>(episode);
    record.x0 = x0;

    if (method.oracle) {
        const RiccatiSolution sol = solve_riccati(sys, options.omega, horizon);
        Timer total;
        Trajectory tau;
        tau.states.resize(horizon + 1, sys.d_x);
        tau.controls.resize(horizon, sys.d_u);
        Vec x = x0;
        record.step_ms.reserve(horizon);
        for (int t = 0; t < horizon; ++t) {
            Timer step_timer;
            const Vec u = oracle_control(sol, t, x);
            record.step_ms.push_back(step_timer.seconds() * 1e3);
            tau.states.row(t) = x.transpose();
            tau.controls.row(t) = u.transpose();
            x = step(sys, x, u);
        }
        tau.states.row(horizon) = x.transpose();
        record.cost = cost(tau, options.omega);
        record.time_ms = total.seconds() * 1e3;
        if (episode == 0) record.trace = std::make_shared<Trajectory>(tau);
        return record;
    }

    auto sampler = method.make_sampler(horizon);
    Rng rng = Rng::derive(options.seed,
                          {kEpisodeStream, fnv1a(method.label),
                           static_cast<uint64_t>(horizon),
                           static_cast<uint64_t>(episode)});
    ClosedLoopResult result = run_closed_loop(*sampler, sys, x0, options.omega,
                                              horizon, method.m_plan, rng);
    record.cost = result.cost;
    record.time_ms = result.seconds * 1e3;
    record.step_ms.resize(result.step_seconds.size());
    for (size_t i = 0; i < result.step_seconds.size(); ++i)
        record.step_ms[i] = result.step_seconds[i] * 1e3;
    if (episode == 0)
        record.trace = std::make_shared<Trajectory>(result.realized);
    return record;
}

}  // namespace

std::vector<EvalRecord> evaluate(const std::vector<MethodSpec>& methods,
                                 const EvalOptions& options,
                                 const DiscreteLinearSystem& sys,
                                 const InitBox& init_box) {
    require(!methods.empty(), "evaluate: no methods");
    require(options.episodes >= 1, "evaluate: episodes must be >= 1");
    require(!options.horizons.empty(), "evaluate: no horizons");
    for (const MethodSpec& m : methods)
        require(m.oracle || m.make_sampler, "evaluate: method without sampler");

    const int n_methods = static_cast<int>(methods.size());
    const int n_horizons = static_cast<int>(options.horizons.size());
    const int per_method = n_horizons * options.episodes;
    std::vector<EvalRecord> records(
        static_cast<size_t>(n_methods) * per_method);

    // Sampler models can be shared across threads (const forward passes);
    // each (method, horizon, episode) owns its record slot and rng stream.
    parallel_for(n_methods * per_method, [&](int flat) {
        const int mi = flat / per_method;
        const int rem = flat % per_method;
        const int hi = rem / options.episodes;
        const int episode = rem % options.episodes;
        records[flat] = run_episode(methods[mi], options.horizons[hi], episode,
                                    options, sys, init_box);
    });

    // Per-episode optimality bound against the oracle, when present.
    for (int mi = 0; mi < n_methods; ++mi) {
        if (!methods[mi].oracle) continue;
        for (int flat = 0; flat < n_methods * per_method; ++flat) {
            const int oracle_flat = mi * per_method + (flat % per_method);
            if (records[flat].cost < records[oracle_flat].cost - 1e-6)
                throw NumericError(
                    "evaluate: method " + records[flat].method +
                    " beat the oracle beyond numerical noise (episode " +
                    std::to_string(flat % options.episodes) + ")");
        }
    }
    return records;
}

namespace {

struct GroupKey {
    std::string method;
    int horizon;
    bool operator<(const GroupKey& o) const {
        return method < o.method ||
               (method == o.method && horizon < o.horizon);
    }
};

}  // namespace

void export_records(const std::vector<EvalRecord>& records,
                    const std::string& out_dir, int resamples,
                    BootstrapMethod method, uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const int d_x = records.empty() ? 2 : static_cast<int>(records[0].x0.size());

    std::ofstream eps(fs::path(out_dir) / "episodes.csv");
    if (!eps) throw IoError("export: cannot open episodes.csv");
    eps << "method,H,seed";
    for (int i = 0; i < d_x; ++i) eps << ",x0_" << i;
    eps << ",cost,time_ms\n";
    for (const EvalRecord& r : records) {
        eps << r.method << "," << r.horizon << "," << r.seed;
        for (int i = 0; i < d_x; ++i) eps << "," << fmt(r.x0[i]);
        eps << "," << fmt(r.cost) << "," << fmt(r.time_ms) << "\n";
    }

    std::map<GroupKey, std::vector<const EvalRecord*>> groups;
    for (const EvalRecord& r : records)
        groups[{r.method, r.horizon}].push_back(&r);

    std::ofstream sum(fs::path(out_dir) / "summary.csv");
    if (!sum) throw IoError("export: cannot open summary.csv");
    sum << "method,H,n,mean,se,ci_lo,ci_hi,median,q25,q75,time_mean_ms,"
           "time_se_ms\n";
    for (const auto& [key, group] : groups) {
        std::vector<double> costs, times;
        costs.reserve(group.size());
        times.reserve(group.size());
        for (const EvalRecord* r : group) {
            costs.push_back(r->cost);
            times.push_back(r->time_ms);
        }
        sum << key.method << "," << key.horizon << "," << group.size();
        if (costs.size() >= 2) {
            Rng rng = Rng::derive(seed, {kSummaryStream, fnv1a(key.method),
                                         static_cast<uint64_t>(key.horizon)});
            const BootstrapSummary cost_stats =
                bootstrap(costs, Statistic::Mean, resamples, method, rng);
            const BootstrapSummary time_stats =
                bootstrap(times, Statistic::Mean, resamples, method, rng);
            sum << "," << fmt(cost_stats.mean) << "," << fmt(cost_stats.se)
                << "," << fmt(cost_stats.ci_low) << ","
                << fmt(cost_stats.ci_high) << "," << fmt(cost_stats.median)
                << "," << fmt(cost_stats.q25) << "," << fmt(cost_stats.q75)
                << "," << fmt(time_stats.mean) << "," << fmt(time_stats.se);
        } else {
            const double c = costs.empty() ? 0.0 : costs[0];
            const double t = times.empty() ? 0.0 : times[0];
            sum << "," << fmt(c) << ",0," << fmt(c) << "," << fmt(c) << ","
                << fmt(c) << "," << fmt(c) << "," << fmt(c) << "," << fmt(t)
                << ",0";
        }
        sum << "\n";
    }

    for (const EvalRecord& r : records) {
        if (!r.trace) continue;
        std::ofstream tr(fs::path(out_dir) /
                         ("rollout_" + r.method + "_" +
                          std::to_string(r.horizon) + ".csv"));
        if (!tr) throw IoError("export: cannot open rollout csv");
        const Trajectory& tau = *r.trace;
        tr << "t";
        for (int i = 0; i < tau.state_dim(); ++i) tr << ",x_" << i;
        for (int i = 0; i < tau.control_dim(); ++i)
            tr << ",u" << (tau.control_dim() > 1 ? "_" + std::to_string(i) : "");
        tr << "\n";
        for (int t = 0; t <= tau.horizon(); ++t) {
            tr << t;
            for (int i = 0; i < tau.state_dim(); ++i)
                tr << "," << fmt(tau.states(t, i));
            for (int i = 0; i < tau.control_dim(); ++i) {
                if (t < tau.horizon())
                    tr << "," << fmt(tau.controls(t, i));
                else
                    tr << ",";
            }
            tr << "\n";
        }
    }
}

void summarize_episodes_csv(const std::string& episodes_csv,
                            const std::string& out_csv, int resamples,
                            BootstrapMethod method, uint64_t seed) {
    std::ifstream is(episodes_csv);
    if (!is) throw IoError("stats: cannot open " + episodes_csv);
    std::string line;
    if (!std::getline(is, line)) throw IoError("stats: empty episodes csv");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int cost_col = -1, time_col = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "cost") cost_col = static_cast<int>(i);
        if (header[i] == "time_ms") time_col = static_cast<int>(i);
    }
    require(cost_col >= 0 && time_col >= 0,
            "stats: episodes csv missing cost/time_ms columns");

    std::map<GroupKey, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        const GroupKey key{cells[0], std::stoi(cells[1])};
        groups[key].first.push_back(std::stod(cells[cost_col]));
        groups[key].second.push_back(std::stod(cells[time_col]));
    }

    std::ofstream sum(out_csv);
    if (!sum) throw IoError("stats: cannot open " + out_csv);
    sum << "method,H,n,mean,se,ci_lo,ci_hi,median,q25,q75,time_mean_ms,"
           "time_se_ms\n";
    for (const auto& [key, data] : groups) {
        Rng rng = Rng::derive(seed, {kSummaryStream, fnv1a(key.method),
                                     static_cast<uint64_t>(key.horizon)});
        const BootstrapSummary cost_stats =
            bootstrap(data.first, Statistic::Mean, resamples, method, rng);
        const BootstrapSummary time_stats =
            bootstrap(data.second, Statistic::Mean, resamples, method, rng);
        sum << key.method << "," << key.horizon << "," << data.first.size()
            << "," << fmt(cost_stats.mean) << "," << fmt(cost_stats.se) << ","
            << fmt(cost_stats.ci_low) << "," << fmt(cost_stats.ci_high) << ","
            << fmt(cost_stats.median) << "," << fmt(cost_stats.q25) << ","
            << fmt(cost_stats.q75) << "," << fmt(time_stats.mean) << ","
            << fmt(time_stats.se) << "\n";
    }
}

}  // namespace dmpc
