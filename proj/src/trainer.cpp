#include "dmpc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dmpc/oracle.hpp"
#include "dmpc/runtime.hpp"

namespace dmpc {

namespace {

constexpr uint64_t kQueryStream = 0x71;
constexpr uint64_t kBatchStream = 0xB1;

Vec normalize_out(const NormalizationStats& norm, const Vec& v) {
    return ((v - norm.out_mean).array() / norm.out_std.array()).matrix();
}

}  // namespace

std::string kind_name(GeneratorKind kind) {
    return kind == GeneratorKind::Drifting ? "drifting" : "drifting_prior";
}

void validate(const TrainConfig& cfg) {
    require(cfg.epochs >= 1, "train config: epochs must be >= 1");
    require(cfg.batch_queries >= 1, "train config: batch_queries must be >= 1");
    require(cfg.positives >= 1, "train config: positives must be >= 1");
    require(cfg.negatives >= 2, "train config: negatives must be >= 2");
    require(cfg.knn >= 1, "train config: knn must be >= 1");
    require(cfg.beta_min <= cfg.beta_max,
            "train config: beta_min must be <= beta_max");
    require(cfg.beta_min >= 0.0, "train config: beta_min must be >= 0");
    require(cfg.noise_dim >= 1, "train config: noise_dim must be >= 1");
    require(cfg.lr > 0.0, "train config: lr must be > 0");
}

double beta_at(const TrainConfig& cfg, int epoch) {
    require(epoch >= 0 && epoch < cfg.epochs, "beta_at: epoch out of range");
    if (cfg.beta_schedule == BetaSchedule::Constant) return cfg.beta_max;
    if (cfg.epochs == 1) return cfg.beta_max;
    return cfg.beta_min + (cfg.beta_max - cfg.beta_min) *
                              (static_cast<double>(epoch) /
                               static_cast<double>(cfg.epochs - 1));
}

double beta_cost_scale(const OfflineDataset& ds,
                       const DiscreteLinearSystem& sys,
                       const CostParams& eval_omega) {
    const RiccatiSolution sol =
        solve_riccati(sys, eval_omega, ds.meta.horizon);
    std::vector<double> gaps(ds.size());
    for (int i = 0; i < ds.size(); ++i) {
        const Vec x0 = ds.initial_states.row(i).transpose();
        const double optimal = x0.dot(sol.value_mats[0] * x0);
        gaps[i] = std::max(cost(ds.trajectories[i], eval_omega) - optimal, 0.0);
    }
    std::sort(gaps.begin(), gaps.end());
    const size_t n = gaps.size();
    const double med =
        (n % 2 == 1) ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
    return std::max(med, 1e-8);
}

NormalizationStats compute_normalization(const OfflineDataset& ds,
                                         const CostBox& box,
                                         GeneratorKind kind) {
    const int d_x = ds.meta.d_x;
    const int d_u = ds.meta.d_u;
    const int out_dim = flat_dim(ds.meta.horizon, d_x, d_u);
    const int n = ds.size();

    NormalizationStats norm;
    norm.out_mean = Vec::Zero(out_dim);
    for (int i = 0; i < n; ++i) norm.out_mean += to_relative(ds.trajectories[i]).vec;
    norm.out_mean /= n;
    Vec var = Vec::Zero(out_dim);
    for (int i = 0; i < n; ++i) {
        const Vec d = to_relative(ds.trajectories[i]).vec - norm.out_mean;
        var += d.cwiseAbs2();
    }
    norm.out_std = (var / n).cwiseSqrt();
    floor_std(norm.out_std);

    const Vec x_mean = ds.initial_states.colwise().mean().transpose();
    Vec x_var = Vec::Zero(d_x);
    for (int i = 0; i < n; ++i) {
        const Vec d = ds.initial_states.row(i).transpose() - x_mean;
        x_var += d.cwiseAbs2();
    }
    Vec x_std = (x_var / n).cwiseSqrt();

    if (kind == GeneratorKind::DriftingPrior) {
        norm.cond_mean = x_mean;
        norm.cond_std = x_std;
    } else {
        // Query cond = [x0; q; r]; omega is Unif(Omega) so mean/std are
        // the uniform's closed form.
        norm.cond_mean.resize(d_x + d_x + d_u);
        norm.cond_std.resize(d_x + d_x + d_u);
        norm.cond_mean.head(d_x) = x_mean;
        norm.cond_std.head(d_x) = x_std;
        const double inv_sqrt12 = 1.0 / std::sqrt(12.0);
        norm.cond_mean.segment(d_x, d_x).setConstant(
            0.5 * (box.q_min + box.q_max));
        norm.cond_std.segment(d_x, d_x).setConstant(
            (box.q_max - box.q_min) * inv_sqrt12);
        norm.cond_mean.tail(d_u).setConstant(0.5 * (box.r_min + box.r_max));
        norm.cond_std.tail(d_u).setConstant((box.r_max - box.r_min) *
                                            inv_sqrt12);
    }
    floor_std(norm.cond_std);
    return norm;
}

Vec assemble_cond(const Vec& x0, const CostParams& omega, GeneratorKind kind) {
    if (kind == GeneratorKind::DriftingPrior) return x0;
    Vec c(x0.size() + omega.q.size() + omega.r.size());
    c << x0, omega.q, omega.r;
    return c;
}

TrainResult train(const OfflineDataset& ds, const DiscreteLinearSystem& sys,
                  const CostBox& box, const CostParams& eval_omega,
                  const TrainConfig& cfg, GeneratorKind kind,
                  const TrainResult* resume,
                  const std::function<void(const StepStats&)>& observer,
                  int stop_after_epochs) {
    validate(cfg);
    validate(box);
    require(ds.size() >= 1, "train: empty dataset");
    const int n = ds.size();
    const int d_x = ds.meta.d_x;
    const int d_u = ds.meta.d_u;
    const int horizon = ds.meta.horizon;
    const int out_dim = flat_dim(horizon, d_x, d_u);
    const int cond_dim =
        kind == GeneratorKind::DriftingPrior ? d_x : 2 * d_x + d_u;
    const int knn_k = std::min(cfg.knn, n);
    const int batch_b = cfg.batch_queries;
    const int batch_m = cfg.negatives;
    const int total_cols = batch_b * batch_m;

    TrainResult result;
    if (resume) {
        require(resume->model.out_dim == out_dim &&
                    resume->model.cond_dim == cond_dim,
                "train: resume checkpoint dims mismatch");
        result.model = resume->model;
        result.adam = resume->adam;
        result.log = resume->log;
        result.cost_scale = resume->cost_scale;
        result.epochs_trained = resume->epochs_trained;
        require(result.epochs_trained < cfg.epochs,
                "train: resume already at or past requested epochs");
    } else {
        std::vector<int> dims;
        dims.push_back(cfg.noise_dim + cond_dim);
        for (int h : cfg.hidden) dims.push_back(h);
        dims.push_back(out_dim);
        Rng init_rng = Rng::derive(cfg.seed, {0x1417});
        result.model.net = Mlp::create(dims, Activation::Silu, init_rng);
        result.model.d_eps = cfg.noise_dim;
        result.model.cond_dim = cond_dim;
        result.model.out_dim = out_dim;
        result.model.norm = compute_normalization(ds, box, kind);
        result.adam = AdamState::create(result.model.net.param_count(), cfg.lr);
        result.cost_scale = beta_cost_scale(ds, sys, eval_omega);
        result.epochs_trained = 0;
    }
    validate(result.model);
    GeneratorModel& model = result.model;
    const NormalizationStats& norm = model.norm;

    const int steps_per_epoch = (n + batch_b - 1) / batch_b;

    // Normalized relative trajectories, cached once.
    std::vector<Vec> flats(n);
    for (int i = 0; i < n; ++i)
        flats[i] = normalize_out(norm, to_relative(ds.trajectories[i]).vec);

    const int last_epoch = stop_after_epochs >= 0
                               ? std::min(cfg.epochs, stop_after_epochs)
                               : cfg.epochs;
    for (int epoch = result.epochs_trained; epoch < last_epoch; ++epoch) {
        Timer epoch_timer;
        const double beta =
            kind == GeneratorKind::DriftingPrior ? 0.0 : beta_at(cfg, epoch);
        const double beta_eff = beta / result.cost_scale;
        double loss_sum = 0.0;
        double drift_norm_sum = 0.0;
        int64_t drift_count = 0;

        for (int step = 0; step < steps_per_epoch; ++step) {
            const uint64_t global_step =
                static_cast<uint64_t>(epoch) * steps_per_epoch + step;

            Rng query_rng = Rng::derive(cfg.seed, {kQueryStream, global_step});
            std::vector<Vec> query_x0(batch_b);
            std::vector<CostParams> query_omega(batch_b);
            for (int b = 0; b < batch_b; ++b) {
                const int idx = query_rng.uniform_int(n);
                query_x0[b] = ds.initial_states.row(idx).transpose();
                query_omega[b] = sample_omega(box, d_x, d_u, query_rng);
            }

            // Per-query positives and noise, then one batched forward over
            // all B*M negatives.
            std::vector<DriftBatch> batches(batch_b);
            Mat eps(cfg.noise_dim, total_cols);
            Mat cond(cond_dim, total_cols);
            for (int b = 0; b < batch_b; ++b) {
                Rng rng = Rng::derive(cfg.seed,
                                      {kBatchStream, global_step,
                                       static_cast<uint64_t>(b)});
                const LocalPrior prior = knn_prior(ds, query_x0[b], knn_k);
                const std::vector<int> picks =
                    sample_positives(prior, cfg.positives, rng);
                DriftBatch& batch = batches[b];
                batch.positives.resize(picks.size());
                batch.positive_costs.resize(
                    static_cast<Eigen::Index>(picks.size()));
                for (size_t i = 0; i < picks.size(); ++i) {
                    batch.positives[i] = flats[picks[i]];
                    batch.positive_costs[static_cast<Eigen::Index>(i)] =
                        relabel_cost(ds.trajectories[picks[i]],
                                     query_omega[b]);
                }
                batch.query = Query{query_x0[b], query_omega[b]};
                batch.beta = beta_eff;
                batch.temperature =
                    cfg.temperature > 0.0
                        ? cfg.temperature
                        : median_pairwise_sq_dist(batch.positives);
                eps.middleCols(b * batch_m, batch_m) =
                    rng.gaussian_mat(cfg.noise_dim, batch_m);
                const Vec c = assemble_cond(query_x0[b], query_omega[b], kind);
                for (int j = 0; j < batch_m; ++j) cond.col(b * batch_m + j) = c;
            }

            auto dump_and_rethrow = [&](const std::string& what) {
                if (!cfg.abort_dump_path.empty()) {
                    TrainResult snapshot;
                    snapshot.model = model;
                    snapshot.adam = result.adam;
                    snapshot.cost_scale = result.cost_scale;
                    snapshot.epochs_trained = epoch;
                    save_checkpoint(
                        make_checkpoint(snapshot, kind, ds.meta, cfg),
                        cfg.abort_dump_path);
                    throw NumericError(what + " (state dumped to " +
                                       cfg.abort_dump_path + ")");
                }
                throw NumericError(what);
            };

            MlpCache cache;
            try {
                generator_forward_batch(model, eps, cond, &cache);
            } catch (const NumericError& e) {
                dump_and_rethrow(std::string("train: ") + e.what() +
                                 " at step " + std::to_string(global_step));
            }
            const Mat& raw = cache.act.back();  // normalized-space outputs

            Mat targets(out_dim, total_cols);
            double step_drift_sq = 0.0;
            for (int b = 0; b < batch_b; ++b) {
                DriftBatch& batch = batches[b];
                batch.negatives.resize(batch_m);
                for (int j = 0; j < batch_m; ++j)
                    batch.negatives[j] = raw.col(b * batch_m + j);
                const std::vector<Vec> batch_targets = drift_targets(batch);
                for (int j = 0; j < batch_m; ++j) {
                    targets.col(b * batch_m + j) = batch_targets[j];
                    const double v_sq =
                        (batch_targets[j] - batch.negatives[j]).squaredNorm();
                    step_drift_sq += v_sq;
                    drift_norm_sum += std::sqrt(v_sq);
                    ++drift_count;
                }
            }
            step_drift_sq /= total_cols;

            const Mat diff = raw - targets;
            const double loss = diff.squaredNorm() / total_cols;
            if (!std::isfinite(loss))
                dump_and_rethrow("train: non-finite loss at step " +
                                 std::to_string(global_step));
            Vec grad;
            mlp_backward_from(model.net, cache, (2.0 / total_cols) * diff,
                              grad);
            adam_step(result.adam, model.net.theta, grad);

            loss_sum += loss;
            if (observer)
                observer(StepStats{static_cast<int>(global_step), loss,
                                   step_drift_sq});
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / steps_per_epoch;
        stats.drift_norm = drift_norm_sum / static_cast<double>(drift_count);
        stats.beta = beta;
        stats.seconds = epoch_timer.seconds();
        result.log.push_back(stats);
        result.epochs_trained = epoch + 1;
    }
    return result;
}

Checkpoint make_checkpoint(const TrainResult& result, GeneratorKind kind,
                           const DatasetMeta& meta, const TrainConfig& cfg) {
    Checkpoint ck;
    ck.kind = kind_name(kind);
    ck.d_x = meta.d_x;
    ck.d_u = meta.d_u;
    ck.horizon = meta.horizon;
    ck.d_eps = result.model.d_eps;
    ck.cond_dim = result.model.cond_dim;
    ck.out_dim = result.model.out_dim;
    ck.net = result.model.net;
    ck.norm = result.model.norm;
    ck.adam = result.adam;
    ck.seed = cfg.seed;
    ck.epochs_trained = result.epochs_trained;
    ck.cost_scale = result.cost_scale;
    ck.extra = {{"epochs", cfg.epochs},
                {"batch_queries", cfg.batch_queries},
                {"positives", cfg.positives},
                {"negatives", cfg.negatives},
                {"lr", cfg.lr},
                {"beta_min", cfg.beta_min},
                {"beta_max", cfg.beta_max},
                {"beta_schedule", cfg.beta_schedule == BetaSchedule::Linear
                                      ? "linear"
                                      : "constant"},
                {"knn", cfg.knn},
                {"hidden", cfg.hidden},
                {"noise_dim", cfg.noise_dim},
                {"temperature", cfg.temperature}};
    return ck;
}

TrainResult resume_state_from_checkpoint(const Checkpoint& ck) {
    TrainResult result;
    result.model = generator_from_checkpoint(ck);
    result.adam = ck.adam;
    result.cost_scale = ck.cost_scale;
    result.epochs_trained = ck.epochs_trained;
    return result;
}

GeneratorModel generator_from_checkpoint(const Checkpoint& ck) {
    GeneratorModel model;
    model.net = ck.net;
    model.d_eps = ck.d_eps;
    model.cond_dim = ck.cond_dim;
    model.out_dim = ck.out_dim;
    model.norm = ck.norm;
    validate(model);
    return model;
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("train log: cannot open " + path);
    os << "epoch,loss,drift_norm,beta,seconds\n";
    char buf[256];
    for (const EpochStats& s : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n",
                      s.epoch, s.loss, s.drift_norm, s.beta, s.seconds);
        os << buf;
    }
}

}  // namespace dmpc
