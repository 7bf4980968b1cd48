#include "dmpc/baselines.hpp"

#include <cmath>

#include "dmpc/runtime.hpp"

namespace dmpc {

namespace {

constexpr uint64_t kDdpmStream = 0xDD;

Vec normalize_out(const NormalizationStats& norm, const Vec& v) {
    return ((v - norm.out_mean).array() / norm.out_std.array()).matrix();
}

Vec denormalize_out(const NormalizationStats& norm, const Vec& v) {
    return (v.array() * norm.out_std.array()).matrix() + norm.out_mean;
}

Mat denoiser_input(const DdpmModel& model, const Mat& z, int t,
                   const Vec& cond_normalized) {
    const Eigen::Index batch = z.cols();
    const Vec embed = time_embedding(t, model.steps, model.time_embed_dim);
    Mat input(model.out_dim + model.time_embed_dim + model.cond_dim, batch);
    input.topRows(model.out_dim) = z;
    for (Eigen::Index j = 0; j < batch; ++j) {
        input.block(model.out_dim, j, model.time_embed_dim, 1) = embed;
        input.bottomRows(model.cond_dim).col(j) = cond_normalized;
    }
    return input;
}

Vec normalize_cond(const DdpmModel& model, const Vec& x0) {
    return ((x0 - model.norm.cond_mean).array() / model.norm.cond_std.array())
        .matrix();
}

}  // namespace

void validate(const DdpmConfig& cfg) {
    require(cfg.epochs >= 1, "ddpm config: epochs must be >= 1");
    require(cfg.batch >= 1, "ddpm config: batch must be >= 1");
    require(cfg.steps >= 1, "ddpm config: steps must be >= 1");
    require(cfg.lr > 0.0, "ddpm config: lr must be > 0");
    require(cfg.beta_min > 0.0 && cfg.beta_max < 1.0 &&
                cfg.beta_min <= cfg.beta_max,
            "ddpm config: need 0 < beta_min <= beta_max < 1");
    require(cfg.time_embed_dim >= 2 && cfg.time_embed_dim % 2 == 0,
            "ddpm config: time_embed_dim must be even and >= 2");
}

Vec noise_schedule_betas(int steps, double beta_min, double beta_max) {
    require(steps >= 1, "noise schedule: steps must be >= 1");
    Vec betas(steps);
    if (steps == 1) {
        betas[0] = beta_max;
    } else {
        for (int t = 0; t < steps; ++t)
            betas[t] = beta_min + (beta_max - beta_min) *
                                      (static_cast<double>(t) / (steps - 1));
    }
    for (int t = 0; t < steps; ++t)
        require(betas[t] > 0.0 && betas[t] < 1.0,
                "noise schedule: beta_t out of (0,1)");
    return betas;
}

void validate_schedule(const DdpmModel& model) {
    require(model.betas.size() == model.steps, "schedule: betas size");
    require(model.alpha_bars.size() == model.steps + 1,
            "schedule: alpha_bars size");
    require(model.alpha_bars[0] == 1.0, "schedule: alpha_bar_0 must be 1");
    for (int t = 1; t <= model.steps; ++t)
        require(model.alpha_bars[t] < model.alpha_bars[t - 1],
                "schedule: alpha_bar must strictly decrease");
    for (int t = 1; t < model.steps; ++t)
        require(model.betas[t] >= model.betas[t - 1],
                "schedule: beta must be non-decreasing");
    require(model.alpha_bars[model.steps] <= 0.01,
            "schedule: alpha_bar_S must be <= 0.01");
}

Vec time_embedding(int t, int steps, int dim) {
    Vec e(dim);
    const double x = static_cast<double>(t) / steps;
    for (int k = 0; k < dim / 2; ++k) {
        const double freq = 2.0 * M_PI * std::ldexp(1.0, k);
        e[2 * k] = std::sin(freq * x);
        e[2 * k + 1] = std::cos(freq * x);
    }
    return e;
}

DdpmTrainResult ddpm_train(const OfflineDataset& ds, const CostBox& box,
                           const DdpmConfig& cfg,
                           const DdpmTrainResult* resume) {
    validate(cfg);
    require(ds.size() >= 1, "ddpm_train: empty dataset");
    const int n = ds.size();
    const int d_x = ds.meta.d_x;
    const int out_dim = flat_dim(ds.meta.horizon, d_x, ds.meta.d_u);
    const int in_dim = out_dim + cfg.time_embed_dim + d_x;

    DdpmTrainResult result;
    if (resume) {
        result = *resume;
        require(result.model.out_dim == out_dim,
                "ddpm_train: resume dims mismatch");
        require(result.epochs_trained < cfg.epochs,
                "ddpm_train: resume already at or past requested epochs");
    } else {
        DdpmModel& model = result.model;
        model.steps = cfg.steps;
        model.cond_dim = d_x;
        model.out_dim = out_dim;
        model.time_embed_dim = cfg.time_embed_dim;
        model.betas = noise_schedule_betas(cfg.steps, cfg.beta_min,
                                           cfg.beta_max);
        model.alpha_bars.resize(cfg.steps + 1);
        model.alpha_bars[0] = 1.0;
        for (int t = 1; t <= cfg.steps; ++t)
            model.alpha_bars[t] =
                model.alpha_bars[t - 1] * (1.0 - model.betas[t - 1]);
        // Conditioning is x0 only: reuse the prior-kind normalization.
        model.norm = compute_normalization(ds, box, GeneratorKind::DriftingPrior);

        std::vector<int> dims;
        dims.push_back(in_dim);
        for (int h : cfg.hidden) dims.push_back(h);
        dims.push_back(out_dim);
        Rng init_rng = Rng::derive(cfg.seed, {0xDD17});
        model.denoiser = Mlp::create(dims, Activation::Silu, init_rng);
        result.adam = AdamState::create(model.denoiser.param_count(), cfg.lr);
        result.epochs_trained = 0;
    }
    DdpmModel& model = result.model;

    std::vector<Vec> flats(n);
    for (int i = 0; i < n; ++i)
        flats[i] = normalize_out(model.norm, to_relative(ds.trajectories[i]).vec);
    std::vector<Vec> conds(n);
    for (int i = 0; i < n; ++i)
        conds[i] = normalize_cond(model, ds.initial_states.row(i).transpose());

    const int steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    for (int epoch = result.epochs_trained; epoch < cfg.epochs; ++epoch) {
        Timer timer;
        double loss_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const uint64_t global_step =
                static_cast<uint64_t>(epoch) * steps_per_epoch + step;
            Rng rng = Rng::derive(cfg.seed, {kDdpmStream, global_step});

            Mat input(in_dim, cfg.batch);
            Mat targets(out_dim, cfg.batch);
            for (int b = 0; b < cfg.batch; ++b) {
                const int i = rng.uniform_int(n);
                const int t = 1 + rng.uniform_int(model.steps);
                const Vec eps = rng.gaussian_vec(out_dim);
                const double ab = model.alpha_bars[t];
                const Vec z_t =
                    std::sqrt(ab) * flats[i] + std::sqrt(1.0 - ab) * eps;
                input.col(b).head(out_dim) = z_t;
                input.col(b).segment(out_dim, model.time_embed_dim) =
                    time_embedding(t, model.steps, model.time_embed_dim);
                input.col(b).tail(d_x) = conds[i];
                targets.col(b) = eps;
            }
            MlpCache cache;
            mlp_forward(model.denoiser, input, &cache);
            Vec grad;
            const double loss =
                mlp_mse_backward(model.denoiser, cache, targets, grad);
            if (!std::isfinite(loss))
                throw NumericError("ddpm_train: non-finite loss");
            adam_step(result.adam, model.denoiser.theta, grad);
            loss_sum += loss;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / steps_per_epoch;
        stats.drift_norm = 0.0;
        stats.beta = 0.0;
        stats.seconds = timer.seconds();
        result.log.push_back(stats);
        result.epochs_trained = epoch + 1;
    }
    return result;
}

namespace {

// Lockstep ancestral sampling for a batch of chains sharing one condition.
Mat ddpm_sample_batch_z0(const DdpmModel& model, const Vec& x0, int count,
                         Rng& rng, const GuidanceConfig* guidance, int horizon,
                         int d_x, int d_u) {
    const Vec cond = normalize_cond(model, x0);
    Mat z = rng.gaussian_mat(model.out_dim, count);
    for (int t = model.steps; t >= 1; --t) {
        const double beta_t = model.betas[t - 1];
        const double alpha_t = 1.0 - beta_t;
        const double ab_t = model.alpha_bars[t];
        const double ab_prev = model.alpha_bars[t - 1];
        const Mat eps_hat =
            mlp_forward(model.denoiser, denoiser_input(model, z, t, cond));
        Mat mean =
            (z - (beta_t / std::sqrt(1.0 - ab_t)) * eps_hat) / std::sqrt(alpha_t);
        const double posterior_var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t;
        if (guidance && guidance->scale != 0.0) {
            for (int j = 0; j < count; ++j) {
                const Vec z0_hat =
                    (z.col(j) - std::sqrt(1.0 - ab_t) * eps_hat.col(j)) /
                    std::sqrt(ab_t);
                FlatTraj flat;
                flat.frame = Frame::Relative;
                flat.horizon = horizon;
                flat.d_x = d_x;
                flat.d_u = d_u;
                flat.vec = denormalize_out(model.norm, z0_hat);
                const Vec g_phys =
                    cost_gradient(to_absolute(flat, x0), guidance->omega,
                                  guidance->fix_initial);
                const Vec g_norm =
                    (g_phys.array() * model.norm.out_std.array()).matrix();
                mean.col(j) -= guidance->scale * posterior_var * g_norm;
            }
        }
        if (t > 1) {
            z = mean + std::sqrt(posterior_var) * rng.gaussian_mat(model.out_dim,
                                                                   count);
        } else {
            z = std::move(mean);
        }
    }
    if (!z.allFinite()) throw NumericError("ddpm_sample: non-finite sample");
    return z;
}

}  // namespace

Vec ddpm_sample_z0(const DdpmModel& model, const Vec& x0, Rng& rng,
                   const GuidanceConfig* guidance) {
    // Guidance needs the trajectory layout; infer the benchmark layout from
    // cond_dim (= d_x) and a d_u = 1 system when guided.
    const int d_x = model.cond_dim;
    const int d_u = 1;
    const int horizon = (model.out_dim - d_x) / (d_x + d_u);
    return ddpm_sample_batch_z0(model, x0, 1, rng, guidance, horizon, d_x, d_u)
        .col(0);
}

FlatTraj ddpm_sample(const DdpmModel& model, const Vec& x0, int horizon,
                     int d_x, int d_u, Rng& rng,
                     const GuidanceConfig* guidance) {
    require(flat_dim(horizon, d_x, d_u) == model.out_dim,
            "ddpm_sample: layout mismatch");
    FlatTraj flat;
    flat.frame = Frame::Relative;
    flat.horizon = horizon;
    flat.d_x = d_x;
    flat.d_u = d_u;
    flat.vec = denormalize_out(
        model.norm, ddpm_sample_batch_z0(model, x0, 1, rng, guidance, horizon,
                                         d_x, d_u)
                        .col(0));
    return flat;
}

DdpmSampler::DdpmSampler(DdpmModel model, int horizon, int d_x, int d_u,
                         double guidance_scale)
    : model_(std::move(model)),
      horizon_(horizon),
      d_x_(d_x),
      d_u_(d_u),
      guidance_scale_(guidance_scale) {
    require(flat_dim(horizon_, d_x_, d_u_) == model_.out_dim,
            "ddpm sampler: layout mismatch");
}

FlatTraj DdpmSampler::sample(const Query& query, Rng& rng) {
    std::vector<FlatTraj> out;
    sample_batch(query, 1, rng, out);
    return out[0];
}

void DdpmSampler::sample_batch(const Query& query, int count, Rng& rng,
                               std::vector<FlatTraj>& out) {
    GuidanceConfig guidance;
    const GuidanceConfig* gp = nullptr;
    if (guidance_scale_ != 0.0) {
        guidance.scale = guidance_scale_;
        guidance.omega = query.omega;
        guidance.fix_initial = true;
        gp = &guidance;
    }
    const Mat z0 = ddpm_sample_batch_z0(model_, query.x0, count, rng, gp,
                                        horizon_, d_x_, d_u_);
    out.assign(count, FlatTraj{});
    for (int j = 0; j < count; ++j) {
        FlatTraj& flat = out[j];
        flat.frame = Frame::Relative;
        flat.horizon = horizon_;
        flat.d_x = d_x_;
        flat.d_u = d_u_;
        flat.vec = denormalize_out(model_.norm, z0.col(j));
    }
}

Checkpoint make_ddpm_checkpoint(const DdpmTrainResult& result,
                                const DatasetMeta& meta,
                                const DdpmConfig& cfg) {
    Checkpoint ck;
    ck.kind = "ddpm";
    ck.d_x = meta.d_x;
    ck.d_u = meta.d_u;
    ck.horizon = meta.horizon;
    ck.d_eps = 0;
    ck.cond_dim = result.model.cond_dim;
    ck.out_dim = result.model.out_dim;
    ck.net = result.model.denoiser;
    ck.norm = result.model.norm;
    ck.adam = result.adam;
    ck.seed = cfg.seed;
    ck.epochs_trained = result.epochs_trained;
    ck.cost_scale = 1.0;
    ck.extra = {{"steps", cfg.steps},
                {"beta_min", cfg.beta_min},
                {"beta_max", cfg.beta_max},
                {"time_embed_dim", cfg.time_embed_dim},
                {"epochs", cfg.epochs},
                {"batch", cfg.batch},
                {"lr", cfg.lr},
                {"hidden", cfg.hidden}};
    return ck;
}

DdpmTrainResult ddpm_from_checkpoint(const Checkpoint& ck) {
    require(ck.kind == "ddpm", "ddpm_from_checkpoint: kind mismatch");
    DdpmTrainResult result;
    DdpmModel& model = result.model;
    model.denoiser = ck.net;
    model.cond_dim = ck.cond_dim;
    model.out_dim = ck.out_dim;
    model.steps = ck.extra.at("steps").get<int>();
    model.time_embed_dim = ck.extra.at("time_embed_dim").get<int>();
    model.betas = noise_schedule_betas(model.steps,
                                       ck.extra.at("beta_min").get<double>(),
                                       ck.extra.at("beta_max").get<double>());
    model.alpha_bars.resize(model.steps + 1);
    model.alpha_bars[0] = 1.0;
    for (int t = 1; t <= model.steps; ++t)
        model.alpha_bars[t] = model.alpha_bars[t - 1] * (1.0 - model.betas[t - 1]);
    model.norm = ck.norm;
    result.adam = ck.adam;
    result.epochs_trained = ck.epochs_trained;
    return result;
}

}  // namespace dmpc
