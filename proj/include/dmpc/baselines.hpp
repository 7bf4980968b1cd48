#pragma once

#include "dmpc/dataset.hpp"
#include "dmpc/planner.hpp"
#include "dmpc/trainer.hpp"

namespace dmpc {

struct DdpmConfig {
    int epochs = 500;
    int batch = 16;
    double lr = 1e-3;
    int steps = 64;             // denoising steps S
    double beta_min = 1e-4;
    double beta_max = 0.15;     // keeps alpha_bar_S <= 0.01 at 64 steps
    std::vector<int> hidden{256, 256, 256};
    int time_embed_dim = 8;
    uint64_t seed = 0;
};

void validate(const DdpmConfig& cfg);

// Denoiser eps_hat(z_t, t, x0) over whitened relative trajectories;
// conditioning is x0 only (omega enters through guidance at test time).
struct DdpmModel {
    Mlp denoiser;
    Vec betas;       // S entries, beta_1..beta_S
    Vec alpha_bars;  // S+1 entries, alpha_bar_0 = 1
    int steps = 0;
    int cond_dim = 0;
    int out_dim = 0;
    int time_embed_dim = 8;
    NormalizationStats norm;
};

struct GuidanceConfig {
    double scale = 0.0;  // lambda
    CostParams omega;
    bool fix_initial = true;
};

// Linear beta schedule; validates 0 < beta_t < 1 increasing.
Vec noise_schedule_betas(int steps, double beta_min, double beta_max);
void validate_schedule(const DdpmModel& model);

Vec time_embedding(int t, int steps, int dim);

struct DdpmTrainResult {
    DdpmModel model;
    AdamState adam;
    TrainLog log;
    int epochs_trained = 0;
};

DdpmTrainResult ddpm_train(const OfflineDataset& ds, const CostBox& box,
                           const DdpmConfig& cfg,
                           const DdpmTrainResult* resume = nullptr);

// Ancestral sampling; returns the whitened z_0. With guidance, each step's
// mean is shifted by -lambda * posterior variance * grad_z J evaluated at
// the current denoised estimate.
Vec ddpm_sample_z0(const DdpmModel& model, const Vec& x0, Rng& rng,
                   const GuidanceConfig* guidance = nullptr);
FlatTraj ddpm_sample(const DdpmModel& model, const Vec& x0, int horizon,
                     int d_x, int d_u, Rng& rng,
                     const GuidanceConfig* guidance = nullptr);

class DdpmSampler : public TrajectorySampler {
public:
    DdpmSampler(DdpmModel model, int horizon, int d_x, int d_u,
                double guidance_scale);  // 0 = unguided
    FlatTraj sample(const Query& query, Rng& rng) override;
    void sample_batch(const Query& query, int count, Rng& rng,
                      std::vector<FlatTraj>& out) override;

private:
    DdpmModel model_;
    int horizon_, d_x_, d_u_;
    double guidance_scale_;
};

Checkpoint make_ddpm_checkpoint(const DdpmTrainResult& result,
                                const DatasetMeta& meta,
                                const DdpmConfig& cfg);
DdpmTrainResult ddpm_from_checkpoint(const Checkpoint& ck);

}  // namespace dmpc
