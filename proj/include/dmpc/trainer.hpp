#pragma once

#include <functional>

#include "dmpc/checkpoint.hpp"
#include "dmpc/dataset.hpp"
#include "dmpc/drift.hpp"

namespace dmpc {

enum class GeneratorKind { Drifting, DriftingPrior };

std::string kind_name(GeneratorKind kind);

enum class BetaSchedule { Linear, Constant };

struct TrainConfig {
    int epochs = 500;
    int batch_queries = 16;  // B
    int positives = 32;      // K+
    int negatives = 16;      // M
    double lr = 1e-3;
    double beta_min = 0.0;
    double beta_max = 1.0;
    BetaSchedule beta_schedule = BetaSchedule::Linear;
    int knn = 64;
    std::vector<int> hidden{256, 256, 256};
    int noise_dim = 32;
    double temperature = 0.0;  // 0 -> per-batch median heuristic
    uint64_t seed = 0;
    // When set, a non-finite loss aborts after dumping the current model
    // state to this path.
    std::string abort_dump_path;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double drift_norm = 0.0;
    double beta = 0.0;
    double seconds = 0.0;
};
using TrainLog = std::vector<EpochStats>;

// Per-step diagnostics: loss from the backward pass and the mean squared
// drift norm from target construction (equal up to rounding).
struct StepStats {
    int step = 0;
    double loss = 0.0;
    double mean_drift_sq = 0.0;
};

struct TrainResult {
    GeneratorModel model;
    AdamState adam;
    TrainLog log;
    double cost_scale = 1.0;
    int epochs_trained = 0;
};

double beta_at(const TrainConfig& cfg, int epoch);

// Median suboptimality gap J(tau_i; omega) - x_i'P0 x_i over the dataset,
// floored at 1e-8; divides relabeled costs so beta is unit-free.
double beta_cost_scale(const OfflineDataset& ds,
                       const DiscreteLinearSystem& sys,
                       const CostParams& eval_omega);

NormalizationStats compute_normalization(const OfflineDataset& ds,
                                         const CostBox& box,
                                         GeneratorKind kind);

Vec assemble_cond(const Vec& x0, const CostParams& omega, GeneratorKind kind);

// stop_after_epochs (when >= 0) halts once that many total epochs are
// trained while keeping cfg.epochs as the beta-schedule length, so a
// stopped-and-resumed run reproduces a straight-through run bit-exactly.
TrainResult train(const OfflineDataset& ds, const DiscreteLinearSystem& sys,
                  const CostBox& box, const CostParams& eval_omega,
                  const TrainConfig& cfg, GeneratorKind kind,
                  const TrainResult* resume = nullptr,
                  const std::function<void(const StepStats&)>& observer = {},
                  int stop_after_epochs = -1);

Checkpoint make_checkpoint(const TrainResult& result, GeneratorKind kind,
                           const DatasetMeta& meta, const TrainConfig& cfg);
TrainResult resume_state_from_checkpoint(const Checkpoint& ck);
GeneratorModel generator_from_checkpoint(const Checkpoint& ck);

void write_train_log_csv(const TrainLog& log, const std::string& path);

}  // namespace dmpc
