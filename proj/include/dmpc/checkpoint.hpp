#pragma once

#include <string>

#include "dmpc/neuralcore.hpp"
#include "json.hpp"

namespace dmpc {

// One-file checkpoint: magic "DMPCCK01", u64 manifest byte length, JSON
// manifest, then f64 blobs in declaration order: theta, adam m, adam v.
struct Checkpoint {
    std::string kind;  // "drifting" | "drifting_prior" | "ddpm"
    int d_x = 0;
    int d_u = 0;
    int horizon = 0;
    int d_eps = 0;
    int cond_dim = 0;
    int out_dim = 0;
    Mlp net;
    NormalizationStats norm;
    AdamState adam;
    uint64_t seed = 0;
    int epochs_trained = 0;
    double cost_scale = 1.0;
    nlohmann::json extra;  // train config echo, ddpm schedule, ...
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dmpc
