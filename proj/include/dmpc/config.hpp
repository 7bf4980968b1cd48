#pragma once

#include <string>
#include <vector>

#include "dmpc/baselines.hpp"
#include "dmpc/dataset.hpp"
#include "dmpc/eval.hpp"
#include "dmpc/trainer.hpp"

namespace dmpc {

// Full run configuration. Unknown keys in the file are rejected; every
// command writes its resolved config next to its outputs.
struct RunConfig {
    uint64_t seed = 0;
    std::string output_dir = "out";

    MsdParams dynamics;
    InitBox init_box;  // dynamics.init_lower / init_upper

    CostBox cost_box;
    CostParams eval_omega;  // cost.eval_q / eval_r

    int dataset_n = 2000;
    int dataset_horizon = 30;
    std::array<double, 3> mixture{0.10, 0.10, 0.80};
    ControllerMixConfig controllers;  // lqr omega defaults to eval_omega
    std::string dataset_file = "dataset.bin";

    TrainConfig train;
    DdpmConfig ddpm;

    int m_plan = 16;
    double guidance_scale = 0.01;

    std::vector<int> eval_horizons{30, 50, 100};
    int eval_episodes = 100;
    int bootstrap_resamples = 10000;
    BootstrapMethod bootstrap_method = BootstrapMethod::Bca;
};

RunConfig default_config();

// Strict parse: rejects unknown keys (error names the key) and missing
// required sections are filled from defaults.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

// Applies "section.key=value" overrides (flags win over the file).
void apply_override(nlohmann::json& j, const std::string& assignment);

void write_resolved_config(const RunConfig& cfg, const std::string& path);

}  // namespace dmpc
