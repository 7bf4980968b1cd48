#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmpc/oracle.hpp"

namespace dmpc {

// Behavior-controller mixture settings. The LQR member optimizes lqr_omega
// on the true system; PD acts on (position, velocity); the smooth random
// controller is a stationary AR(1) per control coordinate.
struct ControllerMixConfig {
    CostParams lqr_omega;  // cost the behavior LQR optimizes
    double lqr_sigma = 0.1;
    double pd_kp = 2.0;
    double pd_kd = 1.0;
    double pd_sigma = 0.1;
    double random_rho = 0.9;
    double random_sigma = 1.0;
};

enum ControllerTag : uint8_t { kTagLqr = 0, kTagPd = 1, kTagRandom = 2 };

struct DatasetMeta {
    int d_x = 0;
    int d_u = 0;
    int horizon = 0;
    int n = 0;
    uint64_t seed = 0;
    std::array<double, 3> mixture{0.10, 0.10, 0.80};
};

struct OfflineDataset {
    std::vector<Trajectory> trajectories;
    Mat initial_states;  // n x d_x, row i == trajectories[i].states.row(0)
    std::vector<uint8_t> controller_tags;
    DatasetMeta meta;

    int size() const { return static_cast<int>(trajectories.size()); }
};

// K-nearest-neighbor local empirical prior over dataset trajectories.
struct LocalPrior {
    std::vector<int> indices;  // distinct dataset indices
    Vec weights;               // simplex
    Vec query_state;
};

Controller noisy_pd_controller(double kp, double kd, double sigma);
Controller smooth_random_controller(int d_u, double rho, double sigma);

// Collects n trajectories: x0 ~ Unif(init_box), controller class assigned
// by quota from the mixture (first lqr, then pd, then random), per-index
// rng streams derived from (seed, index) so results are thread-count
// independent and bit-reproducible.
OfflineDataset collect(const DiscreteLinearSystem& sys,
                       const ControllerMixConfig& mix, int n, int horizon,
                       const InitBox& init_box,
                       const std::array<double, 3>& mixture, uint64_t seed);

// Gaussian-kernel KNN prior; bandwidth defaults to the median of the K
// squared distances (floored at 1e-8). An infinite bandwidth override gives
// uniform weights over the K retrieved indices.
LocalPrior knn_prior(const OfflineDataset& ds, const Vec& x0, int k,
                     std::optional<double> bandwidth = std::nullopt);

// i.i.d. categorical draws from the prior; returns (dataset index) per draw.
std::vector<int> sample_positives(const LocalPrior& prior, int count,
                                  Rng& rng);

// Cost of the stored trajectory under a query omega (its own x_i, not the
// query state).
double relabel_cost(const Trajectory& tau, const CostParams& omega);

// Binary format: magic "DMPCDS01", u32 d_x/d_u/H/N (little-endian), then N
// records of (u8 tag, (H+1)*d_x f64 states row-major, H*d_u f64 controls
// row-major). A sidecar JSON manifest <path>.manifest.json stores seed and
// mixture/controller settings.
void save_dataset(const OfflineDataset& ds, const std::string& path,
                  const ControllerMixConfig& mix);
OfflineDataset load_dataset(const std::string& path);

}  // namespace dmpc
