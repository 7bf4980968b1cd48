#pragma once

#include <vector>

#include "dmpc/cost.hpp"

namespace dmpc {

enum class Frame { Absolute, Relative };

// Trajectory flattened as [x_0 | u_0 | ... | u_{H-1} | x_H]. Relative frame
// means every state block had the initial state subtracted.
struct FlatTraj {
    Vec vec;
    Frame frame = Frame::Absolute;
    int horizon = 0;
    int d_x = 0;
    int d_u = 0;

    int dim() const { return flat_dim(horizon, d_x, d_u); }
};

FlatTraj flatten(const Trajectory& tau);
FlatTraj to_relative(const Trajectory& tau);
Trajectory to_absolute(const FlatTraj& flat, const Vec& x0);

// Gaussian similarity kernel exp(-||a-b||^2 / T).
double kernel(const Vec& a, const Vec& b, double temperature);
double kernel(const FlatTraj& a, const FlatTraj& b, double temperature);

// Positive batch (retrieved trajectories + relabeled costs), negative batch
// (generator samples), tilting beta and kernel temperature. All vectors
// share one frame and, inside the trainer, one whitening.
struct DriftBatch {
    std::vector<Vec> positives;
    Vec positive_costs;
    std::vector<Vec> negatives;
    Query query;
    double beta = 0.0;
    double temperature = 1.0;
};

void validate(const DriftBatch& batch);

// w_i proportional to exp(-beta (J_i - min_j J_j)) k(tau, tau_i^+),
// normalized to the simplex; computed with an exact max-shift in log space.
Vec tilted_positive_weights(const DriftBatch& batch, const Vec& tau);

// sum_i w_i (tau_i^+ - tau).
Vec positive_field(const DriftBatch& batch, const Vec& tau);

// Kernel mean shift over the negatives excluding self_index.
Vec negative_field(const DriftBatch& batch, const Vec& tau, int self_index);

// Stop-gradient targets: negatives[j] + V+(negatives[j]) - V-(negatives[j]).
std::vector<Vec> drift_targets(const DriftBatch& batch);

// E_p[J] + (1/beta) KL(p || p0) with 0 log 0 = 0; requires p << p0.
double free_energy(const Vec& p, const Vec& costs, const Vec& p0, double beta);

// Median of pairwise squared distances, floored at 1e-8; the per-batch
// temperature heuristic.
double median_pairwise_sq_dist(const std::vector<Vec>& xs);

}  // namespace dmpc
