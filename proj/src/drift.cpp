#include "dmpc/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmpc {

namespace {

FlatTraj flatten_impl(const Trajectory& tau, bool subtract_x0) {
    const int H = tau.horizon();
    const int d_x = tau.state_dim();
    const int d_u = tau.control_dim();
    FlatTraj flat;
    flat.horizon = H;
    flat.d_x = d_x;
    flat.d_u = d_u;
    flat.frame = subtract_x0 ? Frame::Relative : Frame::Absolute;
    flat.vec.resize(flat_dim(H, d_x, d_u));
    const Vec x0 = tau.states.row(0).transpose();
    for (int t = 0; t <= H; ++t) {
        Vec x = tau.states.row(t).transpose();
        if (subtract_x0) x -= x0;
        flat.vec.segment(flat_x_offset(t, d_x, d_u), d_x) = x;
    }
    for (int t = 0; t < H; ++t)
        flat.vec.segment(flat_u_offset(t, d_x, d_u), d_u) =
            tau.controls.row(t).transpose();
    return flat;
}

}  // namespace

FlatTraj flatten(const Trajectory& tau) { return flatten_impl(tau, false); }

FlatTraj to_relative(const Trajectory& tau) { return flatten_impl(tau, true); }

Trajectory to_absolute(const FlatTraj& flat, const Vec& x0) {
    require(flat.frame == Frame::Relative,
            "to_absolute: expected a relative-frame trajectory");
    require(x0.size() == flat.d_x, "to_absolute: x0 dim mismatch");
    require(flat.vec.size() == flat.dim(), "to_absolute: bad vector length");
    Trajectory tau;
    tau.states.resize(flat.horizon + 1, flat.d_x);
    tau.controls.resize(flat.horizon, flat.d_u);
    for (int t = 0; t <= flat.horizon; ++t) {
        // The x0 block is nominally zero for dataset positives; generator
        // outputs may deviate, and the deviation rides along.
        tau.states.row(t) =
            (flat.vec.segment(flat_x_offset(t, flat.d_x, flat.d_u), flat.d_x) +
             x0)
                .transpose();
    }
    for (int t = 0; t < flat.horizon; ++t)
        tau.controls.row(t) =
            flat.vec.segment(flat_u_offset(t, flat.d_x, flat.d_u), flat.d_u)
                .transpose();
    return tau;
}

double kernel(const Vec& a, const Vec& b, double temperature) {
    require(a.size() == b.size(), "kernel: size mismatch");
    if (!(temperature > 0.0)) throw ConfigError("kernel: temperature must be > 0");
    return std::exp(-(a - b).squaredNorm() / temperature);
}

double kernel(const FlatTraj& a, const FlatTraj& b, double temperature) {
    require(a.frame == b.frame, "kernel: frame mismatch");
    return kernel(a.vec, b.vec, temperature);
}

void validate(const DriftBatch& batch) {
    require(!batch.positives.empty(), "drift batch: need K+ >= 1 positives");
    require(batch.negatives.size() >= 2, "drift batch: need M >= 2 negatives");
    require(batch.positive_costs.size() ==
                static_cast<Eigen::Index>(batch.positives.size()),
            "drift batch: costs/positives length mismatch");
    require(batch.temperature > 0.0, "drift batch: temperature must be > 0");
    require(batch.beta >= 0.0, "drift batch: beta must be >= 0");
}

Vec tilted_positive_weights(const DriftBatch& batch, const Vec& tau) {
    const int k = static_cast<int>(batch.positives.size());
    require(k >= 1, "tilted_positive_weights: empty positive batch");
    const double min_cost = batch.positive_costs.minCoeff();

    // log w_i = -beta (J_i - min J) - ||tau - tau_i||^2 / T, max-shifted
    // before exponentiation; normalized weights are shift-invariant.
    Vec logw(k);
    for (int i = 0; i < k; ++i) {
        const double d2 = (tau - batch.positives[i]).squaredNorm();
        logw[i] = -batch.beta * (batch.positive_costs[i] - min_cost) -
                  d2 / batch.temperature;
    }
    const double shift = logw.maxCoeff();
    Vec w = (logw.array() - shift).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericError("tilted_positive_weights: degenerate batch");
    return w / total;
}

Vec positive_field(const DriftBatch& batch, const Vec& tau) {
    const Vec w = tilted_positive_weights(batch, tau);
    Vec field = Vec::Zero(tau.size());
    for (size_t i = 0; i < batch.positives.size(); ++i)
        field += w[static_cast<int>(i)] * (batch.positives[i] - tau);
    return field;
}

Vec negative_field(const DriftBatch& batch, const Vec& tau, int self_index) {
    const int m = static_cast<int>(batch.negatives.size());
    require(m >= 2, "negative_field: need M >= 2 negatives");
    require(self_index >= 0 && self_index < m,
            "negative_field: self index out of range");

    Vec logk(m);
    double shift = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
        if (j == self_index) continue;
        logk[j] = -(tau - batch.negatives[j]).squaredNorm() / batch.temperature;
        shift = std::max(shift, logk[j]);
    }
    double total = 0.0;
    Vec field = Vec::Zero(tau.size());
    for (int j = 0; j < m; ++j) {
        if (j == self_index) continue;
        const double kj = std::exp(logk[j] - shift);
        total += kj;
        field += kj * (batch.negatives[j] - tau);
    }
    if (!(total > 0.0)) throw NumericError("negative_field: degenerate batch");
    return field / total;
}

std::vector<Vec> drift_targets(const DriftBatch& batch) {
    validate(batch);
    const int m = static_cast<int>(batch.negatives.size());
    std::vector<Vec> targets(m);
    for (int j = 0; j < m; ++j) {
        const Vec& tau = batch.negatives[j];
        targets[j] =
            tau + positive_field(batch, tau) - negative_field(batch, tau, j);
    }
    return targets;
}

double free_energy(const Vec& p, const Vec& costs, const Vec& p0,
                   double beta) {
    require(p.size() == costs.size() && p.size() == p0.size(),
            "free_energy: size mismatch");
    require(beta > 0.0, "free_energy: beta must be > 0");
    double expected = 0.0;
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (p0[i] == 0.0)
            throw ConfigError("free_energy: p not absolutely continuous wrt p0");
        expected += p[i] * costs[i];
        kl += p[i] * std::log(p[i] / p0[i]);
    }
    return expected + kl / beta;
}

double median_pairwise_sq_dist(const std::vector<Vec>& xs) {
    std::vector<double> d2;
    const int n = static_cast<int>(xs.size());
    d2.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            d2.push_back((xs[i] - xs[j]).squaredNorm());
    if (d2.empty()) return 1e-8;
    std::sort(d2.begin(), d2.end());
    const size_t k = d2.size();
    const double med =
        (k % 2 == 1) ? d2[k / 2] : 0.5 * (d2[k / 2 - 1] + d2[k / 2]);
    return std::max(med, 1e-8);
}

}  // namespace dmpc
