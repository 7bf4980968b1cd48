#include <cmath>

#include "dmpc/drift.hpp"
#include "dmpc/rng.hpp"
#include "doctest.h"

using namespace dmpc;

namespace {

Trajectory random_traj(int horizon, int d_x, int d_u, Rng& rng) {
    Trajectory tau;
    tau.states = rng.gaussian_mat(d_x, horizon + 1).transpose();
    tau.controls = rng.gaussian_mat(d_u, horizon).transpose();
    return tau;
}

DriftBatch random_batch(int k, int m, int dim, double beta, Rng& rng,
                        double cost_hi = 3.0) {
    DriftBatch batch;
    batch.positives.resize(k);
    batch.positive_costs.resize(k);
    for (int i = 0; i < k; ++i) {
        batch.positives[i] = rng.gaussian_vec(dim);
        batch.positive_costs[i] = rng.uniform(0.0, cost_hi);
    }
    batch.negatives.resize(m);
    for (int j = 0; j < m; ++j) batch.negatives[j] = rng.gaussian_vec(dim);
    batch.beta = beta;
    batch.temperature = rng.uniform(0.5, 4.0);
    return batch;
}

// Field under the explicitly normalized tilted categorical, computed
// without shifts through Z = sum e^{-beta J}: the independent oracle.
Vec explicit_tilt_field(const DriftBatch& batch, const Vec& tau) {
    const int k = static_cast<int>(batch.positives.size());
    Vec p(k);
    for (int i = 0; i < k; ++i)
        p[i] = std::exp(-batch.beta * batch.positive_costs[i]);
    p /= p.sum();
    double denom = 0.0;
    Vec num = Vec::Zero(tau.size());
    for (int i = 0; i < k; ++i) {
        const double kv = kernel(tau, batch.positives[i], batch.temperature);
        denom += p[i] * kv;
        num += p[i] * kv * (batch.positives[i] - tau);
    }
    return num / denom;
}

// Brute-force negative field with explicit index exclusion.
Vec negative_field_bruteforce(const DriftBatch& batch, const Vec& tau,
                              int self) {
    double denom = 0.0;
    Vec num = Vec::Zero(tau.size());
    for (int j = 0; j < static_cast<int>(batch.negatives.size()); ++j) {
        if (j == self) continue;
        const double kv = kernel(tau, batch.negatives[j], batch.temperature);
        denom += kv;
        num += kv * (batch.negatives[j] - tau);
    }
    return num / denom;
}

}  // namespace

TEST_CASE("to_relative: zero start is an identity reindexing") {
    Rng rng(1);
    Trajectory tau = random_traj(3, 2, 1, rng);
    tau.states.row(0).setZero();
    const FlatTraj flat = to_relative(tau);
    CHECK(flat.frame == Frame::Relative);
    const FlatTraj abs_flat = flatten(tau);
    CHECK((flat.vec - abs_flat.vec).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("to_relative: constant trajectory flattens to zero") {
    Trajectory tau;
    tau.states = Mat::Ones(4, 2) * 1.7;
    tau.controls = Mat::Zero(3, 1);
    CHECK(to_relative(tau).vec.isZero(0.0));
}

TEST_CASE("to_absolute round-trips") {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const Trajectory tau = random_traj(1 + rng.uniform_int(6), 2, 1, rng);
        const Trajectory back =
            to_absolute(to_relative(tau), tau.states.row(0).transpose());
        // Controls and the initial state reproduce bit-exactly; later states
        // are (x_t - x_0) + x_0, which IEEE rounds within one ulp.
        CHECK((back.controls - tau.controls).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.states.row(0) - tau.states.row(0)).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((back.states - tau.states).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("to_absolute: zero relative vector gives a constant trajectory") {
    FlatTraj flat;
    flat.frame = Frame::Relative;
    flat.horizon = 3;
    flat.d_x = 2;
    flat.d_u = 1;
    flat.vec = Vec::Zero(flat.dim());
    Vec x0(2);
    x0 << 0.5, -1.0;
    const Trajectory tau = to_absolute(flat, x0);
    for (int t = 0; t <= 3; ++t)
        CHECK((tau.states.row(t).transpose() - x0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tau.controls.isZero(0.0));
}

TEST_CASE("to_absolute rejects absolute-frame input") {
    Rng rng(3);
    const Trajectory tau = random_traj(2, 2, 1, rng);
    CHECK_THROWS_AS(to_absolute(flatten(tau), Vec::Zero(2)), ConfigError);
}

TEST_CASE("kernel basics") {
    Rng rng(4);
    const Vec a = rng.gaussian_vec(5);
    CHECK(kernel(a, a, 2.0) == 1.0);

    Vec b = a;
    b[0] += std::sqrt(2.0);  // squared distance 2 == T
    CHECK(kernel(a, b, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    for (int rep = 0; rep < 100; ++rep) {
        const Vec u = rng.gaussian_vec(4);
        const Vec v = rng.gaussian_vec(4);
        CHECK(kernel(u, v, 1.3) == kernel(v, u, 1.3));
    }
    CHECK_THROWS_AS(kernel(a, a, 0.0), ConfigError);
}

TEST_CASE("kernel scale covariance with a power-of-two factor") {
    Rng rng(5);
    const double s = 4.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Vec u = rng.gaussian_vec(6);
        const Vec v = rng.gaussian_vec(6);
        const double t = rng.uniform(0.5, 3.0);
        CHECK(kernel(u, v, t) == kernel(2.0 * u, 2.0 * v, s * t));
    }
}

TEST_CASE("tilted weights: beta 0 reduces to kernel-only weights") {
    Rng rng(6);
    DriftBatch batch = random_batch(8, 2, 4, 0.0, rng);
    const Vec tau = rng.gaussian_vec(4);
    const Vec w = tilted_positive_weights(batch, tau);

    Vec kernel_only(8);
    for (int i = 0; i < 8; ++i)
        kernel_only[i] = kernel(tau, batch.positives[i], batch.temperature);
    kernel_only /= kernel_only.sum();
    CHECK((w - kernel_only).cwiseAbs().maxCoeff() <= 1e-14);

    // Equal costs behave exactly like beta = 0.
    DriftBatch equal = batch;
    equal.beta = 2.5;
    equal.positive_costs.setConstant(7.0);
    const Vec w_equal = tilted_positive_weights(equal, tau);
    CHECK((w_equal - w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tilted weights: large beta concentrates on the min cost") {
    Rng rng(7);
    DriftBatch batch;
    batch.positives.resize(4);
    batch.positive_costs.resize(4);
    const Vec tau = rng.gaussian_vec(3);
    for (int i = 0; i < 4; ++i) {
        batch.positives[i] = tau;  // equal kernels
        batch.positive_costs[i] = 1.0 + i;
    }
    batch.negatives = {tau, tau};
    batch.beta = 1e3;
    batch.temperature = 1.0;
    const Vec w = tilted_positive_weights(batch, tau);
    CHECK(w[0] >= 1.0 - 1e-6);
}

TEST_CASE("tilted weights: exact shift invariance") {
    Rng rng(8);
    DriftBatch batch = random_batch(6, 2, 4, 1.5, rng);
    // Dyadic costs and shift keep the additions exact in f64.
    for (int i = 0; i < 6; ++i)
        batch.positive_costs[i] = 0.25 * (1 + rng.uniform_int(64));
    const Vec tau = rng.gaussian_vec(4);
    const Vec w = tilted_positive_weights(batch, tau);
    DriftBatch shifted = batch;
    shifted.positive_costs.array() += 128.0;
    CHECK((tilted_positive_weights(shifted, tau) - w).cwiseAbs().maxCoeff()
          == 0.0);

    // Arbitrary shifts agree to rounding.
    shifted.positive_costs = batch.positive_costs.array() + 17.3;
    CHECK((tilted_positive_weights(shifted, tau) - w).cwiseAbs().maxCoeff()
          <= 1e-12);
}

TEST_CASE("tilted weights are a simplex") {
    Rng rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        DriftBatch batch = random_batch(5, 2, 3, rng.uniform(0, 5), rng);
        const Vec w = tilted_positive_weights(batch, rng.gaussian_vec(3));
        CHECK(w.minCoeff() >= 0.0);
        CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("positive field: single positive and symmetric pair") {
    DriftBatch batch;
    Vec atom(2);
    atom << 1.0, -2.0;
    batch.positives = {atom};
    batch.positive_costs = Vec::Zero(1);
    batch.negatives = {Vec::Zero(2), Vec::Zero(2)};
    batch.temperature = 1.0;
    CHECK(positive_field(batch, atom).isZero(0.0));

    Vec d(2);
    d << 0.3, 0.4;
    const Vec tau = Vec::Ones(2);
    batch.positives = {tau + d, tau - d};
    batch.positive_costs = Vec::Zero(2);
    CHECK(positive_field(batch, tau).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("tilted-field identity: weighted field equals explicit tilt") {
    Rng rng(10);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        DriftBatch batch = random_batch(8, 2, 5, 0.0, rng);
        for (double beta : {0.0, 0.1, 1.0, 10.0}) {
            batch.beta = beta;
            const Vec tau = rng.gaussian_vec(5);
            const Vec got = positive_field(batch, tau);
            const Vec want = explicit_tilt_field(batch, tau);
            worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("negative field: m=2 gives the other atom's pull") {
    DriftBatch batch;
    batch.positives = {Vec::Zero(2)};
    batch.positive_costs = Vec::Zero(1);
    Vec a(2), b(2);
    a << 1.0, 0.0;
    b << 0.0, 2.0;
    batch.negatives = {a, b};
    batch.temperature = 1.7;
    CHECK((negative_field(batch, a, 0) - (b - a)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((negative_field(batch, b, 1) - (a - b)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("negative field: all others identical to tau gives zero") {
    DriftBatch batch;
    batch.positives = {Vec::Zero(3)};
    batch.positive_costs = Vec::Zero(1);
    const Vec tau = Vec::Ones(3);
    batch.negatives = {tau, tau, tau};
    batch.temperature = 1.0;
    CHECK(negative_field(batch, tau, 0).isZero(0.0));
}

TEST_CASE("negative field matches the brute-force reimplementation") {
    Rng rng(11);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        DriftBatch batch = random_batch(3, 6, 4, 0.0, rng);
        const int self = rng.uniform_int(6);
        const Vec tau = batch.negatives[self];
        const Vec got = negative_field(batch, tau, self);
        const Vec want = negative_field_bruteforce(batch, tau, self);
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("negative field needs at least two atoms") {
    DriftBatch batch;
    batch.positives = {Vec::Zero(2)};
    batch.positive_costs = Vec::Zero(1);
    batch.negatives = {Vec::Zero(2)};
    batch.temperature = 1.0;
    CHECK_THROWS_AS(negative_field(batch, batch.negatives[0], 0), ConfigError);
}

TEST_CASE("drift targets: negatives at the single positive atom are fixed") {
    DriftBatch batch;
    Vec atom(3);
    atom << 0.5, -0.5, 2.0;
    batch.positives = {atom};
    batch.positive_costs = Vec::Zero(1);
    batch.negatives = {atom, atom, atom};
    batch.temperature = 1.0;
    const std::vector<Vec> targets = drift_targets(batch);
    for (int j = 0; j < 3; ++j)
        CHECK((targets[j] - atom).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("drift loss equals the mean squared field norm") {
    Rng rng(12);
    DriftBatch batch = random_batch(6, 5, 4, 0.7, rng);
    const std::vector<Vec> targets = drift_targets(batch);
    for (int j = 0; j < 5; ++j) {
        const Vec field = positive_field(batch, batch.negatives[j]) -
                          negative_field(batch, batch.negatives[j], j);
        const double loss = (batch.negatives[j] - targets[j]).squaredNorm();
        CHECK(loss == doctest::Approx(field.squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("drift targets: 1-d sanity points toward the positive") {
    DriftBatch batch;
    batch.positives = {Vec::Constant(1, 1.0)};
    batch.positive_costs = Vec::Zero(1);
    batch.negatives = {Vec::Constant(1, -1.0), Vec::Constant(1, -1.0 + 1e-6)};
    batch.beta = 0.0;
    batch.temperature = 1.0;
    const std::vector<Vec> targets = drift_targets(batch);
    // V+ = (1 - (-1)) = 2 exactly (single positive); V- = tiny positive.
    const double drift0 = targets[0][0] - batch.negatives[0][0];
    CHECK(drift0 > 0.0);
    CHECK(drift0 == doctest::Approx(2.0 - 1e-6).epsilon(1e-9));
    const double drift1 = targets[1][0] - batch.negatives[1][0];
    CHECK(drift1 > 0.0);
    CHECK(drift1 ==
          doctest::Approx((1.0 - (-1.0 + 1e-6)) - (-1e-6)).epsilon(1e-9));
}

TEST_CASE("free energy basics and tilted-law optimality") {
    Rng rng(13);

    SUBCASE("p equals p0") {
        Vec p0(3);
        p0 << 0.2, 0.3, 0.5;
        Vec costs(3);
        costs << 1.0, 2.0, 3.0;
        CHECK(free_energy(p0, costs, p0, 2.0) ==
              doctest::Approx(p0.dot(costs)).epsilon(1e-15));
    }

    SUBCASE("huge beta concentrates on the argmin atom") {
        const int n = 5;
        Vec p0 = Vec::Constant(n, 1.0 / n);
        Vec costs(n);
        costs << 3.0, 1.0, 4.0, 1.5, 2.0;
        const double beta = 1e6;
        Vec p(n);
        for (int i = 0; i < n; ++i)
            p[i] = std::exp(-beta * (costs[i] - costs.minCoeff())) * p0[i];
        p /= p.sum();
        CHECK(p[1] >= 1.0 - 1e-6);
    }

    SUBCASE("closed-form tilt minimizes over random feasible laws") {
        for (int instance = 0; instance < 20; ++instance) {
            const int n = 10;
            Vec p0(n), costs(n);
            for (int i = 0; i < n; ++i) {
                p0[i] = rng.uniform(0.05, 1.0);
                costs[i] = rng.uniform(0.0, 4.0);
            }
            p0 /= p0.sum();
            const double beta = rng.uniform(0.2, 3.0);
            Vec p_beta(n);
            for (int i = 0; i < n; ++i)
                p_beta[i] = std::exp(-beta * costs[i]) * p0[i];
            p_beta /= p_beta.sum();
            const double f_star = free_energy(p_beta, costs, p0, beta);
            for (int rep = 0; rep < 1000; ++rep) {
                Vec p(n);
                for (int i = 0; i < n; ++i) p[i] = rng.uniform(1e-6, 1.0);
                p /= p.sum();
                CHECK(free_energy(p, costs, p0, beta) - f_star >= -1e-10);
            }
        }
    }

    SUBCASE("support violation throws") {
        Vec p(2), p0(2), costs(2);
        p << 0.5, 0.5;
        p0 << 1.0, 0.0;
        costs << 1.0, 2.0;
        CHECK_THROWS_AS(free_energy(p, costs, p0, 1.0), ConfigError);
    }
}

TEST_CASE("equilibrium: resampled positives give statistically flat drift") {
    Rng rng(14);
    // Positive atoms; negatives are i.i.d. resamples of those atoms.
    const int dim = 3, k = 12, m = 8, resamples = 1000;
    DriftBatch base;
    base.positives.resize(k);
    base.positive_costs = Vec::Zero(k);
    for (int i = 0; i < k; ++i) base.positives[i] = rng.gaussian_vec(dim);
    base.temperature = median_pairwise_sq_dist(base.positives);
    base.beta = 0.0;

    auto drift_samples = [&](Rng& local) {
        std::vector<double> out(resamples);
        for (int rep = 0; rep < resamples; ++rep) {
            DriftBatch batch = base;
            batch.negatives.resize(m);
            for (int j = 0; j < m; ++j)
                batch.negatives[j] = base.positives[local.uniform_int(k)];
            const std::vector<Vec> targets = drift_targets(batch);
            double norm_sum = 0.0;
            for (int j = 0; j < m; ++j)
                norm_sum += (targets[j] - batch.negatives[j]).norm();
            out[rep] = norm_sum / m;
        }
        return out;
    };

    Rng rng_a = Rng::derive(14, {1});
    Rng rng_b = Rng::derive(14, {2});
    const std::vector<double> sample_a = drift_samples(rng_a);
    const std::vector<double> sample_b = drift_samples(rng_b);

    double mean_a = 0.0, mean_b = 0.0;
    for (double v : sample_a) mean_a += v;
    for (double v : sample_b) mean_b += v;
    mean_a /= resamples;
    mean_b /= resamples;
    double var_a = 0.0, var_b = 0.0;
    for (double v : sample_a) var_a += (v - mean_a) * (v - mean_a);
    for (double v : sample_b) var_b += (v - mean_b) * (v - mean_b);
    var_a /= (resamples - 1);
    var_b /= (resamples - 1);
    const double z = std::abs(mean_a - mean_b) /
                     std::sqrt(var_a / resamples + var_b / resamples);
    CHECK(z <= 1.96);  // two-sample test at the 5% level, seeded
}

TEST_CASE("median pairwise squared distance floors at 1e-8") {
    std::vector<Vec> same(3, Vec::Zero(2));
    CHECK(median_pairwise_sq_dist(same) == 1e-8);
    std::vector<Vec> one(1, Vec::Zero(2));
    CHECK(median_pairwise_sq_dist(one) == 1e-8);
}
