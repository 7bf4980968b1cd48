#include "dmpc/selfcheck.hpp"

#include <cmath>
#include <vector>

#include "dmpc/baselines.hpp"
#include "dmpc/checkpoint.hpp"
#include "dmpc/drift.hpp"
#include "dmpc/dynamics.hpp"
#include "dmpc/neuralcore.hpp"
#include "dmpc/oracle.hpp"

namespace dmpc {

namespace {

void report(std::ostream& os, const std::string& name, bool ok, double value,
            bool& all_ok) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << " (max err " << value
       << ")\n";
    all_ok = all_ok && ok;
}

// Field under the explicitly tilted categorical p_beta, computed the naive
// way (global normalization, no shifts): the independent reference route.
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

double tilting_identity_error(int batches, uint64_t seed) {
    double worst = 0.0;
    for (int rep = 0; rep < batches; ++rep) {
        Rng rng = Rng::derive(seed, {0x7117, static_cast<uint64_t>(rep)});
        const int dim = 6;
        DriftBatch batch;
        const int k = 8;
        batch.positives.resize(k);
        batch.positive_costs.resize(k);
        for (int i = 0; i < k; ++i) {
            batch.positives[i] = rng.gaussian_vec(dim);
            batch.positive_costs[i] = rng.uniform(0.0, 3.0);
        }
        batch.negatives = {rng.gaussian_vec(dim), rng.gaussian_vec(dim)};
        batch.temperature = rng.uniform(0.5, 4.0);
        for (double beta : {0.0, 0.1, 1.0, 10.0}) {
            batch.beta = beta;
            const Vec tau = rng.gaussian_vec(dim);
            const Vec got = positive_field(batch, tau);
            const Vec want = explicit_tilt_field(batch, tau);
            worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

double gradient_check_error(int nets, uint64_t seed) {
    double worst = 0.0;
    for (int rep = 0; rep < nets; ++rep) {
        Rng rng = Rng::derive(seed, {0x9C, static_cast<uint64_t>(rep)});
        GeneratorModel model;
        model.d_eps = 3;
        model.cond_dim = 2;
        model.out_dim = 4;
        model.net = Mlp::create({5, 8, 4}, Activation::Silu, rng);
        model.norm = NormalizationStats::identity(2, 4);
        const Mat eps = rng.gaussian_mat(3, 2);
        const Mat cond = rng.gaussian_mat(2, 2);
        const Mat targets = rng.gaussian_mat(4, 2);
        auto [loss, grad] = backward_mse_to_constant(model, eps, cond, targets,
                                                     TargetSpace::Physical);
        (void)loss;
        const double h = 1e-6;
        for (int p = 0; p < model.net.param_count(); p += 7) {
            Mlp& net = model.net;
            const double orig = net.theta[p];
            net.theta[p] = orig + h;
            const double up =
                backward_mse_to_constant(model, eps, cond, targets,
                                         TargetSpace::Physical)
                    .first;
            net.theta[p] = orig - h;
            const double down =
                backward_mse_to_constant(model, eps, cond, targets,
                                         TargetSpace::Physical)
                    .first;
            net.theta[p] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({1.0, std::abs(fd), std::abs(grad[p])});
            worst = std::max(worst, std::abs(fd - grad[p]) / scale);
        }
    }
    return worst;
}

double riccati_error(int cases, uint64_t seed) {
    const DiscreteLinearSystem sys = discretize_zoh(MsdParams{});
    double worst = 0.0;
    for (int rep = 0; rep < cases; ++rep) {
        Rng rng = Rng::derive(seed, {0x41CC, static_cast<uint64_t>(rep)});
        CostParams omega;
        omega.q = Vec(2);
        omega.q << rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0);
        omega.r = Vec(1);
        omega.r << rng.uniform(0.05, 1.0);
        const int horizon = 20;
        const RiccatiSolution sol = solve_riccati(sys, omega, horizon);
        Vec x0(2);
        x0 << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
        const Trajectory tau =
            rollout(sys, x0, oracle_controller(sol), horizon, rng);
        const double predicted = x0.dot(sol.value_mats[0] * x0);
        worst = std::max(worst, std::abs(cost(tau, omega) - predicted));
    }
    return worst;
}

// Direct order-40 Taylor sum of the augmented exponential; independent of
// the scaled-and-squared production path.
double zoh_error() {
    const MsdParams params;
    Mat aug = Mat::Zero(3, 3);
    aug.topLeftCorner(2, 2) = msd_continuous_a(params);
    aug.topRightCorner(2, 1) = msd_continuous_b(params);
    aug *= params.dt;
    Mat ref = Mat::Identity(3, 3);
    Mat term = Mat::Identity(3, 3);
    for (int k = 1; k <= 40; ++k) {
        term = (term * aug) / static_cast<double>(k);
        ref += term;
    }
    const DiscreteLinearSystem sys = discretize_zoh(params);
    double err = (sys.a_d - ref.topLeftCorner(2, 2)).cwiseAbs().maxCoeff();
    err = std::max(err,
                   (sys.b_d - ref.topRightCorner(2, 1)).cwiseAbs().maxCoeff());
    return err;
}

}  // namespace

bool run_selfcheck(std::ostream& os) {
    bool all_ok = true;
    const uint64_t seed = 2024;

    const double tilt = tilting_identity_error(20, seed);
    report(os, "tilting identity (explicit-tilt oracle)", tilt <= 1e-12, tilt,
           all_ok);

    const double grad = gradient_check_error(3, seed);
    report(os, "reverse-mode gradient vs finite differences", grad <= 1e-4,
           grad, all_ok);

    const double ricc = riccati_error(5, seed);
    report(os, "riccati closed-loop self-consistency", ricc <= 1e-8, ricc,
           all_ok);

    const double zoh = zoh_error();
    report(os, "zoh vs order-40 taylor", zoh <= 1e-12, zoh, all_ok);

    return all_ok;
}

bool check_checkpoint(const std::string& path, std::ostream& os) {
    try {
        const Checkpoint ck = load_checkpoint(path);
        if (ck.kind == "ddpm") {
            const DdpmTrainResult r = ddpm_from_checkpoint(ck);
            validate_schedule(r.model);
        } else {
            (void)generator_from_checkpoint(ck);
        }
        os << "[PASS] checkpoint " << path << " (" << ck.kind << ", H="
           << ck.horizon << ", params=" << ck.net.param_count() << ")\n";
        return true;
    } catch (const std::exception& e) {
        os << "[FAIL] checkpoint " << path << ": " << e.what() << "\n";
        return false;
    }
}

}  // namespace dmpc
