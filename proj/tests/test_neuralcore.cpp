#include <cmath>

#include "dmpc/neuralcore.hpp"
#include "doctest.h"

// Snapshot of generator_forward on the seed-42 model below, recorded at
// first build.
#define GOLDEN_FORWARD_0 -0.043863072538732381
#define GOLDEN_FORWARD_1 0.19258028830459906
#define GOLDEN_FORWARD_2 -0.071312863357664721
#define GOLDEN_FORWARD_3 -0.13461449703718872
#define GOLDEN_FORWARD_4 0.23851046090740446

using namespace dmpc;

namespace {

GeneratorModel small_model(uint64_t seed, std::vector<int> hidden = {8}) {
    Rng rng(seed);
    GeneratorModel model;
    model.d_eps = 3;
    model.cond_dim = 2;
    model.out_dim = 5;
    std::vector<int> dims;
    dims.push_back(model.d_eps + model.cond_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(model.out_dim);
    model.net = Mlp::create(dims, Activation::Silu, rng);
    model.norm = NormalizationStats::identity(model.cond_dim, model.out_dim);
    return model;
}

double fd_loss(GeneratorModel& model, const Mat& eps, const Mat& cond,
               const Mat& targets, TargetSpace space, int param, double h) {
    const double orig = model.net.theta[param];
    model.net.theta[param] = orig + h;
    const double up =
        backward_mse_to_constant(model, eps, cond, targets, space).first;
    model.net.theta[param] = orig - h;
    const double down =
        backward_mse_to_constant(model, eps, cond, targets, space).first;
    model.net.theta[param] = orig;
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("zero final layer outputs out_mean regardless of noise") {
    GeneratorModel model = small_model(1);
    const int last = model.net.layers() - 1;
    model.net.weight(last).setZero();
    model.net.bias(last).setZero();
    model.norm.out_mean = Vec::LinSpaced(5, 1.0, 5.0);
    Rng rng(2);
    for (int rep = 0; rep < 5; ++rep) {
        const Vec out = generator_forward(model, rng.gaussian_vec(3),
                                          rng.gaussian_vec(2));
        CHECK((out - model.norm.out_mean).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("identity single-layer network concatenates eps and cond") {
    GeneratorModel model;
    model.d_eps = 3;
    model.cond_dim = 2;
    model.out_dim = 5;
    Rng rng(3);
    model.net = Mlp::create({5, 5}, Activation::Silu, rng);
    model.net.weight(0).setIdentity();
    model.net.bias(0).setZero();
    model.norm = NormalizationStats::identity(2, 5);
    const Vec eps = rng.gaussian_vec(3);
    const Vec cond = rng.gaussian_vec(2);
    const Vec out = generator_forward(model, eps, cond);
    CHECK((out.head(3) - eps).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.tail(2) - cond).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is deterministic and matches the recorded snapshot") {
    GeneratorModel model = small_model(42, {4});
    Vec eps(3);
    eps << 0.25, -1.0, 0.5;
    Vec cond(2);
    cond << 1.5, -0.25;
    const Vec out = generator_forward(model, eps, cond);
    const Vec out2 = generator_forward(model, eps, cond);
    CHECK((out - out2).cwiseAbs().maxCoeff() == 0.0);

    // Golden values recorded at first build (printed with %.17g).
    Vec want(5);
    want << GOLDEN_FORWARD_0, GOLDEN_FORWARD_1, GOLDEN_FORWARD_2,
        GOLDEN_FORWARD_3, GOLDEN_FORWARD_4;
    CHECK((out - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: targets equal to outputs give zero loss and gradient") {
    GeneratorModel model = small_model(5);
    Rng rng(6);
    const Mat eps = rng.gaussian_mat(3, 4);
    const Mat cond = rng.gaussian_mat(2, 4);
    const Mat targets = generator_forward_batch(model, eps, cond);
    auto [loss, grad] = backward_mse_to_constant(model, eps, cond, targets,
                                                 TargetSpace::Physical);
    CHECK(loss == 0.0);
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: one-parameter linear net has the hand gradient") {
    GeneratorModel model;
    model.d_eps = 1;
    model.cond_dim = 0;
    model.out_dim = 1;
    Rng rng(7);
    model.net = Mlp::create({1, 1}, Activation::Silu, rng);
    const double w = 0.73;
    model.net.weight(0)(0, 0) = w;
    model.net.bias(0)(0) = 0.0;
    model.norm = NormalizationStats::identity(0, 1);
    Mat eps(1, 1);
    eps << 1.0;
    Mat cond(0, 1);
    Mat target = Mat::Zero(1, 1);
    auto [loss, grad] = backward_mse_to_constant(model, eps, cond, target,
                                                 TargetSpace::Physical);
    CHECK(loss == doctest::Approx(w * w).epsilon(1e-15));
    CHECK(grad[0] == doctest::Approx(2.0 * w).epsilon(1e-15));
}

TEST_CASE("backward matches central finite differences") {
    GeneratorModel model = small_model(8, {8});
    Rng rng(9);
    const Mat eps = rng.gaussian_mat(3, 3);
    const Mat cond = rng.gaussian_mat(2, 3);
    const Mat targets = rng.gaussian_mat(5, 3);
    for (TargetSpace space :
         {TargetSpace::Physical, TargetSpace::Normalized}) {
        const Vec grad =
            backward_mse_to_constant(model, eps, cond, targets, space).second;
        for (int p = 0; p < model.net.param_count(); ++p) {
            const double fd = fd_loss(model, eps, cond, targets, space, p, 1e-6);
            const double scale =
                std::max({1.0, std::abs(fd), std::abs(grad[p])});
            CHECK(std::abs(fd - grad[p]) / scale <= 1e-4);
        }
    }
}

TEST_CASE("backward gradient check over 20 random architectures") {
    Rng arch_rng(10);
    for (int rep = 0; rep < 20; ++rep) {
        const int d_eps = 1 + arch_rng.uniform_int(4);
        const int cond_dim = arch_rng.uniform_int(3);
        const int out_dim = 1 + arch_rng.uniform_int(5);
        const int hidden = 2 + arch_rng.uniform_int(8);
        const int layers = arch_rng.uniform_int(2);  // 0 or 1 hidden layers

        GeneratorModel model;
        model.d_eps = d_eps;
        model.cond_dim = cond_dim;
        model.out_dim = out_dim;
        std::vector<int> dims{d_eps + cond_dim};
        for (int l = 0; l < layers + 1; ++l) dims.push_back(hidden);
        dims.push_back(out_dim);
        Rng rng(100 + rep);
        model.net = Mlp::create(dims, Activation::Silu, rng);
        model.norm = NormalizationStats::identity(cond_dim, out_dim);
        model.norm.out_std = 0.5 * Vec::Ones(out_dim) +
                             rng.gaussian_vec(out_dim).cwiseAbs();
        model.norm.out_mean = rng.gaussian_vec(out_dim);

        const int batch = 1 + rng.uniform_int(3);
        const Mat eps = rng.gaussian_mat(d_eps, batch);
        const Mat cond = rng.gaussian_mat(cond_dim, batch);
        const Mat targets = rng.gaussian_mat(out_dim, batch);
        const Vec grad = backward_mse_to_constant(model, eps, cond, targets,
                                                  TargetSpace::Physical)
                             .second;
        // Spot-check a third of the parameters.
        for (int p = 0; p < model.net.param_count(); p += 3) {
            const double fd = fd_loss(model, eps, cond, targets,
                                      TargetSpace::Physical, p, 1e-6);
            const double scale =
                std::max({1.0, std::abs(fd), std::abs(grad[p])});
            CHECK(std::abs(fd - grad[p]) / scale <= 1e-4);
        }
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Vec params = Vec::LinSpaced(4, -1.0, 2.0);
    const Vec before = params;
    AdamState state = AdamState::create(4, 1e-3);
    adam_step(state, params, Vec::Zero(4));
    CHECK((params - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: constant gradient converges to lr-sized signed steps") {
    Vec params = Vec::Zero(2);
    Vec grad(2);
    grad << 0.3, -4.0;
    AdamState state = AdamState::create(2, 1e-2);
    Vec prev = params;
    double step0 = 0.0, step1 = 0.0;
    for (int k = 0; k < 500; ++k) {
        prev = params;
        adam_step(state, params, grad);
        step0 = params[0] - prev[0];
        step1 = params[1] - prev[1];
    }
    CHECK(step0 == doctest::Approx(-1e-2).epsilon(1e-6));
    CHECK(step1 == doctest::Approx(1e-2).epsilon(1e-6));
}

TEST_CASE("adam: quadratic bowl converges") {
    Vec w(2);
    w << 1.0, 1.0;
    AdamState state = AdamState::create(2, 1e-2);
    for (int k = 0; k < 500; ++k) adam_step(state, w, 2.0 * w);
    CHECK(w.norm() <= 1e-3);
}

TEST_CASE("gaussian: fixed seed reproduces bit-identically") {
    Rng a(99), b(99);
    const Vec va = gaussian(a, 1000);
    const Vec vb = gaussian(b, 1000);
    CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian: moments over 1e6 draws") {
    Rng rng(123);
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.gaussian();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) <= 0.004);
    CHECK(std::abs(var - 1.0) <= 0.006);
}

TEST_CASE("gaussian: derived streams are uncorrelated") {
    Rng a = Rng::derive(7, {0});
    Rng b = Rng::derive(7, {1});
    const int n = 100000;
    double sum_ab = 0.0, sum_a = 0.0, sum_b = 0.0, sum_a2 = 0.0, sum_b2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double za = a.gaussian();
        const double zb = b.gaussian();
        sum_ab += za * zb;
        sum_a += za;
        sum_b += zb;
        sum_a2 += za * za;
        sum_b2 += zb * zb;
    }
    const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
    const double corr = cov / std::sqrt((sum_a2 / n) * (sum_b2 / n));
    CHECK(std::abs(corr) <= 0.01);
}

TEST_CASE("normalization std floors at 1e-6") {
    Vec s(3);
    s << 0.0, 1e-9, 2.0;
    floor_std(s);
    CHECK(s[0] == 1e-6);
    CHECK(s[1] == 1e-6);
    CHECK(s[2] == 2.0);
}

TEST_CASE("mlp rejects inconsistent dims") {
    Rng rng(1);
    CHECK_THROWS_AS(Mlp::create({4}, Activation::Silu, rng), ConfigError);
    GeneratorModel model = small_model(2);
    model.d_eps = 4;  // net input is 5, d_eps+cond becomes 6
    CHECK_THROWS_AS(validate(model), ConfigError);
}
