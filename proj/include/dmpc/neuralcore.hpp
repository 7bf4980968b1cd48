#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmpc/common.hpp"
#include "dmpc/rng.hpp"

namespace dmpc {

enum class Activation { Silu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense network with silu hidden layers and linear head. All parameters
// live in one flat vector (per layer: W column-major, then b) so the
// optimizer and checkpoints see a single contiguous buffer.
struct Mlp {
    std::vector<int> layer_dims;  // in, h1, ..., out
    Activation activation = Activation::Silu;
    Vec theta;

    int layers() const { return static_cast<int>(layer_dims.size()) - 1; }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int param_count() const;
    int weight_offset(int layer) const;
    int bias_offset(int layer) const;

    Eigen::Map<const Mat> weight(int layer) const;
    Eigen::Map<const Vec> bias(int layer) const;
    Eigen::Map<Mat> weight(int layer);
    Eigen::Map<Vec> bias(int layer);

    // Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
    static Mlp create(std::vector<int> dims, Activation act, Rng& rng);
};

// Cached batch activations for the backward pass. act[0] is the input,
// act[l] the post-activation of layer l; pre[l] the pre-activation.
struct MlpCache {
    std::vector<Mat> pre;
    std::vector<Mat> act;
};

// input is in_dim x batch; returns out_dim x batch.
Mat mlp_forward(const Mlp& net, const Mat& input, MlpCache* cache = nullptr);

// Mean over batch of ||out - target||^2 with constant targets; appends the
// exact reverse-mode gradient into grad (resized, zero-initialized).
// d_out, if given, overrides the standard 2/B * (out - target) seed.
double mlp_mse_backward(const Mlp& net, const MlpCache& cache,
                        const Mat& targets, Vec& grad);

// Gradient of sum_j loss_j given explicit dL/d(output) seeds.
void mlp_backward_from(const Mlp& net, const MlpCache& cache,
                       const Mat& output_grad, Vec& grad);

struct NormalizationStats {
    Vec cond_mean, cond_std;  // conditioning input
    Vec out_mean, out_std;    // generator output

    static NormalizationStats identity(int cond_dim, int out_dim);
};

// Floors std at 1e-6 in place.
void floor_std(Vec& std_vec);

// One-step conditional generator: out = denorm(net([eps; norm(c)])).
struct GeneratorModel {
    Mlp net;
    int d_eps = 0;
    int cond_dim = 0;
    int out_dim = 0;
    NormalizationStats norm;
};

void validate(const GeneratorModel& model);

Vec generator_forward(const GeneratorModel& model, const Vec& eps,
                      const Vec& c);
// eps is d_eps x batch, c is cond_dim x batch; returns out_dim x batch.
Mat generator_forward_batch(const GeneratorModel& model, const Mat& eps,
                            const Mat& c, MlpCache* cache = nullptr);

enum class TargetSpace { Physical, Normalized };

// Loss/gradient of the constant-target MSE through the generator. In
// Physical space targets are in output units; in Normalized space both the
// net output and targets are whitened (what training uses).
std::pair<double, Vec> backward_mse_to_constant(const GeneratorModel& model,
                                                const Mat& eps, const Mat& c,
                                                const Mat& targets,
                                                TargetSpace space);

struct AdamState {
    Vec m, v;
    int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState create(int param_count, double lr);
};

void adam_step(AdamState& state, Vec& params, const Vec& grad);

}  // namespace dmpc
