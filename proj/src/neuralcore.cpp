#include "dmpc/neuralcore.hpp"

#include <cmath>

namespace dmpc {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_prime(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

}  // namespace

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Silu:
            return "silu";
    }
    return "silu";
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::Silu;
    throw ConfigError("unknown activation: " + name);
}

int Mlp::param_count() const {
    int total = 0;
    for (int l = 0; l < layers(); ++l)
        total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    return total;
}

int Mlp::weight_offset(int layer) const {
    int off = 0;
    for (int l = 0; l < layer; ++l)
        off += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    return off;
}

int Mlp::bias_offset(int layer) const {
    return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
}

Eigen::Map<const Mat> Mlp::weight(int layer) const {
    return {theta.data() + weight_offset(layer), layer_dims[layer + 1],
            layer_dims[layer]};
}

Eigen::Map<const Vec> Mlp::bias(int layer) const {
    return {theta.data() + bias_offset(layer), layer_dims[layer + 1]};
}

Eigen::Map<Mat> Mlp::weight(int layer) {
    return {theta.data() + weight_offset(layer), layer_dims[layer + 1],
            layer_dims[layer]};
}

Eigen::Map<Vec> Mlp::bias(int layer) {
    return {theta.data() + bias_offset(layer), layer_dims[layer + 1]};
}

Mlp Mlp::create(std::vector<int> dims, Activation act, Rng& rng) {
    require(dims.size() >= 2, "mlp: need at least input and output dims");
    for (int d : dims) require(d >= 1, "mlp: dims must be >= 1");
    Mlp net;
    net.layer_dims = std::move(dims);
    net.activation = act;
    net.theta = Vec::Zero(net.param_count());
    for (int l = 0; l < net.layers(); ++l) {
        const int fan_in = net.layer_dims[l];
        const int fan_out = net.layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        auto w = net.weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = rng.uniform(-bound, bound);
    }
    return net;
}

Mat mlp_forward(const Mlp& net, const Mat& input, MlpCache* cache) {
    require(input.rows() == net.input_dim(), "mlp_forward: input dim mismatch");
    const int n_layers = net.layers();
    if (cache) {
        cache->pre.assign(n_layers, Mat());
        cache->act.assign(n_layers + 1, Mat());
        cache->act[0] = input;
    }
    Mat a = input;
    for (int l = 0; l < n_layers; ++l) {
        Mat z = (net.weight(l) * a).colwise() + net.bias(l);
        if (cache) cache->pre[l] = z;
        if (l + 1 < n_layers) {
            a = z.unaryExpr([](double v) { return silu(v); });
        } else {
            a = std::move(z);  // linear head
        }
        if (cache) cache->act[l + 1] = a;
    }
    return a;
}

void mlp_backward_from(const Mlp& net, const MlpCache& cache,
                       const Mat& output_grad, Vec& grad) {
    const int n_layers = net.layers();
    grad = Vec::Zero(net.param_count());
    Mat delta = output_grad;
    for (int l = n_layers - 1; l >= 0; --l) {
        Eigen::Map<Mat> dw(grad.data() + net.weight_offset(l),
                           net.layer_dims[l + 1], net.layer_dims[l]);
        Eigen::Map<Vec> db(grad.data() + net.bias_offset(l),
                           net.layer_dims[l + 1]);
        dw = delta * cache.act[l].transpose();
        db = delta.rowwise().sum();
        if (l > 0) {
            Mat back = net.weight(l).transpose() * delta;
            delta = back.cwiseProduct(cache.pre[l - 1].unaryExpr(
                [](double v) { return silu_prime(v); }));
        }
    }
}

double mlp_mse_backward(const Mlp& net, const MlpCache& cache,
                        const Mat& targets, Vec& grad) {
    const Mat& out = cache.act.back();
    require(targets.rows() == out.rows() && targets.cols() == out.cols(),
            "mlp_mse_backward: target shape mismatch");
    const double batch = static_cast<double>(out.cols());
    const Mat diff = out - targets;
    const double loss = diff.squaredNorm() / batch;
    mlp_backward_from(net, cache, (2.0 / batch) * diff, grad);
    return loss;
}

NormalizationStats NormalizationStats::identity(int cond_dim, int out_dim) {
    NormalizationStats s;
    s.cond_mean = Vec::Zero(cond_dim);
    s.cond_std = Vec::Ones(cond_dim);
    s.out_mean = Vec::Zero(out_dim);
    s.out_std = Vec::Ones(out_dim);
    return s;
}

void floor_std(Vec& std_vec) {
    for (Eigen::Index i = 0; i < std_vec.size(); ++i)
        std_vec[i] = std::max(std_vec[i], 1e-6);
}

void validate(const GeneratorModel& model) {
    require(model.net.input_dim() == model.d_eps + model.cond_dim,
            "generator: net input dim != d_eps + cond_dim");
    require(model.net.output_dim() == model.out_dim,
            "generator: net output dim != out_dim");
    require(model.norm.cond_mean.size() == model.cond_dim &&
                model.norm.cond_std.size() == model.cond_dim &&
                model.norm.out_mean.size() == model.out_dim &&
                model.norm.out_std.size() == model.out_dim,
            "generator: normalization dims mismatch");
    require((model.norm.cond_std.array() > 0).all() &&
                (model.norm.out_std.array() > 0).all(),
            "generator: std must be positive");
}

Vec generator_forward(const GeneratorModel& model, const Vec& eps,
                      const Vec& c) {
    Mat out = generator_forward_batch(model, eps, c);
    return out.col(0);
}

Mat generator_forward_batch(const GeneratorModel& model, const Mat& eps,
                            const Mat& c, MlpCache* cache) {
    require(eps.rows() == model.d_eps, "generator: eps dim mismatch");
    require(c.rows() == model.cond_dim, "generator: cond dim mismatch");
    require(eps.cols() == c.cols(), "generator: batch size mismatch");
    const Eigen::Index batch = eps.cols();
    Mat input(model.d_eps + model.cond_dim, batch);
    input.topRows(model.d_eps) = eps;
    input.bottomRows(model.cond_dim) =
        ((c.colwise() - model.norm.cond_mean).array().colwise() /
         model.norm.cond_std.array())
            .matrix();
    Mat raw = mlp_forward(model.net, input, cache);
    Mat out =
        (raw.array().colwise() * model.norm.out_std.array()).matrix().colwise() +
        model.norm.out_mean;
    if (!out.allFinite())
        throw NumericError("generator forward: non-finite output");
    return out;
}

std::pair<double, Vec> backward_mse_to_constant(const GeneratorModel& model,
                                                const Mat& eps, const Mat& c,
                                                const Mat& targets,
                                                TargetSpace space) {
    require(eps.cols() >= 1, "backward_mse_to_constant: empty batch");
    MlpCache cache;
    Mat out = generator_forward_batch(model, eps, c, &cache);
    const Mat& raw = cache.act.back();
    require(targets.rows() == model.out_dim && targets.cols() == eps.cols(),
            "backward_mse_to_constant: target shape mismatch");
    const double batch = static_cast<double>(eps.cols());
    Vec grad;
    double loss;
    if (space == TargetSpace::Physical) {
        const Mat diff = out - targets;
        loss = diff.squaredNorm() / batch;
        const Mat seed =
            (2.0 / batch) *
            (diff.array().colwise() * model.norm.out_std.array()).matrix();
        mlp_backward_from(model.net, cache, seed, grad);
    } else {
        const Mat diff = raw - targets;
        loss = diff.squaredNorm() / batch;
        mlp_backward_from(model.net, cache, (2.0 / batch) * diff, grad);
    }
    if (!std::isfinite(loss))
        throw NumericError("backward_mse_to_constant: non-finite loss");
    return {loss, std::move(grad)};
}

AdamState AdamState::create(int param_count, double lr) {
    AdamState s;
    s.m = Vec::Zero(param_count);
    s.v = Vec::Zero(param_count);
    s.lr = lr;
    return s;
}

void adam_step(AdamState& state, Vec& params, const Vec& grad) {
    require(state.m.size() == params.size() && grad.size() == params.size(),
            "adam_step: shape mismatch");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
    params.array() -= state.lr * (state.m.array() / c1) /
                      ((state.v.array() / c2).sqrt() + state.eps);
}

}  // namespace dmpc
