#include "dmpc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include "dmpc/runtime.hpp"
#include "json.hpp"

namespace dmpc {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'P', 'C', 'D', 'S', '0', '1'};
constexpr uint64_t kCollectStream = 0xD5C0;

std::array<int, 3> quota_counts(int n, const std::array<double, 3>& mixture) {
    // Cumulative rounding: deterministic counts that sum to n.
    std::array<int, 3> counts{};
    double cum = 0.0;
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        cum += mixture[i];
        int upto = (i == 2) ? n : static_cast<int>(std::lround(cum * n));
        counts[i] = upto - assigned;
        assigned = upto;
    }
    return counts;
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64_rowmajor(std::ostream& os, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            os.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

void read_f64_rowmajor(std::istream& is, Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v;
            is.read(reinterpret_cast<char*>(&v), sizeof(double));
            m(i, j) = v;
        }
}

}  // namespace

Controller noisy_pd_controller(double kp, double kd, double sigma) {
    return [kp, kd, sigma](int, const Vec& x, Rng& rng) {
        const double p = x.size() > 0 ? x[0] : 0.0;
        const double v = x.size() > 1 ? x[1] : 0.0;
        Vec u(1);
        u[0] = -kp * p - kd * v + sigma * rng.gaussian();
        return u;
    };
}

Controller smooth_random_controller(int d_u, double rho, double sigma) {
    auto prev = std::make_shared<Vec>();
    return [d_u, rho, sigma, prev](int t, const Vec&, Rng& rng) {
        if (t == 0 || prev->size() != d_u) {
            *prev = sigma * rng.gaussian_vec(d_u);  // stationary start
        } else {
            const double mix = std::sqrt(1.0 - rho * rho) * sigma;
            *prev = rho * (*prev) + mix * rng.gaussian_vec(d_u);
        }
        return *prev;
    };
}

OfflineDataset collect(const DiscreteLinearSystem& sys,
                       const ControllerMixConfig& mix, int n, int horizon,
                       const InitBox& init_box,
                       const std::array<double, 3>& mixture, uint64_t seed) {
    require(n >= 1, "collect: n must be >= 1");
    require(horizon >= 1, "collect: horizon must be >= 1");
    require(std::abs(mixture[0] + mixture[1] + mixture[2] - 1.0) < 1e-12,
            "collect: mixture must sum to 1");
    validate(init_box);

    const auto counts = quota_counts(n, mixture);
    const RiccatiSolution lqr = solve_riccati(sys, mix.lqr_omega, horizon);

    OfflineDataset ds;
    ds.trajectories.resize(n);
    ds.controller_tags.resize(n);
    ds.initial_states.resize(n, sys.d_x);
    ds.meta = DatasetMeta{sys.d_x, sys.d_u, horizon, n, seed, mixture};

    parallel_for(n, [&](int i) {
        Rng rng = Rng::derive(seed, {kCollectStream, static_cast<uint64_t>(i)});
        const Vec x0 = sample_init(init_box, rng);
        uint8_t tag = kTagRandom;
        if (i < counts[0])
            tag = kTagLqr;
        else if (i < counts[0] + counts[1])
            tag = kTagPd;

        Controller controller;
        switch (tag) {
            case kTagLqr:
                controller = noisy_oracle_controller(lqr, mix.lqr_sigma);
                break;
            case kTagPd:
                controller =
                    noisy_pd_controller(mix.pd_kp, mix.pd_kd, mix.pd_sigma);
                break;
            default:
                controller = smooth_random_controller(sys.d_u, mix.random_rho,
                                                      mix.random_sigma);
        }
        ds.trajectories[i] = rollout(sys, x0, controller, horizon, rng);
        ds.controller_tags[i] = tag;
        ds.initial_states.row(i) = x0.transpose();
    });
    return ds;
}

LocalPrior knn_prior(const OfflineDataset& ds, const Vec& x0, int k,
                     std::optional<double> bandwidth) {
    const int n = ds.size();
    require(n >= 1, "knn_prior: empty dataset");
    require(k >= 1 && k <= n, "knn_prior: need 1 <= K <= N");
    require(x0.size() == ds.meta.d_x, "knn_prior: x0 dim mismatch");

    // Brute-force scan; ties broken by smallest index via stable pair sort.
    std::vector<std::pair<double, int>> dist(n);
    for (int i = 0; i < n; ++i) {
        const double d2 =
            (ds.initial_states.row(i).transpose() - x0).squaredNorm();
        dist[i] = {d2, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    LocalPrior prior;
    prior.query_state = x0;
    prior.indices.resize(k);
    Vec sq(k);
    for (int j = 0; j < k; ++j) {
        prior.indices[j] = dist[j].second;
        sq[j] = dist[j].first;
    }

    prior.weights.resize(k);
    double h;
    if (bandwidth && std::isinf(*bandwidth)) {
        prior.weights.setConstant(1.0 / k);
        return prior;
    } else if (bandwidth) {
        h = *bandwidth;
        require(h > 0.0, "knn_prior: bandwidth must be > 0");
    } else {
        std::vector<double> s(sq.data(), sq.data() + k);
        std::sort(s.begin(), s.end());
        h = (k % 2 == 1) ? s[k / 2] : 0.5 * (s[k / 2 - 1] + s[k / 2]);
        h = std::max(h, 1e-8);
    }
    for (int j = 0; j < k; ++j) prior.weights[j] = std::exp(-sq[j] / h);
    const double total = prior.weights.sum();
    if (!(total > 0.0)) throw NumericError("knn_prior: weights underflow");
    prior.weights /= total;
    return prior;
}

std::vector<int> sample_positives(const LocalPrior& prior, int count,
                                  Rng& rng) {
    require(!prior.indices.empty(), "sample_positives: empty prior");
    require(count >= 1, "sample_positives: count must be >= 1");
    const int k = static_cast<int>(prior.indices.size());
    std::vector<int> out(count);
    for (int d = 0; d < count; ++d) {
        const double u = rng.uniform01();
        double cum = 0.0;
        int pick = k - 1;
        for (int j = 0; j < k; ++j) {
            cum += prior.weights[j];
            if (u < cum) {
                pick = j;
                break;
            }
        }
        out[d] = prior.indices[pick];
    }
    return out;
}

double relabel_cost(const Trajectory& tau, const CostParams& omega) {
    return cost(tau, omega);
}

void save_dataset(const OfflineDataset& ds, const std::string& path,
                  const ControllerMixConfig& mix) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_dataset: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<uint32_t>(ds.meta.d_x));
    write_u32(os, static_cast<uint32_t>(ds.meta.d_u));
    write_u32(os, static_cast<uint32_t>(ds.meta.horizon));
    write_u32(os, static_cast<uint32_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) {
        const char tag = static_cast<char>(ds.controller_tags[i]);
        os.write(&tag, 1);
        write_f64_rowmajor(os, ds.trajectories[i].states);
        write_f64_rowmajor(os, ds.trajectories[i].controls);
    }
    if (!os) throw IoError("save_dataset: write failed for " + path);

    nlohmann::json manifest;
    manifest["seed"] = ds.meta.seed;
    manifest["mixture"] = ds.meta.mixture;
    manifest["controllers"] = {
        {"lqr_q", std::vector<double>(mix.lqr_omega.q.data(),
                                      mix.lqr_omega.q.data() +
                                          mix.lqr_omega.q.size())},
        {"lqr_r", std::vector<double>(mix.lqr_omega.r.data(),
                                      mix.lqr_omega.r.data() +
                                          mix.lqr_omega.r.size())},
        {"lqr_sigma", mix.lqr_sigma},
        {"pd_kp", mix.pd_kp},
        {"pd_kd", mix.pd_kd},
        {"pd_sigma", mix.pd_sigma},
        {"random_rho", mix.random_rho},
        {"random_sigma", mix.random_sigma}};
    std::ofstream ms(path + ".manifest.json");
    if (!ms) throw IoError("save_dataset: cannot open manifest for " + path);
    ms << manifest.dump(2) << "\n";
}

OfflineDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_dataset: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("load_dataset: bad magic in " + path);

    OfflineDataset ds;
    ds.meta.d_x = static_cast<int>(read_u32(is));
    ds.meta.d_u = static_cast<int>(read_u32(is));
    ds.meta.horizon = static_cast<int>(read_u32(is));
    ds.meta.n = static_cast<int>(read_u32(is));
    require(ds.meta.d_x > 0 && ds.meta.d_u > 0 && ds.meta.horizon > 0 &&
                ds.meta.n > 0,
            "load_dataset: bad header");

    ds.trajectories.resize(ds.meta.n);
    ds.controller_tags.resize(ds.meta.n);
    ds.initial_states.resize(ds.meta.n, ds.meta.d_x);
    for (int i = 0; i < ds.meta.n; ++i) {
        char tag;
        is.read(&tag, 1);
        ds.controller_tags[i] = static_cast<uint8_t>(tag);
        Trajectory& tau = ds.trajectories[i];
        tau.states.resize(ds.meta.horizon + 1, ds.meta.d_x);
        tau.controls.resize(ds.meta.horizon, ds.meta.d_u);
        read_f64_rowmajor(is, tau.states);
        read_f64_rowmajor(is, tau.controls);
        ds.initial_states.row(i) = tau.states.row(0);
    }
    if (!is) throw IoError("load_dataset: truncated file " + path);

    std::ifstream ms(path + ".manifest.json");
    if (ms) {
        nlohmann::json manifest;
        ms >> manifest;
        ds.meta.seed = manifest.value("seed", uint64_t{0});
        if (manifest.contains("mixture")) {
            auto m = manifest["mixture"].get<std::vector<double>>();
            for (size_t i = 0; i < 3 && i < m.size(); ++i)
                ds.meta.mixture[i] = m[i];
        }
    }
    return ds;
}

}  // namespace dmpc
