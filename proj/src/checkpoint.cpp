#include "dmpc/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dmpc {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'P', 'C', 'C', 'K', '0', '1'};

std::vector<double> to_std(const Vec& v) {
    return {v.data(), v.data() + v.size()};
}

Vec from_std(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

void write_blob(std::ostream& os, const Vec& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_blob(std::istream& is, Vec& v, Eigen::Index n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    nlohmann::json manifest;
    manifest["kind"] = ck.kind;
    manifest["d_x"] = ck.d_x;
    manifest["d_u"] = ck.d_u;
    manifest["horizon"] = ck.horizon;
    manifest["d_eps"] = ck.d_eps;
    manifest["cond_dim"] = ck.cond_dim;
    manifest["out_dim"] = ck.out_dim;
    manifest["layer_dims"] = ck.net.layer_dims;
    manifest["activation"] = activation_name(ck.net.activation);
    manifest["norm"] = {{"cond_mean", to_std(ck.norm.cond_mean)},
                        {"cond_std", to_std(ck.norm.cond_std)},
                        {"out_mean", to_std(ck.norm.out_mean)},
                        {"out_std", to_std(ck.norm.out_std)}};
    manifest["adam"] = {{"step", ck.adam.step},
                        {"lr", ck.adam.lr},
                        {"beta1", ck.adam.beta1},
                        {"beta2", ck.adam.beta2},
                        {"eps", ck.adam.eps}};
    manifest["seed"] = ck.seed;
    manifest["epochs_trained"] = ck.epochs_trained;
    manifest["cost_scale"] = ck.cost_scale;
    manifest["extra"] = ck.extra;
    const std::string text = manifest.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    const uint64_t len = text.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_blob(os, ck.net.theta);
    write_blob(os, ck.adam.m);
    write_blob(os, ck.adam.v);
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("load_checkpoint: bad magic in " + path);
    uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError("load_checkpoint: truncated manifest in " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: bad manifest in " + path + ": " +
                      e.what());
    }

    Checkpoint ck;
    ck.kind = manifest.at("kind").get<std::string>();
    ck.d_x = manifest.at("d_x").get<int>();
    ck.d_u = manifest.at("d_u").get<int>();
    ck.horizon = manifest.at("horizon").get<int>();
    ck.d_eps = manifest.at("d_eps").get<int>();
    ck.cond_dim = manifest.at("cond_dim").get<int>();
    ck.out_dim = manifest.at("out_dim").get<int>();
    ck.net.layer_dims = manifest.at("layer_dims").get<std::vector<int>>();
    ck.net.activation =
        activation_from_name(manifest.at("activation").get<std::string>());
    ck.norm.cond_mean =
        from_std(manifest.at("norm").at("cond_mean").get<std::vector<double>>());
    ck.norm.cond_std =
        from_std(manifest.at("norm").at("cond_std").get<std::vector<double>>());
    ck.norm.out_mean =
        from_std(manifest.at("norm").at("out_mean").get<std::vector<double>>());
    ck.norm.out_std =
        from_std(manifest.at("norm").at("out_std").get<std::vector<double>>());
    ck.adam.step = manifest.at("adam").at("step").get<int64_t>();
    ck.adam.lr = manifest.at("adam").at("lr").get<double>();
    ck.adam.beta1 = manifest.at("adam").at("beta1").get<double>();
    ck.adam.beta2 = manifest.at("adam").at("beta2").get<double>();
    ck.adam.eps = manifest.at("adam").at("eps").get<double>();
    ck.seed = manifest.at("seed").get<uint64_t>();
    ck.epochs_trained = manifest.at("epochs_trained").get<int>();
    ck.cost_scale = manifest.at("cost_scale").get<double>();
    ck.extra = manifest.value("extra", nlohmann::json::object());

    const Eigen::Index n_params = ck.net.param_count();
    read_blob(is, ck.net.theta, n_params);
    read_blob(is, ck.adam.m, n_params);
    read_blob(is, ck.adam.v, n_params);
    if (!is) throw IoError("load_checkpoint: truncated parameters in " + path);
    if (!ck.net.theta.allFinite())
        throw NumericError("load_checkpoint: non-finite parameters in " + path);
    return ck;
}

}  // namespace dmpc
