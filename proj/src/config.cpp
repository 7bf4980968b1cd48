#include "dmpc/config.hpp"

#include <fstream>
#include <set>

namespace dmpc {

namespace {

std::vector<double> to_std(const Vec& v) {
    return {v.data(), v.data() + v.size()};
}

Vec from_std(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

void check_keys(const nlohmann::json& j, const nlohmann::json& schema,
                const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path =
            prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key()))
            throw ConfigError("config: unknown key '" + path + "'");
        if (it->is_object() && schema[it.key()].is_object())
            check_keys(*it, schema[it.key()], path);
    }
}

template <typename T>
T take(const nlohmann::json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for key '" + key + "'");
    }
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.init_box.lower = from_std({-2.0, -2.0});
    cfg.init_box.upper = from_std({2.0, 2.0});
    cfg.eval_omega.q = from_std({1.0, 1.0});
    cfg.eval_omega.r = from_std({0.1});
    cfg.controllers.lqr_omega = cfg.eval_omega;
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["dynamics"] = {{"m", cfg.dynamics.m},
                     {"k_s", cfg.dynamics.k_s},
                     {"c", cfg.dynamics.c},
                     {"dt", cfg.dynamics.dt},
                     {"init_lower", to_std(cfg.init_box.lower)},
                     {"init_upper", to_std(cfg.init_box.upper)}};
    j["cost"] = {{"q_min", cfg.cost_box.q_min},
                 {"q_max", cfg.cost_box.q_max},
                 {"r_min", cfg.cost_box.r_min},
                 {"r_max", cfg.cost_box.r_max},
                 {"eval_q", to_std(cfg.eval_omega.q)},
                 {"eval_r", to_std(cfg.eval_omega.r)}};
    j["dataset"] = {{"n", cfg.dataset_n},
                    {"horizon", cfg.dataset_horizon},
                    {"mixture", cfg.mixture},
                    {"file", cfg.dataset_file},
                    {"lqr_sigma", cfg.controllers.lqr_sigma},
                    {"pd_kp", cfg.controllers.pd_kp},
                    {"pd_kd", cfg.controllers.pd_kd},
                    {"pd_sigma", cfg.controllers.pd_sigma},
                    {"random_rho", cfg.controllers.random_rho},
                    {"random_sigma", cfg.controllers.random_sigma}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_queries", cfg.train.batch_queries},
                  {"positives", cfg.train.positives},
                  {"negatives", cfg.train.negatives},
                  {"lr", cfg.train.lr},
                  {"beta_min", cfg.train.beta_min},
                  {"beta_max", cfg.train.beta_max},
                  {"beta_schedule",
                   cfg.train.beta_schedule == BetaSchedule::Linear
                       ? "linear"
                       : "constant"},
                  {"knn", cfg.train.knn},
                  {"hidden", cfg.train.hidden},
                  {"noise_dim", cfg.train.noise_dim},
                  {"temperature", cfg.train.temperature}};
    j["ddpm"] = {{"epochs", cfg.ddpm.epochs},
                 {"batch", cfg.ddpm.batch},
                 {"lr", cfg.ddpm.lr},
                 {"steps", cfg.ddpm.steps},
                 {"beta_min", cfg.ddpm.beta_min},
                 {"beta_max", cfg.ddpm.beta_max},
                 {"hidden", cfg.ddpm.hidden},
                 {"time_embed_dim", cfg.ddpm.time_embed_dim}};
    j["plan"] = {{"m_plan", cfg.m_plan},
                 {"guidance_scale", cfg.guidance_scale}};
    j["eval"] = {{"horizons", cfg.eval_horizons},
                 {"episodes", cfg.eval_episodes},
                 {"resamples", cfg.bootstrap_resamples},
                 {"bootstrap", cfg.bootstrap_method == BootstrapMethod::Bca
                                   ? "bca"
                                   : "percentile"}};
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    const RunConfig defaults = default_config();
    check_keys(j, config_to_json(defaults), "");

    RunConfig cfg = defaults;
    cfg.seed = take(j, "seed", defaults.seed);
    cfg.output_dir = take(j, "output_dir", defaults.output_dir);

    const nlohmann::json dyn = j.value("dynamics", nlohmann::json::object());
    cfg.dynamics.m = take(dyn, "m", defaults.dynamics.m);
    cfg.dynamics.k_s = take(dyn, "k_s", defaults.dynamics.k_s);
    cfg.dynamics.c = take(dyn, "c", defaults.dynamics.c);
    cfg.dynamics.dt = take(dyn, "dt", defaults.dynamics.dt);
    cfg.init_box.lower = from_std(
        take(dyn, "init_lower", to_std(defaults.init_box.lower)));
    cfg.init_box.upper = from_std(
        take(dyn, "init_upper", to_std(defaults.init_box.upper)));

    const nlohmann::json cost = j.value("cost", nlohmann::json::object());
    cfg.cost_box.q_min = take(cost, "q_min", defaults.cost_box.q_min);
    cfg.cost_box.q_max = take(cost, "q_max", defaults.cost_box.q_max);
    cfg.cost_box.r_min = take(cost, "r_min", defaults.cost_box.r_min);
    cfg.cost_box.r_max = take(cost, "r_max", defaults.cost_box.r_max);
    cfg.eval_omega.q =
        from_std(take(cost, "eval_q", to_std(defaults.eval_omega.q)));
    cfg.eval_omega.r =
        from_std(take(cost, "eval_r", to_std(defaults.eval_omega.r)));

    const nlohmann::json ds = j.value("dataset", nlohmann::json::object());
    cfg.dataset_n = take(ds, "n", defaults.dataset_n);
    cfg.dataset_horizon = take(ds, "horizon", defaults.dataset_horizon);
    cfg.mixture = take(ds, "mixture", defaults.mixture);
    cfg.dataset_file = take(ds, "file", defaults.dataset_file);
    cfg.controllers.lqr_sigma =
        take(ds, "lqr_sigma", defaults.controllers.lqr_sigma);
    cfg.controllers.pd_kp = take(ds, "pd_kp", defaults.controllers.pd_kp);
    cfg.controllers.pd_kd = take(ds, "pd_kd", defaults.controllers.pd_kd);
    cfg.controllers.pd_sigma =
        take(ds, "pd_sigma", defaults.controllers.pd_sigma);
    cfg.controllers.random_rho =
        take(ds, "random_rho", defaults.controllers.random_rho);
    cfg.controllers.random_sigma =
        take(ds, "random_sigma", defaults.controllers.random_sigma);
    cfg.controllers.lqr_omega = cfg.eval_omega;

    const nlohmann::json tr = j.value("train", nlohmann::json::object());
    cfg.train.epochs = take(tr, "epochs", defaults.train.epochs);
    cfg.train.batch_queries =
        take(tr, "batch_queries", defaults.train.batch_queries);
    cfg.train.positives = take(tr, "positives", defaults.train.positives);
    cfg.train.negatives = take(tr, "negatives", defaults.train.negatives);
    cfg.train.lr = take(tr, "lr", defaults.train.lr);
    cfg.train.beta_min = take(tr, "beta_min", defaults.train.beta_min);
    cfg.train.beta_max = take(tr, "beta_max", defaults.train.beta_max);
    const std::string schedule =
        take<std::string>(tr, "beta_schedule", "linear");
    if (schedule == "linear")
        cfg.train.beta_schedule = BetaSchedule::Linear;
    else if (schedule == "constant")
        cfg.train.beta_schedule = BetaSchedule::Constant;
    else
        throw ConfigError("config: train.beta_schedule must be linear|constant");
    cfg.train.knn = take(tr, "knn", defaults.train.knn);
    cfg.train.hidden = take(tr, "hidden", defaults.train.hidden);
    cfg.train.noise_dim = take(tr, "noise_dim", defaults.train.noise_dim);
    cfg.train.temperature =
        take(tr, "temperature", defaults.train.temperature);
    cfg.train.seed = cfg.seed;

    const nlohmann::json dd = j.value("ddpm", nlohmann::json::object());
    cfg.ddpm.epochs = take(dd, "epochs", defaults.ddpm.epochs);
    cfg.ddpm.batch = take(dd, "batch", defaults.ddpm.batch);
    cfg.ddpm.lr = take(dd, "lr", defaults.ddpm.lr);
    cfg.ddpm.steps = take(dd, "steps", defaults.ddpm.steps);
    cfg.ddpm.beta_min = take(dd, "beta_min", defaults.ddpm.beta_min);
    cfg.ddpm.beta_max = take(dd, "beta_max", defaults.ddpm.beta_max);
    cfg.ddpm.hidden = take(dd, "hidden", defaults.ddpm.hidden);
    cfg.ddpm.time_embed_dim =
        take(dd, "time_embed_dim", defaults.ddpm.time_embed_dim);
    cfg.ddpm.seed = cfg.seed;

    const nlohmann::json plan = j.value("plan", nlohmann::json::object());
    cfg.m_plan = take(plan, "m_plan", defaults.m_plan);
    cfg.guidance_scale =
        take(plan, "guidance_scale", defaults.guidance_scale);

    const nlohmann::json ev = j.value("eval", nlohmann::json::object());
    cfg.eval_horizons = take(ev, "horizons", defaults.eval_horizons);
    cfg.eval_episodes = take(ev, "episodes", defaults.eval_episodes);
    cfg.bootstrap_resamples =
        take(ev, "resamples", defaults.bootstrap_resamples);
    const std::string bs = take<std::string>(ev, "bootstrap", "bca");
    if (bs == "bca")
        cfg.bootstrap_method = BootstrapMethod::Bca;
    else if (bs == "percentile")
        cfg.bootstrap_method = BootstrapMethod::Percentile;
    else
        throw ConfigError("config: eval.bootstrap must be bca|percentile");

    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json* node = &j;
    size_t start = 0;
    for (;;) {
        const size_t dot = key.find('.', start);
        const std::string part =
            key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError("override: empty key part");
        if (dot == std::string::npos) {
            nlohmann::json parsed;
            try {
                parsed = nlohmann::json::parse(value);
            } catch (const nlohmann::json::exception&) {
                parsed = value;  // plain string
            }
            (*node)[part] = parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("config: cannot write " + path);
    os << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace dmpc
