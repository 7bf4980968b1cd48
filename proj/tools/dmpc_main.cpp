// dmpc: dataset collection, training, evaluation, statistics and selfcheck
// for the drifting-model receding-horizon controller benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dmpc/baselines.hpp"
#include "dmpc/config.hpp"
#include "dmpc/eval.hpp"
#include "dmpc/runtime.hpp"
#include "dmpc/selfcheck.hpp"
#include "dmpc/trainer.hpp"

namespace fs = std::filesystem;
using namespace dmpc;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    bool serial = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* opt = cmd->add_option("--config", args.config_path,
                                "JSON run configuration");
    if (config_required) opt->required();
    cmd->add_option("--set", args.overrides,
                    "Override a config key, e.g. --set train.epochs=10");
    cmd->add_flag("--serial", args.serial,
                  "Single-threaded deterministic mode (timings report 0)");
}

RunConfig resolve_config(const CommonArgs& args) {
    nlohmann::json j = nlohmann::json::object();
    if (!args.config_path.empty()) {
        std::ifstream is(args.config_path);
        if (!is) throw IoError("config: cannot open " + args.config_path);
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config: parse error in " + args.config_path +
                              ": " + e.what());
        }
    }
    for (const std::string& assignment : args.overrides)
        apply_override(j, assignment);
    RunConfig cfg = config_from_json(j);
    if (args.serial) set_deterministic(true);
    return cfg;
}

GeneratorKind parse_kind(const std::string& kind) {
    if (kind == "drifting") return GeneratorKind::Drifting;
    if (kind == "drifting-prior" || kind == "drifting_prior")
        return GeneratorKind::DriftingPrior;
    throw ConfigError("train: kind must be drifting|drifting-prior|ddpm");
}

int cmd_collect(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    fs::create_directories(cfg.output_dir);
    write_resolved_config(cfg,
                          (fs::path(cfg.output_dir) / "resolved_collect.json")
                              .string());
    const DiscreteLinearSystem sys = discretize_zoh(cfg.dynamics);
    const OfflineDataset ds =
        collect(sys, cfg.controllers, cfg.dataset_n, cfg.dataset_horizon,
                cfg.init_box, cfg.mixture, cfg.seed);
    const std::string path =
        (fs::path(cfg.output_dir) / cfg.dataset_file).string();
    save_dataset(ds, path, cfg.controllers);
    std::cout << "wrote " << path << " (" << ds.size() << " trajectories, H="
              << ds.meta.horizon << ")\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path,
              const std::string& kind, const std::string& resume_path,
              int stop_after) {
    const RunConfig cfg = resolve_config(args);
    fs::create_directories(cfg.output_dir);
    write_resolved_config(
        cfg, (fs::path(cfg.output_dir) / "resolved_train.json").string());
    const OfflineDataset ds = load_dataset(dataset_path);
    require(ds.meta.d_x == cfg.init_box.lower.size(),
            "train: dataset d_x does not match config dynamics");

    const std::string stem = kind == "drifting-prior" ? "drifting_prior" : kind;
    const std::string ck_path =
        (fs::path(cfg.output_dir) /
         (stem + "_H" + std::to_string(ds.meta.horizon) + ".ck"))
            .string();
    const std::string log_path =
        (fs::path(cfg.output_dir) /
         (stem + "_H" + std::to_string(ds.meta.horizon) + "_train.csv"))
            .string();

    if (kind == "ddpm") {
        require(stop_after < 0, "train: --stop-after applies to drifting kinds");
        DdpmConfig dcfg = cfg.ddpm;
        dcfg.seed = cfg.seed;
        DdpmTrainResult resume;
        const DdpmTrainResult* resume_ptr = nullptr;
        if (!resume_path.empty()) {
            resume = ddpm_from_checkpoint(load_checkpoint(resume_path));
            resume_ptr = &resume;
        }
        const DdpmTrainResult result =
            ddpm_train(ds, cfg.cost_box, dcfg, resume_ptr);
        save_checkpoint(make_ddpm_checkpoint(result, ds.meta, dcfg), ck_path);
        write_train_log_csv(result.log, log_path);
    } else {
        const GeneratorKind gk = parse_kind(kind);
        TrainConfig tcfg = cfg.train;
        tcfg.seed = cfg.seed;
        tcfg.abort_dump_path =
            (fs::path(cfg.output_dir) / (stem + "_abort.ck")).string();
        const DiscreteLinearSystem sys = discretize_zoh(cfg.dynamics);
        TrainResult resume;
        const TrainResult* resume_ptr = nullptr;
        if (!resume_path.empty()) {
            resume = resume_state_from_checkpoint(load_checkpoint(resume_path));
            resume_ptr = &resume;
        }
        const TrainResult result = train(ds, sys, cfg.cost_box, cfg.eval_omega,
                                         tcfg, gk, resume_ptr, {}, stop_after);
        save_checkpoint(make_checkpoint(result, gk, ds.meta, tcfg), ck_path);
        write_train_log_csv(result.log, log_path);
    }
    std::cout << "wrote " << ck_path << "\n";
    return 0;
}

MethodSpec make_method(const std::string& spec, const RunConfig& cfg,
                       const std::vector<int>& horizons) {
    MethodSpec method;
    const size_t eq = spec.find('=');
    const std::string label = spec.substr(0, eq);
    method.label = label;
    if (label == "oracle") {
        require(eq == std::string::npos, "eval: oracle takes no checkpoint");
        method.oracle = true;
        method.m_plan = 1;
        return method;
    }
    require(eq != std::string::npos,
            "eval: method needs a checkpoint, e.g. drifting=path.ck");
    const std::string ck_path = spec.substr(eq + 1);
    const Checkpoint ck = load_checkpoint(ck_path);
    for (int h : horizons) {
        if (ck.horizon != h)
            throw ConfigError("eval: checkpoint horizon " +
                              std::to_string(ck.horizon) +
                              " does not match requested horizon " +
                              std::to_string(h));
    }
    method.m_plan = cfg.m_plan;

    if (label == "drifting" || label == "drifting_prior") {
        require(ck.kind == (label == "drifting" ? "drifting" : "drifting_prior"),
                "eval: checkpoint kind " + ck.kind + " does not match method " +
                    label);
        const GeneratorModel model = generator_from_checkpoint(ck);
        const bool with_omega = label == "drifting";
        const int d_x = ck.d_x, d_u = ck.d_u, horizon = ck.horizon;
        method.make_sampler = [model, with_omega, horizon, d_x,
                               d_u](int) -> std::unique_ptr<TrajectorySampler> {
            return std::make_unique<DriftingSampler>(model, with_omega, horizon,
                                                     d_x, d_u);
        };
    } else if (label == "diffusion" || label.rfind("guided_diffusion", 0) == 0) {
        require(ck.kind == "ddpm",
                "eval: method " + label + " needs a ddpm checkpoint");
        const DdpmModel model = ddpm_from_checkpoint(ck).model;
        // guided_diffusion@<scale> sweeps the guidance strength in one run.
        double scale = 0.0;
        if (label != "diffusion") {
            scale = cfg.guidance_scale;
            const size_t at = label.find('@');
            if (at != std::string::npos) {
                try {
                    scale = std::stod(label.substr(at + 1));
                } catch (const std::exception&) {
                    throw ConfigError("eval: bad guidance scale in '" + label +
                                      "'");
                }
            } else {
                require(label == "guided_diffusion",
                        "eval: unknown method '" + label + "'");
            }
        }
        const int d_x = ck.d_x, d_u = ck.d_u, horizon = ck.horizon;
        method.make_sampler = [model, scale, horizon, d_x,
                               d_u](int) -> std::unique_ptr<TrajectorySampler> {
            return std::make_unique<DdpmSampler>(model, horizon, d_x, d_u,
                                                 scale);
        };
    } else {
        throw ConfigError(
            "eval: unknown method '" + label +
            "' (expected oracle|drifting|drifting_prior|diffusion|"
            "guided_diffusion)");
    }
    return method;
}

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& methods,
             const std::vector<int>& horizons_flag) {
    const RunConfig cfg = resolve_config(args);
    require(!methods.empty(), "eval: need at least one --method");
    fs::create_directories(cfg.output_dir);
    write_resolved_config(
        cfg, (fs::path(cfg.output_dir) / "resolved_eval.json").string());

    EvalOptions options;
    options.horizons = horizons_flag.empty() ? cfg.eval_horizons : horizons_flag;
    options.episodes = cfg.eval_episodes;
    options.omega = cfg.eval_omega;
    options.seed = cfg.seed;

    std::vector<MethodSpec> specs;
    specs.reserve(methods.size());
    for (const std::string& m : methods)
        specs.push_back(make_method(m, cfg, options.horizons));

    const DiscreteLinearSystem sys = discretize_zoh(cfg.dynamics);
    const std::vector<EvalRecord> records =
        evaluate(specs, options, sys, cfg.init_box);
    export_records(records, cfg.output_dir, cfg.bootstrap_resamples,
                   cfg.bootstrap_method, cfg.seed);
    std::cout << "wrote " << (fs::path(cfg.output_dir) / "episodes.csv").string()
              << " and summary.csv (" << records.size() << " episodes)\n";
    return 0;
}

int cmd_stats(const CommonArgs& args, const std::string& episodes_csv,
              const std::string& out_csv) {
    const RunConfig cfg = resolve_config(args);
    summarize_episodes_csv(episodes_csv, out_csv, cfg.bootstrap_resamples,
                           cfg.bootstrap_method, cfg.seed);
    std::cout << "wrote " << out_csv << "\n";
    return 0;
}

int cmd_selfcheck(const std::vector<std::string>& checkpoints) {
    bool ok = run_selfcheck(std::cout);
    for (const std::string& path : checkpoints)
        ok = check_checkpoint(path, std::cout) && ok;
    std::cout << (ok ? "selfcheck: all checks passed\n"
                     : "selfcheck: FAILURES detected\n");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drifting-model receding-horizon control benchmark"};
    app.require_subcommand(1);

    CommonArgs collect_args;
    auto* collect_cmd =
        app.add_subcommand("collect", "Collect the offline dataset");
    add_common(collect_cmd, collect_args, true);

    CommonArgs train_args;
    std::string train_dataset, train_kind = "drifting", train_resume;
    int train_stop_after = -1;
    auto* train_cmd = app.add_subcommand("train", "Train a generator");
    add_common(train_cmd, train_args, true);
    train_cmd->add_option("--dataset", train_dataset, "Dataset file")
        ->required();
    train_cmd->add_option("--kind", train_kind,
                          "drifting|drifting-prior|ddpm");
    train_cmd->add_option("--resume", train_resume,
                          "Checkpoint to resume from");
    train_cmd->add_option(
        "--stop-after", train_stop_after,
        "Stop after this many total epochs (schedule keeps train.epochs)");

    CommonArgs eval_args;
    std::vector<std::string> eval_methods;
    std::vector<int> eval_horizons;
    auto* eval_cmd =
        app.add_subcommand("eval", "Run the closed-loop benchmark");
    add_common(eval_cmd, eval_args, true);
    eval_cmd->add_option("--method", eval_methods,
                         "oracle or <label>=<checkpoint>");
    eval_cmd->add_option("--horizons", eval_horizons,
                         "Horizons to evaluate (checkpoints must match)");

    CommonArgs stats_args;
    std::string stats_episodes, stats_out = "summary.csv";
    auto* stats_cmd =
        app.add_subcommand("stats", "Bootstrap summary from episodes.csv");
    add_common(stats_cmd, stats_args, false);
    stats_cmd->add_option("--episodes", stats_episodes, "episodes.csv path")
        ->required();
    stats_cmd->add_option("--out", stats_out, "Output summary csv");

    std::vector<std::string> selfcheck_ckpts;
    auto* selfcheck_cmd =
        app.add_subcommand("selfcheck", "Run the fast property suite");
    selfcheck_cmd->add_option("--checkpoint", selfcheck_ckpts,
                              "Checkpoint files to validate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect_cmd->parsed()) return cmd_collect(collect_args);
        if (train_cmd->parsed())
            return cmd_train(train_args, train_dataset, train_kind,
                             train_resume, train_stop_after);
        if (eval_cmd->parsed())
            return cmd_eval(eval_args, eval_methods, eval_horizons);
        if (stats_cmd->parsed())
            return cmd_stats(stats_args, stats_episodes, stats_out);
        if (selfcheck_cmd->parsed()) return cmd_selfcheck(selfcheck_ckpts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
