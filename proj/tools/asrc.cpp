// Command-line driver: data generation, reservoir rollout, training,
// evaluation, sweeps, and analysis from a single JSON config.

#include "asrc/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int threads = 0;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", args.out_dir, "override the output directory");
    cmd->add_option("--seed", args.seed, "override the training seed");
    cmd->add_option("--threads", args.threads, "override the thread count");
    cmd->add_flag("--force", args.force, "ignore cached stage outputs");
}

asrc::config::ExperimentConfig resolve(const CommonArgs& args) {
    auto cfg = asrc::config::load_config(args.config_path);
    asrc::pipeline::Options opt;
    opt.force = args.force;
    opt.threads_override = args.threads;
    opt.seed_override = args.seed;
    opt.out_dir_override = args.out_dir;
    return asrc::pipeline::apply_overrides(cfg, opt);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive-sensing reservoir computing laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string analyze_what = "correlations";

    auto* gen = app.add_subcommand("gen-data", "generate the benchmark series");
    add_common(gen, args);
    auto* res = app.add_subcommand("run-reservoir", "roll the PDE reservoir over the dataset");
    add_common(res, args);
    auto* train_cmd = app.add_subcommand("train", "train the configured model");
    add_common(train_cmd, args);
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate the trained model");
    add_common(eval_cmd, args);
    auto* analyze = app.add_subcommand("analyze", "correlation and query analyses");
    add_common(analyze, args);
    analyze->add_option("what", analyze_what, "correlations|queries|sweep")
        ->check(CLI::IsMember({"correlations", "queries", "sweep"}));
    auto* sweep = app.add_subcommand("sweep", "error-vs-sensor-count sweep");
    add_common(sweep, args);
    auto* pipe = app.add_subcommand("pipeline", "run every stage in order");
    add_common(pipe, args);

    CLI11_PARSE(app, argc, argv);

    using asrc::pipeline::Stage;
    using asrc::pipeline::StageError;

    try {
        asrc::config::ExperimentConfig cfg;
        try {
            cfg = resolve(args);
        } catch (const std::exception& e) {
            std::cerr << "config: " << e.what() << "\n";
            return asrc::pipeline::stage_exit_code(Stage::Config);
        }

        asrc::pipeline::Options opt;
        opt.force = args.force;

        const auto guarded = [&](Stage stage, auto&& fn) {
            try {
                fn();
            } catch (const StageError&) {
                throw;
            } catch (const std::exception& e) {
                throw StageError(stage, e.what());
            }
        };

        if (gen->parsed()) {
            guarded(Stage::Data, [&] { asrc::pipeline::stage_gen_data(cfg, args.force, std::cout); });
        } else if (res->parsed()) {
            guarded(Stage::Reservoir,
                    [&] { asrc::pipeline::stage_run_reservoir(cfg, args.force, std::cout); });
        } else if (train_cmd->parsed()) {
            guarded(Stage::Train, [&] { asrc::pipeline::stage_train(cfg, args.force, std::cout); });
        } else if (eval_cmd->parsed()) {
            guarded(Stage::Evaluate,
                    [&] { asrc::pipeline::stage_evaluate(cfg, args.force, std::cout); });
        } else if (analyze->parsed()) {
            if (analyze_what == "sweep")
                guarded(Stage::Sweep, [&] { asrc::pipeline::stage_sweep(cfg, args.force, std::cout); });
            else
                guarded(Stage::Analyze,
                        [&] { asrc::pipeline::stage_analyze(cfg, args.force, std::cout); });
        } else if (sweep->parsed()) {
            guarded(Stage::Sweep, [&] { asrc::pipeline::stage_sweep(cfg, args.force, std::cout); });
        } else if (pipe->parsed()) {
            asrc::pipeline::run_pipeline(cfg, opt, std::cout);
        }
        return 0;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return asrc::pipeline::stage_exit_code(e.stage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
