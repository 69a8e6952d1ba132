#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "countercast/errors.hpp"
#include "countercast/pipeline.hpp"
#include "countercast/run_config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string seed, workers, outdir, frequency, sensitivity, parallel;
    std::vector<std::string> estimators, outcomes;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--seed", args.seed, "override run.seed");
    cmd->add_option("--workers", args.workers, "override run.workers");
    cmd->add_option("--outdir", args.outdir, "override run.outdir");
    cmd->add_option("--estimator", args.estimators, "override run.estimators (repeatable)");
    cmd->add_option("--outcome", args.outcomes, "override run.outcomes (repeatable)");
    cmd->add_option("--frequency", args.frequency, "override input.frequency");
    cmd->add_option("--sensitivity", args.sensitivity, "override run.sensitivity (comma list)");
    cmd->add_option("--parallel", args.parallel, "serial or openmp");
}

ccast::RunConfig build_config(const CommonArgs& args) {
    ccast::RunConfig cfg = ccast::load_run_config(args.config_path);
    if (!args.seed.empty()) ccast::apply_override(cfg, "run.seed", args.seed);
    if (!args.workers.empty()) ccast::apply_override(cfg, "run.workers", args.workers);
    if (!args.outdir.empty()) ccast::apply_override(cfg, "run.outdir", args.outdir);
    if (!args.frequency.empty()) ccast::apply_override(cfg, "input.frequency", args.frequency);
    if (!args.sensitivity.empty()) ccast::apply_override(cfg, "run.sensitivity", args.sensitivity);
    if (!args.parallel.empty()) ccast::apply_override(cfg, "run.parallel", args.parallel);
    if (!args.estimators.empty()) {
        std::string list;
        for (const auto& e : args.estimators) list += (list.empty() ? "" : ",") + e;
        ccast::apply_override(cfg, "run.estimators", list);
    }
    if (!args.outcomes.empty()) {
        std::string list;
        for (const auto& o : args.outcomes) list += (list.empty() ? "" : ",") + o;
        ccast::apply_override(cfg, "run.outcomes", list);
    }
    cfg.model.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    cfg.synth.frequency = cfg.frequency;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forecast-based counterfactual analysis for firm panels"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {"ingest", "fit",           "diagnose", "effects",
                                               "report", "heterogeneity", "synth"};
    std::vector<CommonArgs> args(commands.size());
    for (std::size_t i = 0; i < commands.size(); ++i)
        add_common(app.add_subcommand(commands[i]), args[i]);

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (!app.get_subcommand(commands[i])->parsed()) continue;
        try {
            ccast::pipeline::run_command(commands[i], build_config(args[i]));
            return 0;
        } catch (const ccast::ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        } catch (const ccast::PartialFailureError& e) {
            std::fprintf(stderr, "partial failure: %s\n", e.what());
            return 4;
        } catch (const ccast::Error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 3;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 3;
        }
    }
    return 2;
}
