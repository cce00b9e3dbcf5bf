// pigp: wind generation, simulation, force reconstruction and scoring.
//
//   pigp pipeline --config run.json --out runs/a
//   pigp reconstruct --config run.json --in runs/a --out runs/b --hyperparams runs/a/manifest.json

#include "pigp/errors.hpp"
#include "pigp/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Args {
    std::string config;
    std::string out;
    std::string in;
    std::string truth;
    std::string pred;
    std::string modes;
    std::string hyperparams;
    std::optional<std::uint64_t> seed;
};

pigp::RunConfig load(const Args& a) {
    auto cfg = a.config.empty() ? pigp::RunConfig{} : pigp::load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    return cfg;
}

std::string out_dir(const Args& a, const pigp::RunConfig& cfg) { return a.out.empty() ? cfg.output : a.out; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed GP force reconstruction toolkit"};
    app.require_subcommand(1);
    Args a;

    auto common = [&a](CLI::App* sub) {
        sub->add_option("--config", a.config, "run configuration (JSON)");
        sub->add_option("--out", a.out, "output directory (default: config 'output')");
        sub->add_option("--seed", a.seed, "master seed, overrides the config");
        sub->add_option("--modes", a.modes, "comma list of 1-based mode indices or names");
    };
    auto* windgen = app.add_subcommand("windgen", "synthesize turbulence at the deck nodes");
    auto* simulate = app.add_subcommand("simulate", "buffeting forces, modal responses and noisy measurements");
    auto* reconstruct = app.add_subcommand("reconstruct", "train per-mode GPs and predict the modal forces");
    auto* metrics = app.add_subcommand("metrics", "score reconstructed against true forces");
    auto* pipeline = app.add_subcommand("pipeline", "all stages in sequence");
    for (auto* s : {windgen, simulate, reconstruct, metrics, pipeline}) common(s);
    for (auto* s : {simulate, reconstruct}) s->add_option("--in", a.in, "input directory (default: --out)");
    reconstruct->add_option("--hyperparams", a.hyperparams,
                            "reuse the hyperparameters stored in this manifest instead of training");
    metrics->add_option("--truth", a.truth, "directory with mode_<k>_force.csv (default: --out)");
    metrics->add_option("--pred", a.pred, "directory with mode_<k>_posterior.csv (default: --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::string stage = app.get_subcommands().front()->get_name();
    try {
        int rc = 0;
        pigp::run_stage(stage, [&] {
            const auto cfg = load(a);
            const std::string out = out_dir(a, cfg);
            const std::string in = a.in.empty() ? out : a.in;
            const auto modes = pigp::select_modes(cfg, a.modes);
            if (stage == "windgen") {
                pigp::cmd_windgen(cfg, out);
            } else if (stage == "simulate") {
                pigp::cmd_simulate(cfg, in, out);
            } else if (stage == "reconstruct") {
                std::optional<std::filesystem::path> hp;
                if (!a.hyperparams.empty()) hp = a.hyperparams;
                const auto r = pigp::cmd_reconstruct(cfg, in, out, modes, hp);
                for (auto k : r.failed) std::cerr << "[reconstruct] " << pigp::mode_key(k) << " failed, see manifest\n";
                if (!r.failed.empty()) rc = 3;
            } else if (stage == "metrics") {
                pigp::cmd_metrics(cfg, a.truth.empty() ? out : a.truth, a.pred.empty() ? out : a.pred, out, modes);
            } else {
                rc = pigp::cmd_pipeline(cfg, out, modes);
                if (rc != 0) std::cerr << "[pipeline] some modes failed to reconstruct, see manifest\n";
            }
        });
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pigp::exit_code_for(e);
    }
}
