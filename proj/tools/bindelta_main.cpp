#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bindelta/experiment.hpp"
#include "bindelta/kernels.hpp"
#include "bindelta/selftest.hpp"
#include "bindelta/version.hpp"

namespace {

using bindelta::experiment::ExperimentConfig;

struct CommonFlags {
    std::string config_path;
    std::string variant;
    std::optional<std::size_t> k;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> trials;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
    cmd->add_option("--variant", f.variant,
                    "model tag: R_E R_G C M_S M_G M_R M_P M_S+ M_G+ M_R+ M_P+");
    cmd->add_option("--K", f.k, "pose-bin count");
    cmd->add_option("--alpha", f.alpha, "classification/regression weight");
    cmd->add_option("--gamma", f.gamma, "soft-assignment sharpness (<=0: auto)");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--trials", f.trials, "seeds per setting");
    cmd->add_option("--out", f.out, "output directory");
}

ExperimentConfig build_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty())
        cfg = bindelta::experiment::load_config_file(f.config_path);
    if (!f.variant.empty()) {
        const auto v = bindelta::models::parse_variant(f.variant);
        if (!v) throw CLI::ValidationError("--variant", "unknown variant " + f.variant);
        cfg.variant = *v;
    }
    if (f.k) cfg.k = *f.k;
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.gamma) cfg.gamma = *f.gamma;
    if (f.seed) cfg.seed = *f.seed;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.trials) cfg.trials = *f.trials;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bin-and-delta 3D rotation estimation experiments"};
    app.set_version_flag("--version", bindelta::kVersion);
    app.require_subcommand(1);

    CommonFlags f;
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::string model_dir;

    CLI::App* discretize =
        app.add_subcommand("discretize", "fit pose dictionaries and report quantization floors");
    add_common(discretize, f);

    CLI::App* train = app.add_subcommand("train", "train a model and evaluate the held-out split");
    add_common(train, f);

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a saved model bundle on a dataset");
    add_common(evalc, f);
    evalc->add_option("--model", model_dir, "model bundle directory")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "sweep K or alpha, several seeds each");
    add_common(ablate, f);
    ablate->add_option("--sweep", sweep_param, "parameter to sweep: K or alpha");
    ablate->add_option("--values", sweep_values, "sweep values");

    CLI::App* selftest = app.add_subcommand("selftest", "run the full property suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) {
            const auto results = bindelta::selftest::run_all_checks();
            std::cout << "kernel backend: " << bindelta::kernels::backend_name() << "\n";
            return bindelta::selftest::report(results, std::cout) ? 0 : 3;
        }
        ExperimentConfig cfg = build_config(f);
        if (discretize->parsed()) return bindelta::experiment::cmd_discretize(cfg);
        if (train->parsed()) return bindelta::experiment::cmd_train(cfg);
        if (evalc->parsed()) return bindelta::experiment::cmd_eval(cfg, model_dir);
        if (ablate->parsed()) {
            if (!sweep_param.empty()) cfg.sweep_parameter = sweep_param;
            if (!sweep_values.empty()) cfg.sweep_values = sweep_values;
            return bindelta::experiment::cmd_ablate(cfg);
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "usage error: config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
