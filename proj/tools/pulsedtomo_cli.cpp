#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace pulsedtomo;

namespace {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_shortfall = 3, exit_fit = 4, exit_other = 1 };

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trains;
    std::optional<std::string> out;
    std::optional<int> threads;
};

ExperimentConfig resolve_config(const GlobalOptions& opt) {
    ExperimentConfig cfg = opt.config_path.empty() ? default_config() : load_config(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.trains) cfg.trains = *opt.trains;
    if (opt.out) cfg.output_dir = *opt.out;
    if (opt.threads) cfg.threads = *opt.threads;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulsed optomechanical state tomography simulator"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    GlobalOptions opt;
    app.add_option("-c,--config", opt.config_path, "TOML experiment config (defaults built in)")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "Master seed");
    app.add_option("--trains", opt.trains, "Number of pulse trains")->check(CLI::PositiveNumber);
    app.add_option("--out", opt.out, "Output directory");
    app.add_option("--threads", opt.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

    using Command = nlohmann::json (*)(const Experiment&);
    const std::pair<const char*, Command> commands[] = {
        {"thermal", cmd_thermal},
        {"tomo", cmd_tomo},
        {"decoherence", cmd_decoherence},
        {"noise-floor", cmd_noise_floor},
        {"sweep", cmd_sweep},
    };
    const char* descriptions[] = {
        "Thermal histogram and detector calibration",
        "Conditional marginals and phase-space reconstruction over the angle grid",
        "Width growth at theta = 2 n pi and decay-rate fit",
        "Off-resonant reference measurement of the imprecision",
        "Post-selection threshold sweep",
    };
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i)
        subs.push_back(app.add_subcommand(commands[i].first, descriptions[i]));

    CLI11_PARSE(app, argc, argv);

    try {
        const Experiment exp(resolve_config(opt));
        for (const auto& w : exp.warnings) std::cerr << "warning: " << w << '\n';
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const nlohmann::json summary = commands[i].second(exp);
            std::cout << summary.dump(2) << '\n';
        }
        return exit_ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return exit_config;
    } catch (const Shortfall& e) {
        std::cerr << "shortfall: " << e.what() << '\n';
        return exit_shortfall;
    } catch (const StatisticsError& e) {
        std::cerr << "shortfall: " << e.what() << '\n';
        return exit_shortfall;
    } catch (const FitFailure& e) {
        std::cerr << "fit failure: " << e.what() << '\n' << e.diagnostics() << '\n';
        return exit_fit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_other;
    }
}
