// dce: batch exposure runs from a JSON configuration or a built-in preset.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "dce/errors.hpp"
#include "dce/pipeline.hpp"

namespace {

constexpr int kSchemaError = 2;
constexpr int kNumericalError = 3;

void add_overrides(CLI::App* cmd, dce::RunOverrides& o) {
    cmd->add_option("--seed", o.seed, "simulation seed (P uses seed + 1)");
    cmd->add_option("--paths", o.paths, "number of exposure paths M");
    cmd->add_option("--threads", o.threads, "worker threads, 0 = hardware");
    cmd->add_option("--out", o.out, "output directory");
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const dce::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << " [" << e.diagnostic() << "]\n";
        return kNumericalError;
    } catch (const dce::ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kSchemaError;
    } catch (const dce::ParameterError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kSchemaError;
    } catch (const dce::ScheduleError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kSchemaError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chebyshev exposure engine"};
    app.set_version_flag("--version", std::string(DCE_VERSION));
    app.require_subcommand(1);

    std::string config;
    dce::RunOverrides overrides;

    auto* run = app.add_subcommand("run", "simulate, price and write exposure profiles");
    run->add_option("config", config, "config file or preset name")->required();
    add_overrides(run, overrides);

    auto* cmp = app.add_subcommand("compare", "error and timing tables against the reference");
    cmp->add_option("config", config, "config file or preset name")->required();
    add_overrides(cmp, overrides);

    auto* dump = app.add_subcommand("moments-dump", "write the one-step moment matrix");
    dump->add_option("config", config, "config file or preset name")->required();
    add_overrides(dump, overrides);

    auto* presets = app.add_subcommand("presets", "print a built-in preset as JSON");
    std::string preset_name;
    presets->add_option("name", preset_name, "preset name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (presets->parsed()) {
        return guarded([&] {
            if (preset_name.empty()) {
                for (const auto& n : dce::preset_names()) std::cout << n << '\n';
            } else {
                std::cout << dce::preset(preset_name).dump(2) << '\n';
            }
        });
    }

    return guarded([&] {
        const auto cfg = dce::load_config(config, overrides);
        if (run->parsed()) {
            const auto res = dce::run(cfg);
            for (const auto& r : res.runs) std::printf("%-12s price %.6f\n", r.method.c_str(), r.price);
            std::printf("artifacts in %s\n", cfg.output_dir.c_str());
        } else if (cmp->parsed()) {
            const auto rows = dce::compare(cfg);
            std::printf("%-12s %12s %10s %10s %10s %10s %10s %9s %9s\n", "method", "price", "price_err", "EE_Q",
                        "PFE_Q", "EE_P", "PFE_P", "sec_Q", "sec_P");
            for (const auto& r : rows) {
                std::printf("%-12s %12.6f %10.2e %10.2e %10.2e %10.2e %10.2e %9.3f %9.3f\n", r.label.c_str(),
                            r.price, r.price_error, r.ee_price, r.pfe_price, r.ee_risk, r.pfe_risk, r.seconds_q,
                            r.seconds_p);
            }
            std::printf("tables in %s\n", cfg.output_dir.c_str());
        } else {
            std::printf("%s\n", dce::dump_moments(cfg).c_str());
        }
    });
}
