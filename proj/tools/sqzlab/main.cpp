#include <CLI11.hpp>
#include <iostream>

#include "app.hpp"
#include "sqz/errors.hpp"

// exit codes: 0 ok, 2 usage, 3 configuration, 4 numerical failure, 5 I/O
namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitIo = 5;

void add_common(CLI::App* cmd, sqzlab::AppOptions& opt) {
    cmd->add_option("--config", opt.config_path, "INI config file");
    cmd->add_option("--preset", opt.preset, "parameter preset (paper-2021)");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "RNG seed")->each([&](const std::string&) {
        opt.seed_given = true;
    });
    cmd->add_option("--format", opt.format, "time-series format: binary|csv");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"squeezelab: ponderomotive-squeezing simulation and analysis"};
    app.require_subcommand(1);
    sqzlab::AppOptions opt;

    auto* simulate = app.add_subcommand(
        "simulate", "synthesize homodyne photocurrent records and a shot-noise reference");
    add_common(simulate, opt);
    simulate->add_option("--angles", opt.angles_spec,
                         "comma list of analyser angles, rad or '<x>pi'");
    simulate->add_option("--n-samples", opt.n_samples, "samples per record");
    simulate->add_option("--dt", opt.dt, "integration step, s");
    simulate->add_option("--drive-amp", opt.drive_amplitude, "sinusoidal force amplitude");
    simulate->add_option("--drive-freq-hz", opt.drive_freq_hz, "sinusoidal force frequency, Hz");
    simulate->add_option("--theta-offset", opt.theta_offset,
                         "additive analyser-angle offset, rad");
    simulate->add_flag("--save-trajectory", opt.save_trajectory,
                       "also write the position series");

    auto* fit = app.add_subcommand("fit", "simultaneous multi-angle fit of calibrated spectra");
    add_common(fit, opt);
    fit->add_option("spectra", opt.inputs, "spectrum CSV files");

    auto* tomography = app.add_subcommand(
        "tomography", "temporal-mode tomography of photocurrent records");
    add_common(tomography, opt);
    tomography->add_option("records", opt.inputs, "photocurrent records (>= 5 angles)");
    tomography->add_option("--center-freq-hz", opt.center_freqs_hz,
                           "temporal-mode center frequencies, Hz");
    tomography->add_option("--shot", opt.shot_path, "shot-noise record for the vacuum reference");

    auto* patterns = app.add_subcommand(
        "patterns", "angular information patterns and measurement-disturbance limits");
    add_common(patterns, opt);

    auto* pipeline = app.add_subcommand(
        "pipeline", "simulate -> calibrate -> fit -> tomography, end to end");
    add_common(pipeline, opt);
    pipeline->add_option("--angles", opt.angles_spec,
                         "comma list of analyser angles, rad or '<x>pi'");
    pipeline->add_option("--n-samples", opt.n_samples, "samples per angle");
    pipeline->add_option("--dt", opt.dt, "integration step, s");
    pipeline->add_option("--theta-offset", opt.theta_offset,
                         "additive analyser-angle offset, rad");
    pipeline->add_option("--center-freq-hz", opt.center_freqs_hz,
                         "temporal-mode center frequencies, Hz");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (simulate->parsed()) return sqzlab::run_simulate(opt);
        if (fit->parsed()) return sqzlab::run_fit(opt);
        if (tomography->parsed()) return sqzlab::run_tomography(opt);
        if (patterns->parsed()) return sqzlab::run_patterns(opt);
        if (pipeline->parsed()) return sqzlab::run_pipeline(opt);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const sqz::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sqz::ParamError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sqz::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sqz::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const sqz::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
