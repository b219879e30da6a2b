#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ini.hpp"

namespace sqzlab {

struct AppOptions {
    std::string config_path;
    std::string preset;
    std::string out_dir = ".";
    std::string format = "binary";  // binary | csv
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string angles_spec;  // comma list, plain rad or "0.25pi"
    std::vector<std::string> inputs;

    // simulate overrides
    long long n_samples = 0;
    double dt = 0.0;
    double drive_amplitude = 0.0;
    double drive_freq_hz = 0.0;
    double theta_offset = 0.0;
    bool save_trajectory = false;

    // tomography overrides
    std::vector<double> center_freqs_hz;
    std::string shot_path;
};

// Each command returns 0 on success; failures are reported via the sqz
// exception taxonomy and mapped to exit codes in main().
int run_simulate(const AppOptions& options);
int run_fit(const AppOptions& options);
int run_tomography(const AppOptions& options);
int run_patterns(const AppOptions& options);
int run_pipeline(const AppOptions& options);

}  // namespace sqzlab
