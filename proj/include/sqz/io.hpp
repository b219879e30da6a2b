#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "sqz/spectral.hpp"
#include "sqz/tomography.hpp"

namespace sqz::io {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a of the canonical config string; stamped into every artifact so
// outputs are traceable to the run that produced them.
std::string fnv1a_hex(const std::string& text);

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

// "# squeezelab <version>; config=<hash>; seed=<seed>\n"
std::string provenance_header(const Provenance& p);

struct TimeSeries {
    std::vector<double> samples;
    double dt = 0.0;
    double theta = 0.0;
    double eta_d = 1.0;
    std::uint64_t seed = 0;
};

// Streaming writer for long records: the sample count is declared up front,
// samples are pushed in order, finish() verifies the count.
class TimeSeriesWriter {
  public:
    TimeSeriesWriter(const std::filesystem::path& path, bool binary, std::uint64_t n_samples,
                     double dt, double theta, double eta_d, const Provenance& prov);
    ~TimeSeriesWriter();
    TimeSeriesWriter(const TimeSeriesWriter&) = delete;
    TimeSeriesWriter& operator=(const TimeSeriesWriter&) = delete;

    void push(double sample);
    void finish();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// columns t,value with a provenance/header comment block
void write_timeseries_csv(const std::filesystem::path& path, std::span<const double> samples,
                          double dt, double theta, double eta_d, const Provenance& prov);

// compact binary layout: magic, version, hash, seed, dt, theta, eta_d, n, samples
void write_timeseries_binary(const std::filesystem::path& path, std::span<const double> samples,
                             double dt, double theta, double eta_d, const Provenance& prov);

// auto-detects binary vs CSV
TimeSeries read_timeseries(const std::filesystem::path& path);

void write_spectrum_csv(const std::filesystem::path& path, const spectral::Spectrum& spectrum,
                        const Provenance& prov);
spectral::Spectrum read_spectrum_csv(const std::filesystem::path& path);

void write_sinogram_csv(const std::filesystem::path& path, const tomo::Sinogram& sinogram,
                        const Provenance& prov);

void write_wigner_grid(const std::filesystem::path& path, const tomo::WignerGrid& grid,
                       const Provenance& prov);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace sqz::io
