#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqz/langevin.hpp"
#include "sqz/model.hpp"
#include "sqz/spectral.hpp"

namespace sqz::tomo {

// Windowed Fourier coefficients of photocurrent chunks, normalized so that a
// shot-noise-only record gives variance 1/2 per real component (vacuum
// s.d. 1/sqrt(2)). Real and imaginary parts are independent measurements of
// the same quadrature and are pooled by default.
struct TemporalModeSamples {
    std::vector<std::complex<double>> modes;
    double chunk_duration = 0.0;  // s
    double center_freq_hz = 0.0;
    double theta = 0.0;
    std::vector<std::string> warnings;

    // pooled Re/Im samples (2 per chunk)
    std::vector<double> quadrature_samples() const;
};

// Streaming extractor: push photocurrent samples, collect one complex mode
// amplitude per full chunk.
class ModeAccumulator {
  public:
    ModeAccumulator(double dt, double chunk_duration, double center_freq_hz,
                    spectral::Window window = spectral::Window::Hann);

    void push(double sample);
    const std::vector<std::complex<double>>& modes() const { return modes_; }
    std::size_t chunk_samples() const { return chunk_len_; }

  private:
    std::size_t chunk_len_;
    std::size_t pos_ = 0;
    double norm_;
    double phase_step_cos_, phase_step_sin_;
    double phasor_re_ = 1.0, phasor_im_ = 0.0;
    std::vector<double> window_;
    std::complex<double> acc_{0.0, 0.0};
    std::vector<std::complex<double>> modes_;
};

TemporalModeSamples extract_modes(const langevin::PhotocurrentRecord& record,
                                  double chunk_duration, double center_freq_hz,
                                  spectral::Window window = spectral::Window::Hann,
                                  std::optional<double> gamma_m = std::nullopt);

// Quadrature-marginal histograms versus analyser angle; columns are
// probability densities over the bin grid.
struct Sinogram {
    std::vector<double> angles;             // rad, spanning [0, pi]
    std::vector<double> bin_edges;          // symmetric about 0
    std::vector<std::vector<double>> density;  // [angle][bin]

    void validate() const;
    std::vector<double> bin_centers() const;
    double bin_width() const { return bin_edges[1] - bin_edges[0]; }
    // Gaussian-fit-free column variance (second moment of the density)
    double column_variance(std::size_t angle_index) const;
};

Sinogram build_sinogram(const std::vector<std::vector<double>>& samples_per_angle,
                        std::span<const double> angles, std::size_t bin_count,
                        double bin_halfrange);

struct WignerGrid {
    std::size_t size = 0;   // grid is size x size
    double extent = 0.0;    // values cover [-extent, extent]^2
    std::vector<double> values;

    double cell() const { return 2.0 * extent / static_cast<double>(size); }
    double coord(std::size_t i) const {
        return -extent + (static_cast<double>(i) + 0.5) * cell();
    }
    double& at(std::size_t ix, std::size_t iy) { return values[iy * size + ix]; }
    double at(std::size_t ix, std::size_t iy) const { return values[iy * size + ix]; }
    double mass() const;
};

// Forward Radon projection. Convention: the marginal at analyser angle theta
// is the density of the rotated coordinate s = x cos(theta) - y sin(theta);
// with this choice cov_xy = (V1 + V3)/2 - V2 inverts the marginal variances
// exactly.
std::vector<double> radon_project(const WignerGrid& grid, double theta,
                                  std::span<const double> bin_edges);

struct SartOptions {
    int sweeps = 10;
    double relaxation = 0.3;
};

struct SartResult {
    WignerGrid grid;
    std::vector<double> residuals;  // RMS projection residual after each sweep
};

// Simultaneous algebraic reconstruction of the distribution from its
// sinogram; result is renormalized to unit mass.
SartResult sart_reconstruct(const Sinogram& sinogram, std::size_t grid_size,
                            const SartOptions& options = {});

// Filtered backprojection, used as an independent cross-check reconstructor.
WignerGrid fbp_reconstruct(const Sinogram& sinogram, std::size_t grid_size);

struct CovarianceEllipse {
    double var_x = 0.0;
    double var_y = 0.0;
    double cov_xy = 0.0;
    bool physical = true;  // |cov| <= sqrt(var_x var_y)

    double minor_variance() const;
    double major_variance() const;
    double tilt() const;  // orientation of the major axis, rad
};

// <X^2> = V1, <Y^2> = V3, <XY> = (V1 + V3)/2 - V2 from the marginal variances
// at analyser angles 0, pi/4, pi/2.
CovarianceEllipse covariance_from_cuts(double v1, double v2, double v3);

// Model prediction for the temporal mode at a given center frequency:
// marginal variances are homodyne_psd/2 at the three cut angles.
CovarianceEllipse theoretical_covariance(double center_freq_hz, const model::ModelParams& params);

// Second moments of a reconstructed grid (about its centroid).
CovarianceEllipse grid_covariance(const WignerGrid& grid);

}  // namespace sqz::tomo
