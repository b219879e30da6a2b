#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sqz::spectral {

struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
};

// Default shot-noise calibration band (75-85 kHz).
inline constexpr Band kShotBand{75e3, 85e3};

enum class Window { Hann, Rectangular };

// One-sided PSD over a strictly increasing frequency grid. Values are in
// shot-noise units once normalize_to_shot_noise has been applied.
struct Spectrum {
    std::vector<double> freqs_hz;
    std::vector<double> values;
    double theta_inferred = 0.0;
    std::optional<double> unbalance_voltage;

    void validate() const;
    double band_mean(Band band) const;
};

struct WelchParams {
    std::size_t segment_length = 1 << 14;
    double overlap = 0.5;
    Window window = Window::Hann;
};

// Streaming Welch estimator; feeds segments to FFTW as they fill, so record
// length is unbounded in memory.
class WelchAccumulator {
  public:
    WelchAccumulator(const WelchParams& params, double dt);
    ~WelchAccumulator();
    WelchAccumulator(WelchAccumulator&&) noexcept;
    WelchAccumulator& operator=(WelchAccumulator&&) noexcept;
    WelchAccumulator(const WelchAccumulator&) = delete;
    WelchAccumulator& operator=(const WelchAccumulator&) = delete;

    void push(double sample);
    void push(std::span<const double> samples);
    std::size_t segments() const;
    Spectrum finalize() const;  // throws UsageError if no complete segment

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Spectrum welch_psd(std::span<const double> series, double dt, const WelchParams& params);

// Averaged cross-spectrum S_xy(f) = norm * <X(f) conj(Y(f))>; with y the
// filtered image of x, S_xy = H(2 pi f) S_x for a causal response H built
// with the e^{+i omega tau} transform convention.
struct CrossSpectrum {
    std::vector<double> freqs_hz;
    std::vector<std::complex<double>> values;
};
CrossSpectrum welch_cross_psd(std::span<const double> x, std::span<const double> y, double dt,
                              const WelchParams& params);

Spectrum normalize_to_shot_noise(const Spectrum& spectrum, const Spectrum& shot_reference,
                                 Band band);

// LO unbalance calibration: relative excess background vs unbalance voltage,
// modelled as a parabola, plus the V_DC = v_off - v_amp cos(theta) angle map.
struct CalibrationModel {
    double c0 = 1.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double v_off = 0.0;
    double v_amp = 1.0;
    double v_min = 0.0;  // calibrated unbalance range
    double v_max = 0.0;

    double excess(double unbalance) const { return c0 + c1 * unbalance + c2 * unbalance * unbalance; }
};

CalibrationModel fit_calibration(std::span<const std::pair<double, double>> variance_vs_unbalance,
                                 double v_off, double v_amp);

struct SubtractResult {
    Spectrum spectrum;
    std::size_t floored_bins = 0;
    bool extrapolated = false;  // unbalance outside the calibrated range
};

SubtractResult subtract_classical_noise(const Spectrum& spectrum, const CalibrationModel& calib,
                                        double unbalance_voltage);

// theta = arccos((v_off - v_dc) / v_amp), in [0, pi].
double infer_angle(double v_dc, const CalibrationModel& calib);

struct FitInit {
    double gamma_m = 0.0;
    double gamma_tot = 0.0;
    double gamma_meas = 0.0;
    std::vector<double> omega_m;  // per spectrum; broadcast if size 1
    std::vector<double> theta;    // per spectrum; defaults to theta_inferred
};

struct FitResult {
    double gamma_m = 0.0;
    double gamma_tot = 0.0;
    double gamma_meas = 0.0;
    double gamma_m_err = 0.0;
    double gamma_tot_err = 0.0;
    double gamma_meas_err = 0.0;
    std::vector<double> omega_m;
    std::vector<double> omega_m_err;
    std::vector<double> theta;
    std::vector<double> theta_err;
    double cost = 0.0;              // weighted sum of squared residuals
    double reduced_chi_sq = 0.0;
    int iterations = 0;
    bool converged = false;
    bool eta_clamped = false;       // eta_meas hit 1 at the optimum
    double angle_slope = 0.0;       // fitted theta vs inferred theta line
    double angle_offset = 0.0;

    double eta_meas() const { return gamma_meas / gamma_tot; }
};

// Simultaneous weighted fit of all spectra to the homodyne PSD model over
// fit_band. gamma_m, gamma_tot, gamma_meas are shared; omega_m and theta are
// free per spectrum. Residuals are (data - model)/model.
FitResult fit_multi(const std::vector<Spectrum>& spectra, Band fit_band, const FitInit& init);

struct SensitivityFit {
    double amplitude = 0.0;
    double theta_offset = 0.0;  // response ~ |sin(theta - theta_offset)|
    double rms_residual = 0.0;
};

SensitivityFit sensitivity_curve(std::span<const std::pair<double, double>> theta_amplitude);

}  // namespace sqz::spectral
