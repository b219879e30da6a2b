#include "sqz/spectral.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"

namespace sqz::spectral {

using constants::pi;
using constants::two_pi;

namespace {

std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> make_window(Window window, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (window == Window::Hann) {
        for (std::size_t i = 0; i < n; ++i)
            w[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n)));
    }
    return w;
}

}  // namespace

void Spectrum::validate() const {
    if (freqs_hz.size() != values.size()) throw UsageError("spectrum grid/value size mismatch");
    if (freqs_hz.empty()) throw UsageError("empty spectrum");
    for (std::size_t i = 1; i < freqs_hz.size(); ++i)
        if (!(freqs_hz[i] > freqs_hz[i - 1]))
            throw UsageError("spectrum frequency grid must be strictly increasing");
}

double Spectrum::band_mean(Band band) const {
    validate();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        if (freqs_hz[i] >= band.lo_hz && freqs_hz[i] <= band.hi_hz) {
            sum += values[i];
            ++count;
        }
    }
    if (count == 0) throw UsageError("no spectrum bins inside band");
    return sum / static_cast<double>(count);
}

struct WelchAccumulator::Impl {
    WelchParams params;
    double dt = 0.0;
    std::size_t hop = 0;
    std::vector<double> window;
    double window_power = 0.0;  // sum of squared window samples
    std::vector<double> buffer;
    std::size_t fill = 0;
    std::vector<double> psd_acc;
    std::size_t n_segments = 0;
    double* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;

    Impl(const WelchParams& p, double step) : params(p), dt(step) {
        if (p.segment_length < 8) throw UsageError("segment_length too short");
        if (!(p.overlap >= 0.0 && p.overlap < 1.0)) throw UsageError("overlap must be in [0,1)");
        if (!(step > 0.0)) throw UsageError("dt must be positive");
        hop = static_cast<std::size_t>(
            std::llround(static_cast<double>(p.segment_length) * (1.0 - p.overlap)));
        hop = std::clamp<std::size_t>(hop, 1, p.segment_length);
        window = make_window(p.window, p.segment_length);
        window_power = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);
        buffer.resize(p.segment_length);
        psd_acc.assign(p.segment_length / 2 + 1, 0.0);
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        in = fftw_alloc_real(p.segment_length);
        out = fftw_alloc_complex(p.segment_length / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(p.segment_length), in, out, FFTW_ESTIMATE);
    }

    ~Impl() {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        if (plan) fftw_destroy_plan(plan);
        if (in) fftw_free(in);
        if (out) fftw_free(out);
    }

    void process_segment() {
        for (std::size_t i = 0; i < buffer.size(); ++i) in[i] = buffer[i] * window[i];
        fftw_execute(plan);
        for (std::size_t k = 0; k < psd_acc.size(); ++k)
            psd_acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        ++n_segments;
        // retain the overlapping tail
        const std::size_t keep = buffer.size() - hop;
        std::copy(buffer.end() - static_cast<std::ptrdiff_t>(keep), buffer.end(), buffer.begin());
        fill = keep;
    }

    void push(double sample) {
        buffer[fill++] = sample;
        if (fill == buffer.size()) process_segment();
    }

    Spectrum finalize() const {
        if (n_segments == 0) throw UsageError("welch: series shorter than one segment");
        Spectrum s;
        const std::size_t n = params.segment_length;
        const double df = 1.0 / (static_cast<double>(n) * dt);
        const double scale = 2.0 * dt / (window_power * static_cast<double>(n_segments));
        s.freqs_hz.resize(psd_acc.size());
        s.values.resize(psd_acc.size());
        for (std::size_t k = 0; k < psd_acc.size(); ++k) {
            s.freqs_hz[k] = df * static_cast<double>(k);
            double v = scale * psd_acc[k];
            if (k == 0 || 2 * k == n) v *= 0.5;  // DC and Nyquist are not doubled
            s.values[k] = v;
        }
        return s;
    }
};

WelchAccumulator::WelchAccumulator(const WelchParams& params, double dt)
    : impl_(std::make_unique<Impl>(params, dt)) {}
WelchAccumulator::~WelchAccumulator() = default;
WelchAccumulator::WelchAccumulator(WelchAccumulator&&) noexcept = default;
WelchAccumulator& WelchAccumulator::operator=(WelchAccumulator&&) noexcept = default;

void WelchAccumulator::push(double sample) { impl_->push(sample); }

void WelchAccumulator::push(std::span<const double> samples) {
    for (double s : samples) impl_->push(s);
}

std::size_t WelchAccumulator::segments() const { return impl_->n_segments; }

Spectrum WelchAccumulator::finalize() const { return impl_->finalize(); }

Spectrum welch_psd(std::span<const double> series, double dt, const WelchParams& params) {
    if (series.empty()) throw UsageError("welch_psd: empty series");
    if (params.segment_length > series.size())
        throw UsageError("welch_psd: segment longer than series");
    WelchAccumulator acc(params, dt);
    acc.push(series);
    return acc.finalize();
}

CrossSpectrum welch_cross_psd(std::span<const double> x, std::span<const double> y, double dt,
                              const WelchParams& params) {
    if (x.size() != y.size()) throw UsageError("welch_cross_psd: series lengths differ");
    const std::size_t n = params.segment_length;
    if (n > x.size()) throw UsageError("welch_cross_psd: segment longer than series");
    const std::size_t hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - params.overlap))));
    const std::vector<double> w = make_window(params.window, n);
    const double wp = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);

    double* in = nullptr;
    fftw_complex* out_x = nullptr;
    fftw_complex* out_y = nullptr;
    fftw_plan plan = nullptr;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        in = fftw_alloc_real(n);
        out_x = fftw_alloc_complex(n / 2 + 1);
        out_y = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out_x, FFTW_ESTIMATE);
    }

    std::vector<std::complex<double>> acc(n / 2 + 1, 0.0);
    std::size_t count = 0;
    for (std::size_t start = 0; start + n <= x.size(); start += hop) {
        for (std::size_t i = 0; i < n; ++i) in[i] = x[start + i] * w[i];
        fftw_execute_dft_r2c(plan, in, out_x);
        for (std::size_t i = 0; i < n; ++i) in[i] = y[start + i] * w[i];
        fftw_execute_dft_r2c(plan, in, out_y);
        for (std::size_t k = 0; k <= n / 2; ++k) {
            const std::complex<double> xs(out_x[k][0], out_x[k][1]);
            const std::complex<double> ys(out_y[k][0], out_y[k][1]);
            acc[k] += xs * std::conj(ys);
        }
        ++count;
    }
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out_x);
        fftw_free(out_y);
    }
    CrossSpectrum cs;
    const double df = 1.0 / (static_cast<double>(n) * dt);
    const double scale = 2.0 * dt / (wp * static_cast<double>(count));
    cs.freqs_hz.resize(acc.size());
    cs.values.resize(acc.size());
    for (std::size_t k = 0; k < acc.size(); ++k) {
        cs.freqs_hz[k] = df * static_cast<double>(k);
        cs.values[k] = scale * acc[k];
    }
    return cs;
}

Spectrum normalize_to_shot_noise(const Spectrum& spectrum, const Spectrum& shot_reference,
                                 Band band) {
    spectrum.validate();
    shot_reference.validate();
    if (spectrum.freqs_hz.size() != shot_reference.freqs_hz.size())
        throw UsageError("normalize: spectra must share a frequency grid");
    for (std::size_t i = 0; i < spectrum.freqs_hz.size(); ++i)
        if (std::abs(spectrum.freqs_hz[i] - shot_reference.freqs_hz[i]) >
            1e-9 * (1.0 + std::abs(spectrum.freqs_hz[i])))
            throw UsageError("normalize: spectra must share a frequency grid");
    const double ref = shot_reference.band_mean(band);
    if (!(ref > 0.0)) throw NumericalError("normalize: shot reference mean is not positive");
    Spectrum out = spectrum;
    for (double& v : out.values) v /= ref;
    return out;
}

CalibrationModel fit_calibration(std::span<const std::pair<double, double>> variance_vs_unbalance,
                                 double v_off, double v_amp) {
    if (variance_vs_unbalance.size() < 3)
        throw UsageError("fit_calibration needs at least 3 samples");
    if (!(v_amp > 0.0)) throw ParamError("v_amp must be positive");
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    double lo = variance_vs_unbalance.front().first;
    double hi = lo;
    for (const auto& [v, rel] : variance_vs_unbalance) {
        const Eigen::Vector3d row(1.0, v, v * v);
        ata += row * row.transpose();
        atb += row * rel;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const Eigen::Vector3d c = ata.ldlt().solve(atb);
    CalibrationModel m;
    m.c0 = c[0];
    m.c1 = c[1];
    m.c2 = c[2];
    m.v_off = v_off;
    m.v_amp = v_amp;
    m.v_min = lo;
    m.v_max = hi;
    return m;
}

SubtractResult subtract_classical_noise(const Spectrum& spectrum, const CalibrationModel& calib,
                                        double unbalance_voltage) {
    spectrum.validate();
    SubtractResult result;
    result.extrapolated =
        unbalance_voltage < calib.v_min || unbalance_voltage > calib.v_max;
    const double excess = calib.excess(unbalance_voltage) - 1.0;
    result.spectrum = spectrum;
    for (double& v : result.spectrum.values) {
        v -= excess;
        if (v < 0.0) {
            v = 0.0;
            ++result.floored_bins;
        }
    }
    return result;
}

double infer_angle(double v_dc, const CalibrationModel& calib) {
    const double x = (calib.v_off - v_dc) / calib.v_amp;
    if (std::abs(x) > 1.0 + 1e-12)
        throw ParamError("infer_angle: V_DC outside [v_off - v_amp, v_off + v_amp]");
    return std::acos(std::clamp(x, -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// simultaneous multi-angle fit

namespace {

struct PsdDerivs {
    double s;
    double d_gamma_m;
    double d_gamma_tot;
    double d_gamma_meas;
    double d_omega_m;
    double d_theta;
};

PsdDerivs psd_with_derivs(double omega, double theta, double gamma_m, double gamma_tot,
                          double gamma_meas, double omega_m) {
    const std::complex<double> d(omega_m * omega_m - omega * omega, -gamma_m * omega);
    const std::complex<double> chi = omega_m / d;
    const std::complex<double> inv_d2 = 1.0 / (d * d);
    const std::complex<double> dchi_dgamma = std::complex<double>(0.0, omega) * omega_m * inv_d2;
    const std::complex<double> dchi_domega = (d - 2.0 * omega_m * omega_m) * inv_d2;

    const double abs2 = std::norm(chi);
    const double re = chi.real();
    const double s2 = std::sin(theta) * std::sin(theta);
    const double s2t = std::sin(2.0 * theta);

    const double d_abs2_dgamma = 2.0 * (std::conj(chi) * dchi_dgamma).real();
    const double d_abs2_domega = 2.0 * (std::conj(chi) * dchi_domega).real();

    PsdDerivs out;
    out.s = 1.0 + 16.0 * gamma_meas * gamma_tot * s2 * abs2 + 4.0 * gamma_meas * re * s2t;
    out.d_gamma_meas = 16.0 * gamma_tot * s2 * abs2 + 4.0 * re * s2t;
    out.d_gamma_tot = 16.0 * gamma_meas * s2 * abs2;
    out.d_gamma_m = 16.0 * gamma_meas * gamma_tot * s2 * d_abs2_dgamma +
                    4.0 * gamma_meas * s2t * dchi_dgamma.real();
    out.d_omega_m = 16.0 * gamma_meas * gamma_tot * s2 * d_abs2_domega +
                    4.0 * gamma_meas * s2t * dchi_domega.real();
    out.d_theta = 16.0 * gamma_meas * gamma_tot * abs2 * std::sin(2.0 * theta) +
                  8.0 * gamma_meas * re * std::cos(2.0 * theta);
    return out;
}

struct FitWorkspace {
    const std::vector<Spectrum>* spectra;
    std::vector<std::vector<std::size_t>> band_bins;  // indices inside the fit band
    std::size_t n_residuals = 0;
    std::size_t n_params = 0;
};

// Residuals are (data - model) * w with weights w = 1/model frozen at the
// previously accepted iterate (iteratively reweighted least squares). Frozen
// weights keep the estimating equations unbiased for averaged periodograms;
// differentiating the weight would bias the optimum by O(1/segments).
// parameter vector layout: [ln gm, ln gt, ln gmeas, (ln om_i, theta_i) x K]
double evaluate(const FitWorkspace& ws, const Eigen::VectorXd& p,
                const std::vector<double>& weights, Eigen::MatrixXd* jtj, Eigen::VectorXd* jtr,
                std::vector<double>* model_out) {
    const double gm = std::exp(p[0]);
    const double gt = std::exp(p[1]);
    const double gmeas = std::exp(p[2]);
    double cost = 0.0;
    if (jtj) {
        jtj->setZero();
        jtr->setZero();
    }
    Eigen::VectorXd row(ws.n_params);
    std::size_t res = 0;
    for (std::size_t i = 0; i < ws.spectra->size(); ++i) {
        const Spectrum& sp = (*ws.spectra)[i];
        const double om = std::exp(p[3 + 2 * i]);
        const double th = p[4 + 2 * i];
        for (std::size_t bin : ws.band_bins[i]) {
            const double omega = two_pi * sp.freqs_hz[bin];
            const PsdDerivs m = psd_with_derivs(omega, th, gm, gt, gmeas, om);
            const double w = weights[res];
            if (model_out) (*model_out)[res] = m.s;
            const double r = (sp.values[bin] - m.s) * w;
            cost += r * r;
            if (jtj) {
                row.setZero();
                row[0] = -w * m.d_gamma_m * gm;
                row[1] = -w * m.d_gamma_tot * gt;
                row[2] = -w * m.d_gamma_meas * gmeas;
                row[3 + 2 * static_cast<Eigen::Index>(i)] = -w * m.d_omega_m * om;
                row[4 + 2 * static_cast<Eigen::Index>(i)] = -w * m.d_theta;
                // rank-1 update restricted to the 5 nonzero entries
                const Eigen::Index idx[5] = {0, 1, 2, 3 + 2 * static_cast<Eigen::Index>(i),
                                             4 + 2 * static_cast<Eigen::Index>(i)};
                for (int a = 0; a < 5; ++a) {
                    (*jtr)[idx[a]] += row[idx[a]] * r;
                    for (int b = 0; b < 5; ++b)
                        (*jtj)(idx[a], idx[b]) += row[idx[a]] * row[idx[b]];
                }
            }
            ++res;
        }
    }
    return cost;
}

}  // namespace

FitResult fit_multi(const std::vector<Spectrum>& spectra, Band fit_band, const FitInit& init) {
    if (spectra.size() < 3) throw UsageError("fit_multi needs at least 3 spectra");
    if (!(init.gamma_m > 0.0 && init.gamma_tot > 0.0 && init.gamma_meas > 0.0))
        throw ParamError("fit_multi: initial rates must be positive");

    const std::size_t n_spectra = spectra.size();
    FitWorkspace ws;
    ws.spectra = &spectra;
    ws.band_bins.resize(n_spectra);
    for (std::size_t i = 0; i < n_spectra; ++i) {
        spectra[i].validate();
        for (std::size_t k = 0; k < spectra[i].freqs_hz.size(); ++k)
            if (spectra[i].freqs_hz[k] >= fit_band.lo_hz && spectra[i].freqs_hz[k] <= fit_band.hi_hz)
                ws.band_bins[i].push_back(k);
        if (ws.band_bins[i].size() < 8)
            throw UsageError("fit_multi: fewer than 8 bins in the fit band for a spectrum");
        ws.n_residuals += ws.band_bins[i].size();
    }
    ws.n_params = 3 + 2 * n_spectra;
    if (ws.n_residuals <= ws.n_params) throw UsageError("fit_multi: underdetermined fit");

    Eigen::VectorXd p(ws.n_params);
    p[0] = std::log(init.gamma_m);
    p[1] = std::log(init.gamma_tot);
    p[2] = std::log(init.gamma_meas);
    for (std::size_t i = 0; i < n_spectra; ++i) {
        double om = 0.0;
        if (init.omega_m.size() == 1)
            om = init.omega_m[0];
        else if (init.omega_m.size() == n_spectra)
            om = init.omega_m[i];
        else
            throw UsageError("fit_multi: omega_m init must have size 1 or match spectra");
        if (!(om > 0.0)) throw ParamError("fit_multi: initial omega_m must be positive");
        p[3 + 2 * i] = std::log(om);
        double th = spectra[i].theta_inferred;
        if (init.theta.size() == n_spectra) th = init.theta[i];
        p[4 + 2 * i] = th;
    }

    Eigen::MatrixXd jtj(ws.n_params, ws.n_params);
    Eigen::VectorXd jtr(ws.n_params);
    std::vector<double> model(ws.n_residuals, 1.0);
    std::vector<double> weights(ws.n_residuals, 1.0);
    evaluate(ws, p, weights, nullptr, nullptr, &model);
    for (std::size_t r = 0; r < ws.n_residuals; ++r)
        weights[r] = 1.0 / std::max(model[r], 1e-3);
    double cost = evaluate(ws, p, weights, &jtj, &jtr, nullptr);

    double lambda = 1e-3;
    bool converged = false;
    int iterations = 0;
    int stalled = 0;
    for (; iterations < 400 && !converged; ++iterations) {
        Eigen::MatrixXd damped = jtj;
        for (std::size_t d = 0; d < ws.n_params; ++d)
            damped(d, d) += lambda * std::max(jtj(d, d), 1e-30);
        const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
        if (!delta.allFinite())
            throw NumericalError("fit_multi: singular normal equations");
        const Eigen::VectorXd trial = p + delta;
        const double trial_cost = evaluate(ws, trial, weights, nullptr, nullptr, nullptr);
        if (trial_cost <= cost) {
            const double step = delta.cwiseAbs().maxCoeff();
            const double improvement = cost - trial_cost;
            p = trial;
            // refresh the weights at the accepted iterate
            evaluate(ws, p, weights, nullptr, nullptr, &model);
            for (std::size_t r = 0; r < ws.n_residuals; ++r)
                weights[r] = 1.0 / std::max(model[r], 1e-3);
            cost = evaluate(ws, p, weights, &jtj, &jtr, nullptr);
            lambda = std::max(lambda / 3.0, 1e-12);
            stalled = improvement < 1e-12 * (1.0 + cost) ? stalled + 1 : 0;
            if (step < 1e-9 || stalled >= 3) converged = true;
        } else {
            lambda *= 8.0;
            if (lambda > 1e12)
                throw NumericalError("fit_multi did not converge: residual cost " +
                                     std::to_string(cost) + " after " +
                                     std::to_string(iterations) + " iterations");
        }
    }
    if (!converged)
        throw NumericalError("fit_multi did not converge: residual cost " + std::to_string(cost));

    FitResult result;
    result.gamma_m = std::exp(p[0]);
    result.gamma_tot = std::exp(p[1]);
    result.gamma_meas = std::exp(p[2]);
    result.cost = cost;
    result.iterations = iterations;
    result.converged = true;
    result.reduced_chi_sq =
        cost / static_cast<double>(ws.n_residuals - ws.n_params);

    // covariance-based standard errors
    const double sigma_sq = result.reduced_chi_sq;
    Eigen::MatrixXd cov = jtj.ldlt().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(ws.n_params),
                                  static_cast<Eigen::Index>(ws.n_params)));
    cov *= sigma_sq;
    auto err = [&](std::size_t i) {
        const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        return v > 0.0 ? std::sqrt(v) : 0.0;
    };
    result.gamma_m_err = result.gamma_m * err(0);
    result.gamma_tot_err = result.gamma_tot * err(1);
    result.gamma_meas_err = result.gamma_meas * err(2);
    result.omega_m.resize(n_spectra);
    result.omega_m_err.resize(n_spectra);
    result.theta.resize(n_spectra);
    result.theta_err.resize(n_spectra);
    for (std::size_t i = 0; i < n_spectra; ++i) {
        result.omega_m[i] = std::exp(p[3 + 2 * i]);
        result.omega_m_err[i] = result.omega_m[i] * err(3 + 2 * i);
        result.theta[i] = p[4 + 2 * i];
        result.theta_err[i] = err(4 + 2 * i);
    }

    if (result.gamma_meas > result.gamma_tot) {
        result.gamma_meas = result.gamma_tot;
        result.eta_clamped = true;
    }

    // fitted vs inferred angle relationship
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n_spectra; ++i) {
        const double x = spectra[i].theta_inferred;
        const double y = result.theta[i];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(n_spectra);
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) > 1e-12) {
        result.angle_slope = (n * sxy - sx * sy) / denom;
        result.angle_offset = (sy - result.angle_slope * sx) / n;
    }
    return result;
}

SensitivityFit sensitivity_curve(std::span<const std::pair<double, double>> theta_amplitude) {
    if (theta_amplitude.size() < 4) throw UsageError("sensitivity_curve needs >= 4 angle points");
    double max_amp = 0.0;
    for (const auto& [th, a] : theta_amplitude) max_amp = std::max(max_amp, std::abs(a));
    if (!(max_amp > 0.0)) throw NumericalError("sensitivity_curve: degenerate (all-zero) data");

    auto cost_at = [&](double theta0, double* amp_out) {
        double num = 0.0, den = 0.0;
        for (const auto& [th, a] : theta_amplitude) {
            const double s = std::abs(std::sin(th - theta0));
            num += a * s;
            den += s * s;
        }
        if (den <= 0.0) return std::numeric_limits<double>::infinity();
        const double amp = num / den;
        double c = 0.0;
        for (const auto& [th, a] : theta_amplitude) {
            const double r = a - amp * std::abs(std::sin(th - theta0));
            c += r * r;
        }
        if (amp_out) *amp_out = amp;
        return c;
    };

    double best_theta0 = 0.0;
    double best_cost = std::numeric_limits<double>::infinity();
    const int n_scan = 4000;
    for (int i = 0; i < n_scan; ++i) {
        const double t0 = -0.5 * pi + pi * i / n_scan;
        const double c = cost_at(t0, nullptr);
        if (c < best_cost) {
            best_cost = c;
            best_theta0 = t0;
        }
    }
    // golden-section polish
    double lo = best_theta0 - pi / n_scan;
    double hi = best_theta0 + pi / n_scan;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = cost_at(x1, nullptr), f2 = cost_at(x2, nullptr);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = cost_at(x1, nullptr);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = cost_at(x2, nullptr);
        }
    }
    SensitivityFit fit;
    fit.theta_offset = 0.5 * (lo + hi);
    const double c = cost_at(fit.theta_offset, &fit.amplitude);
    fit.rms_residual = std::sqrt(c / static_cast<double>(theta_amplitude.size()));
    return fit;
}

}  // namespace sqz::spectral
