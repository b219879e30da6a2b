#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"
#include "sqz/model.hpp"
#include "sqz/rng.hpp"
#include "sqz/spectral.hpp"

using namespace sqz;
using sqz::constants::pi;
using sqz::constants::two_pi;

namespace {

std::vector<double> white_noise(std::size_t n, double sd, std::uint64_t seed,
                                std::uint32_t channel = 0) {
    rng::GaussianChannel ch(seed, 0, channel);
    std::vector<double> v(n);
    for (auto& x : v) x = sd * ch.next();
    return v;
}

model::ModelParams paper_params() {
    return model::ModelParams::from_rates(two_pi * 73.25e3, two_pi * 40.0, two_pi * 5.0e3,
                                          two_pi * 1.4e3);
}

spectral::Spectrum analytic_spectrum(const model::ModelParams& p, double theta,
                                     double theta_inferred) {
    spectral::Spectrum s;
    for (double f = 48e3; f <= 98e3; f += 10.0) {
        s.freqs_hz.push_back(f);
        s.values.push_back(model::homodyne_psd(two_pi * f, theta, p));
    }
    s.theta_inferred = theta_inferred;
    return s;
}

}  // namespace

TEST_CASE("welch estimator") {
    const double dt = 1e-6;
    SUBCASE("white noise is flat at 2 c dt / dt = 2 c") {
        // per-step variance c/dt with c = 0.5 -> unit one-sided PSD
        const auto noise = white_noise(1 << 19, std::sqrt(0.5 / dt), 7);
        spectral::WelchParams wp;
        wp.segment_length = 1 << 12;
        const auto psd = spectral::welch_psd(noise, dt, wp);
        CHECK(psd.band_mean({1e3, 0.49e6}) == doctest::Approx(1.0).epsilon(0.01));
    }
    SUBCASE("Parseval: integrated PSD equals the variance") {
        const auto noise = white_noise(1 << 18, 1.7, 11);
        spectral::WelchParams wp;
        wp.segment_length = 1 << 11;
        const auto psd = spectral::welch_psd(noise, dt, wp);
        const double df = psd.freqs_hz[1] - psd.freqs_hz[0];
        const double integral =
            std::accumulate(psd.values.begin(), psd.values.end(), 0.0) * df;
        double var = 0.0;
        for (double x : noise) var += x * x;
        var /= static_cast<double>(noise.size());
        CHECK(integral == doctest::Approx(var).epsilon(0.01));
    }
    SUBCASE("sinusoid carries integrated power a^2/2") {
        const double a = 3.0;
        const double f0 = 125e3;
        std::vector<double> tone(1 << 18);
        for (std::size_t k = 0; k < tone.size(); ++k)
            tone[k] = a * std::cos(two_pi * f0 * static_cast<double>(k) * dt);
        spectral::WelchParams wp;
        wp.segment_length = 1 << 12;
        const auto psd = spectral::welch_psd(tone, dt, wp);
        const double df = psd.freqs_hz[1] - psd.freqs_hz[0];
        double peak = 0.0;
        for (std::size_t k = 0; k < psd.values.size(); ++k)
            if (std::abs(psd.freqs_hz[k] - f0) < 6.0 * df) peak += psd.values[k] * df;
        CHECK(peak == doctest::Approx(0.5 * a * a).epsilon(0.02));
    }
    SUBCASE("usage errors") {
        std::vector<double> empty;
        spectral::WelchParams wp;
        CHECK_THROWS_AS(spectral::welch_psd(empty, dt, wp), UsageError);
        std::vector<double> tiny(16, 0.0);
        wp.segment_length = 64;
        CHECK_THROWS_AS(spectral::welch_psd(tiny, dt, wp), UsageError);
    }
    SUBCASE("streaming accumulator matches the batch estimate") {
        const auto noise = white_noise(1 << 15, 2.0, 3);
        spectral::WelchParams wp;
        wp.segment_length = 1 << 10;
        const auto batch = spectral::welch_psd(noise, dt, wp);
        spectral::WelchAccumulator acc(wp, dt);
        for (double x : noise) acc.push(x);
        const auto streamed = acc.finalize();
        CHECK(streamed.values == batch.values);
    }
}

TEST_CASE("shot-noise normalization") {
    const double dt = 1e-6;
    spectral::WelchParams wp;
    wp.segment_length = 1 << 12;
    const auto ref = spectral::welch_psd(white_noise(1 << 19, 3.0, 21), dt, wp);
    SUBCASE("self-normalization is exactly unity over the band") {
        const auto unit = spectral::normalize_to_shot_noise(ref, ref, {75e3, 85e3});
        CHECK(unit.band_mean({75e3, 85e3}) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("independent shot record normalizes to one") {
        const auto other = spectral::welch_psd(white_noise(1 << 19, 3.0, 22), dt, wp);
        const auto norm = spectral::normalize_to_shot_noise(other, ref, {75e3, 85e3});
        CHECK(norm.band_mean({10e3, 400e3}) == doctest::Approx(1.0).epsilon(0.02));
    }
    SUBCASE("grid mismatch rejected") {
        auto other = ref;
        other.freqs_hz.pop_back();
        other.values.pop_back();
        CHECK_THROWS_AS(spectral::normalize_to_shot_noise(ref, other, {75e3, 85e3}), UsageError);
    }
    SUBCASE("empty band rejected") {
        CHECK_THROWS_AS(spectral::normalize_to_shot_noise(ref, ref, {1e6, 2e6}), UsageError);
    }
}

TEST_CASE("LO excess-noise calibration") {
    // known parabola, kept within the 5% bound over the operating range
    spectral::CalibrationModel truth;
    truth.c0 = 1.0;
    truth.c1 = 0.008;
    truth.c2 = 0.027;
    truth.v_off = 0.3;
    truth.v_amp = 1.2;
    truth.v_min = -1.2;
    truth.v_max = 1.2;

    SUBCASE("parabola fit recovers the coefficients") {
        std::vector<std::pair<double, double>> samples;
        std::mt19937_64 gen(5);
        std::normal_distribution<double> jitter(0.0, 2e-4);
        for (double v = -1.2; v <= 1.2001; v += 0.15)
            samples.emplace_back(v, truth.excess(v) + jitter(gen));
        const auto fit = spectral::fit_calibration(samples, truth.v_off, truth.v_amp);
        CHECK(fit.c0 == doctest::Approx(truth.c0).epsilon(1e-3));
        CHECK(fit.c1 == doctest::Approx(truth.c1).epsilon(0.05));
        CHECK(fit.c2 == doctest::Approx(truth.c2).epsilon(0.05));
        CHECK(fit.v_min == doctest::Approx(-1.2));
        CHECK(fit.v_max == doctest::Approx(1.2));
    }
    SUBCASE("excess stays within the 5% bound over the range") {
        for (double v = truth.v_min; v <= truth.v_max; v += 0.01)
            CHECK(truth.excess(v) - 1.0 <= 0.05);
    }
    SUBCASE("balanced spectrum is unchanged") {
        spectral::Spectrum s;
        s.freqs_hz = {1.0, 2.0, 3.0};
        s.values = {1.0, 1.2, 0.9};
        const auto r = spectral::subtract_classical_noise(s, truth, 0.0);
        CHECK(r.spectrum.values == s.values);
        CHECK(r.floored_bins == 0);
        CHECK_FALSE(r.extrapolated);
    }
    SUBCASE("injected flat excess is removed") {
        const double v = 0.9;
        const double excess = truth.excess(v) - 1.0;
        spectral::Spectrum s;
        for (double f = 1e3; f < 400e3; f += 500.0) {
            s.freqs_hz.push_back(f);
            s.values.push_back(1.0 + excess);
        }
        const auto r = spectral::subtract_classical_noise(s, truth, v);
        CHECK(r.spectrum.band_mean({1e3, 400e3}) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("flooring and extrapolation are reported") {
        spectral::Spectrum s;
        s.freqs_hz = {1.0, 2.0};
        s.values = {0.001, 1.0};
        const auto r = spectral::subtract_classical_noise(s, truth, 1.5);
        CHECK(r.extrapolated);
        CHECK(r.floored_bins == 1);
        CHECK(r.spectrum.values[0] == 0.0);
    }
    SUBCASE("normalization and subtraction commute with flat rescaling") {
        const double dt = 1e-6;
        spectral::WelchParams wp;
        wp.segment_length = 1 << 12;
        auto raw = spectral::welch_psd(white_noise(1 << 17, 2.0, 42), dt, wp);
        auto ref = spectral::welch_psd(white_noise(1 << 17, 2.0, 43), dt, wp);
        auto scaled = raw;
        auto scaled_ref = ref;
        for (double& x : scaled.values) x *= 7.5;
        for (double& x : scaled_ref.values) x *= 7.5;
        const auto a = spectral::subtract_classical_noise(
            spectral::normalize_to_shot_noise(raw, ref, {75e3, 85e3}), truth, 0.9);
        const auto b = spectral::subtract_classical_noise(
            spectral::normalize_to_shot_noise(scaled, scaled_ref, {75e3, 85e3}), truth, 0.9);
        for (std::size_t i = 0; i < a.spectrum.values.size(); ++i)
            CHECK(a.spectrum.values[i] == doctest::Approx(b.spectrum.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("angle inference from the DC voltage") {
    spectral::CalibrationModel calib;
    calib.v_off = 0.3;
    calib.v_amp = 1.2;
    SUBCASE("anchors") {
        CHECK(spectral::infer_angle(calib.v_off, calib) == doctest::Approx(0.5 * pi));
        CHECK(spectral::infer_angle(calib.v_off - calib.v_amp, calib) == doctest::Approx(0.0));
        CHECK(spectral::infer_angle(calib.v_off + 0.5 * calib.v_amp, calib) ==
              doctest::Approx(2.0943951023931955).epsilon(1e-12));
    }
    SUBCASE("round trip on [0, pi] to 1e-12") {
        for (double theta = 0.0; theta <= pi + 1e-9; theta += pi / 97.0) {
            const double v = calib.v_off - calib.v_amp * std::cos(theta);
            CHECK(spectral::infer_angle(v, calib) == doctest::Approx(theta).epsilon(1e-12));
        }
    }
    SUBCASE("out-of-range voltage signals miscalibration") {
        CHECK_THROWS_AS(spectral::infer_angle(calib.v_off + 1.01 * calib.v_amp, calib),
                        ParamError);
    }
}

TEST_CASE("simultaneous fit recovers exact model spectra") {
    const auto truth = paper_params();
    const std::vector<double> thetas = {0.15 * pi, 0.3 * pi, 0.5 * pi, 0.7 * pi, 0.85 * pi};
    std::vector<spectral::Spectrum> spectra;
    for (double th : thetas) spectra.push_back(analytic_spectrum(truth, th, th));

    spectral::FitInit init;
    init.gamma_m = 1.6 * truth.gamma_m;
    init.gamma_tot = 0.7 * truth.gamma_tot();
    init.gamma_meas = 1.4 * truth.gamma_meas();
    init.omega_m = {truth.omega_m + two_pi * 200.0};

    const spectral::Band band{48e3, 98e3};
    const auto fit = spectral::fit_multi(spectra, band, init);
    CHECK(fit.converged);
    CHECK(fit.gamma_m == doctest::Approx(truth.gamma_m).epsilon(1e-6));
    CHECK(fit.gamma_tot == doctest::Approx(truth.gamma_tot()).epsilon(1e-6));
    CHECK(fit.gamma_meas == doctest::Approx(truth.gamma_meas()).epsilon(1e-6));
    CHECK(fit.eta_meas() == doctest::Approx(0.28).epsilon(1e-5));
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        CHECK(fit.omega_m[i] == doctest::Approx(truth.omega_m).epsilon(1e-8));
        CHECK(fit.theta[i] == doctest::Approx(thetas[i]).epsilon(1e-6));
    }
    CHECK(fit.angle_slope == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(std::abs(fit.angle_offset) < 1e-5);

    SUBCASE("refitting from the optimum moves nothing") {
        spectral::FitInit again;
        again.gamma_m = fit.gamma_m;
        again.gamma_tot = fit.gamma_tot;
        again.gamma_meas = fit.gamma_meas;
        again.omega_m = fit.omega_m;
        again.theta = fit.theta;
        const auto refit = spectral::fit_multi(spectra, band, again);
        CHECK(std::abs(refit.gamma_m / fit.gamma_m - 1.0) < 1e-9);
        CHECK(std::abs(refit.gamma_tot / fit.gamma_tot - 1.0) < 1e-9);
        CHECK(std::abs(refit.gamma_meas / fit.gamma_meas - 1.0) < 1e-9);
    }
}

TEST_CASE("fit flags an efficiency above one") {
    // unphysical synthetic input: gamma_meas beyond gamma_tot
    model::ModelParams fake;
    fake.omega_m = two_pi * 73.25e3;
    fake.gamma_m = two_pi * 40.0;
    fake.gamma_qba = two_pi * 6.0e3;
    fake.eta_d = 1.0;
    fake.n_bar = 0.0;  // gamma_tot = 6.02 kHz, gamma_meas = 6.0 kHz
    std::vector<spectral::Spectrum> spectra;
    for (double th : {0.2 * pi, 0.4 * pi, 0.6 * pi, 0.8 * pi}) {
        auto s = analytic_spectrum(fake, th, th);
        // inflate the correlation term so the optimum wants eta > 1
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            const double corr = 4.0 * fake.gamma_meas() *
                                model::susceptibility(two_pi * s.freqs_hz[k], fake).real() *
                                std::sin(2.0 * th);
            s.values[k] += 0.3 * corr;
        }
        spectra.push_back(s);
    }
    spectral::FitInit init;
    init.gamma_m = fake.gamma_m;
    init.gamma_tot = fake.gamma_tot();
    init.gamma_meas = 0.9 * fake.gamma_meas();
    init.omega_m = {fake.omega_m};
    const auto fit = spectral::fit_multi(spectra, {48e3, 98e3}, init);
    CHECK(fit.eta_clamped);
    CHECK(fit.gamma_meas <= fit.gamma_tot);
}

TEST_CASE("fit usage guards") {
    const auto truth = paper_params();
    std::vector<spectral::Spectrum> two = {analytic_spectrum(truth, 0.3, 0.3),
                                           analytic_spectrum(truth, 0.8, 0.8)};
    spectral::FitInit init;
    init.gamma_m = truth.gamma_m;
    init.gamma_tot = truth.gamma_tot();
    init.gamma_meas = truth.gamma_meas();
    init.omega_m = {truth.omega_m};
    CHECK_THROWS_AS(spectral::fit_multi(two, {48e3, 98e3}, init), UsageError);
    std::vector<spectral::Spectrum> three = {analytic_spectrum(truth, 0.3, 0.3),
                                             analytic_spectrum(truth, 0.8, 0.8),
                                             analytic_spectrum(truth, 1.5, 1.5)};
    CHECK_THROWS_AS(spectral::fit_multi(three, {2e6, 3e6}, init), UsageError);
}

TEST_CASE("Fano lineshape appears exactly when the measurement rate is nonzero") {
    auto squeezing = paper_params();
    auto dark = squeezing;
    dark.eta_d = 0.0;
    double min_on = 10.0, min_off = 10.0;
    for (double f = 48e3; f < 98e3; f += 5.0) {
        min_on = std::min(min_on, model::homodyne_psd(two_pi * f, 0.9 * pi, squeezing));
        min_off = std::min(min_off, model::homodyne_psd(two_pi * f, 0.9 * pi, dark));
    }
    CHECK(min_on < 1.0);
    CHECK(min_off >= 1.0 - 1e-12);
}

TEST_CASE("sensitivity curve fit") {
    SUBCASE("exact |sin| data") {
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 9; ++i) {
            const double th = pi * i / 8.0;
            pts.emplace_back(th, 2.5 * std::abs(std::sin(th)));
        }
        const auto fit = spectral::sensitivity_curve(pts);
        CHECK(fit.amplitude == doctest::Approx(2.5).epsilon(1e-6));
        CHECK(std::abs(fit.theta_offset) < 1e-6);
        CHECK(fit.rms_residual < 1e-9);
        // maximum response sits at the phase quadrature
        double best_theta = 0.0, best = -1.0;
        for (const auto& [th, a] : pts)
            if (a > best) {
                best = a;
                best_theta = th;
            }
        CHECK(best_theta == doctest::Approx(0.5 * pi));
    }
    SUBCASE("angle offset shifts the null away from pi") {
        const double offset = 0.05 * pi;
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 13; ++i) {
            const double th = pi * i / 12.0;
            pts.emplace_back(th, 1.4 * std::abs(std::sin(th + offset)));
        }
        const auto fit = spectral::sensitivity_curve(pts);
        CHECK(fit.theta_offset == doctest::Approx(-offset).epsilon(1e-4));
        // null of |sin(theta - theta0)| inside [0, pi]
        const double null_pos = fit.theta_offset < 0.0 ? fit.theta_offset + pi : fit.theta_offset;
        CHECK(null_pos == doctest::Approx(pi - offset).epsilon(1e-4));
    }
    SUBCASE("degenerate input rejected") {
        std::vector<std::pair<double, double>> flat = {
            {0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
        CHECK_THROWS_AS(spectral::sensitivity_curve(flat), NumericalError);
        std::vector<std::pair<double, double>> few = {{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.2}};
        CHECK_THROWS_AS(spectral::sensitivity_curve(few), UsageError);
    }
}
