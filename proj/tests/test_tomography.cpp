#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"
#include "sqz/model.hpp"
#include "sqz/rng.hpp"
#include "sqz/tomography.hpp"

using namespace sqz;
using sqz::constants::pi;
using sqz::constants::two_pi;

namespace {

model::ModelParams paper_params() {
    return model::ModelParams::from_rates(two_pi * 73.25e3, two_pi * 40.0, two_pi * 5.0e3,
                                          two_pi * 1.4e3);
}

// marginal variance of a Gaussian state at analyser angle theta under the
// projector convention s = x cos(theta) - y sin(theta)
double marginal_variance(double vx, double vy, double cxy, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return c * c * vx + s * s * vy - 2.0 * s * c * cxy;
}

tomo::Sinogram analytic_gaussian_sinogram(double vx, double vy, double cxy,
                                          std::size_t n_angles, std::size_t bins,
                                          double halfrange) {
    tomo::Sinogram sino;
    for (std::size_t a = 0; a < n_angles; ++a)
        sino.angles.push_back(pi * static_cast<double>(a) / static_cast<double>(n_angles - 1));
    const double h = 2.0 * halfrange / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b)
        sino.bin_edges.push_back(-halfrange + h * static_cast<double>(b));
    for (double theta : sino.angles) {
        const double var = marginal_variance(vx, vy, cxy, theta);
        std::vector<double> col(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const double s = -halfrange + h * (static_cast<double>(b) + 0.5);
            col[b] = std::exp(-0.5 * s * s / var) / std::sqrt(two_pi * var);
        }
        sino.density.push_back(col);
    }
    return sino;
}

// Gaussian grid with given covariance, normalized on the grid
tomo::WignerGrid gaussian_grid(double vx, double vy, double cxy, std::size_t size,
                               double extent) {
    tomo::WignerGrid g;
    g.size = size;
    g.extent = extent;
    g.values.assign(size * size, 0.0);
    const double det = vx * vy - cxy * cxy;
    for (std::size_t iy = 0; iy < size; ++iy)
        for (std::size_t ix = 0; ix < size; ++ix) {
            const double x = g.coord(ix), y = g.coord(iy);
            const double quad = (vy * x * x - 2.0 * cxy * x * y + vx * y * y) / det;
            g.at(ix, iy) = std::exp(-0.5 * quad) / (two_pi * std::sqrt(det));
        }
    return g;
}

double jarque_bera(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    const double kurt = m4 / (m2 * m2) - 3.0;
    return n / 6.0 * (skew * skew + 0.25 * kurt * kurt);
}

}  // namespace

TEST_CASE("covariance from three cuts") {
    SUBCASE("vacuum") {
        const auto e = tomo::covariance_from_cuts(0.5, 0.5, 0.5);
        CHECK(e.var_x == 0.5);
        CHECK(e.var_y == 0.5);
        CHECK(e.cov_xy == 0.0);
        CHECK(e.physical);
    }
    SUBCASE("arithmetic") {
        const auto e = tomo::covariance_from_cuts(0.4, 0.6, 0.8);
        CHECK(e.var_x == doctest::Approx(0.4));
        CHECK(e.var_y == doctest::Approx(0.8));
        CHECK(e.cov_xy == doctest::Approx(0.0));
    }
    SUBCASE("exact inversion of Gaussian marginals") {
        std::mt19937_64 gen(31);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double vx = 0.2 + 2.0 * u(gen);
            const double vy = 0.2 + 2.0 * u(gen);
            const double c = (2.0 * u(gen) - 1.0) * 0.9 * std::sqrt(vx * vy);
            const double v1 = marginal_variance(vx, vy, c, 0.0);
            const double v2 = marginal_variance(vx, vy, c, 0.25 * pi);
            const double v3 = marginal_variance(vx, vy, c, 0.5 * pi);
            const auto e = tomo::covariance_from_cuts(v1, v2, v3);
            CHECK(e.var_x == doctest::Approx(vx).epsilon(1e-12));
            CHECK(e.var_y == doctest::Approx(vy).epsilon(1e-12));
            CHECK(e.cov_xy == doctest::Approx(c).epsilon(1e-10));
            CHECK(e.physical);
        }
    }
    SUBCASE("unphysical combination flagged") {
        const auto e = tomo::covariance_from_cuts(0.1, 2.0, 0.1);
        CHECK_FALSE(e.physical);
    }
    SUBCASE("nonpositive variances rejected") {
        CHECK_THROWS_AS(tomo::covariance_from_cuts(0.0, 0.5, 0.5), UsageError);
    }
}

TEST_CASE("theoretical covariance of the temporal mode") {
    const auto params = paper_params();
    SUBCASE("no measurement, vacuum ellipse") {
        auto dark = params;
        dark.eta_d = 0.0;
        const auto e = tomo::theoretical_covariance(70.1e3, dark);
        CHECK(e.var_x == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(e.var_y == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(e.cov_xy == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("on resonance the correlation vanishes; no squeezing") {
        const auto e = tomo::theoretical_covariance(params.omega_m / two_pi, params);
        CHECK(std::abs(e.cov_xy) < 1e-9);
        CHECK(e.minor_variance() == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("frozen values at the display frequencies") {
        const auto a = tomo::theoretical_covariance(70.1e3, params);
        CHECK(a.var_x == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(a.var_y == doctest::Approx(1.97356750777).epsilon(1e-9));
        CHECK(a.cov_xy == doctest::Approx(-0.454193236896).epsilon(1e-9));
        CHECK(a.minor_variance() == doctest::Approx(0.371253975985).epsilon(1e-9));
        const auto b = tomo::theoretical_covariance(77.1e3, params);
        CHECK(b.var_y == doctest::Approx(1.39673192913).epsilon(1e-9));
        CHECK(b.cov_xy == doctest::Approx(0.354314699895).epsilon(1e-9));
        CHECK(b.minor_variance() == doctest::Approx(0.376902103291).epsilon(1e-9));
        // squeezing angle flips across the resonance
        CHECK(a.cov_xy * b.cov_xy < 0.0);
        CHECK(a.minor_variance() < 0.5);
        CHECK(b.minor_variance() < 0.5);
    }
}

TEST_CASE("temporal-mode extraction") {
    const double dt = 1e-7;
    SUBCASE("zero input gives zero modes") {
        langevin::PhotocurrentRecord rec;
        rec.samples.assign(50000, 0.0);
        rec.dt = dt;
        const auto modes = tomo::extract_modes(rec, 1e-3, 80e3);
        CHECK(modes.modes.size() == 5);
        for (const auto& m : modes.modes) CHECK(std::abs(m) == 0.0);
    }
    SUBCASE("shot-noise input has component variance 1/2") {
        langevin::PhotocurrentRecord rec;
        rec.dt = dt;
        rng::GaussianChannel ch(17, 0, 0);
        const double sd = std::sqrt(0.5 / dt);
        rec.samples.resize(4'000'000);
        for (auto& s : rec.samples) s = sd * ch.next();
        const auto modes = tomo::extract_modes(rec, 1e-3, 80e3);
        CHECK(modes.modes.size() == 400);
        const auto q = modes.quadrature_samples();
        double var = 0.0;
        for (double x : q) var += x * x;
        var /= static_cast<double>(q.size());
        CHECK(var == doctest::Approx(0.5).epsilon(0.15));
    }
    SUBCASE("pure tone at the analysis frequency gives constant |r|") {
        langevin::PhotocurrentRecord rec;
        rec.dt = dt;
        const double f0 = 80e3;
        rec.samples.resize(400000);
        for (std::size_t k = 0; k < rec.samples.size(); ++k)
            rec.samples[k] = 2.0 * std::cos(two_pi * f0 * static_cast<double>(k) * dt + 0.3);
        const auto modes = tomo::extract_modes(rec, 1e-3, f0);  // 80 cycles per chunk
        REQUIRE(modes.modes.size() == 40);
        double lo = 1e300, hi = 0.0;
        for (const auto& m : modes.modes) {
            lo = std::min(lo, std::abs(m));
            hi = std::max(hi, std::abs(m));
        }
        CHECK((hi - lo) / hi < 1e-9);
    }
    SUBCASE("warnings for short chunks and poor statistics") {
        langevin::PhotocurrentRecord rec;
        rec.dt = dt;
        rec.samples.assign(200000, 0.0);
        const auto modes = tomo::extract_modes(rec, 1e-3, 80e3, spectral::Window::Hann,
                                               two_pi * 40.0);
        REQUIRE(modes.warnings.size() == 2);  // T < 1/gamma_m and < 100 chunks
    }
    SUBCASE("streaming accumulator matches the batch path") {
        langevin::PhotocurrentRecord rec;
        rec.dt = dt;
        rng::GaussianChannel ch(18, 0, 0);
        rec.samples.resize(100000);
        for (auto& s : rec.samples) s = ch.next();
        const auto batch = tomo::extract_modes(rec, 1e-3, 80e3);
        tomo::ModeAccumulator acc(dt, 1e-3, 80e3);
        for (double s : rec.samples) acc.push(s);
        REQUIRE(acc.modes().size() == batch.modes.size());
        for (std::size_t i = 0; i < batch.modes.size(); ++i)
            CHECK(std::abs(acc.modes()[i] - batch.modes[i]) < 1e-12);
    }
    SUBCASE("center frequency above Nyquist rejected") {
        langevin::PhotocurrentRecord rec;
        rec.dt = 1e-3;
        rec.samples.assign(10000, 0.0);
        CHECK_THROWS_AS(tomo::extract_modes(rec, 1.0, 600.0), UsageError);
    }
}

TEST_CASE("sinogram construction") {
    const std::vector<double> angles = {0.0, 0.25 * pi, 0.5 * pi, 0.75 * pi, pi};
    SUBCASE("vacuum input: identical Gaussian columns") {
        std::vector<std::vector<double>> samples(angles.size());
        for (std::size_t a = 0; a < angles.size(); ++a) {
            rng::GaussianChannel ch(100 + a, 0, 0);
            samples[a].resize(20000);
            for (auto& s : samples[a]) s = ch.next() / std::sqrt(2.0);
        }
        const auto sino = tomo::build_sinogram(samples, angles, 64, 4.0 / std::sqrt(2.0));
        sino.validate();
        const double h = sino.bin_width();
        for (std::size_t a = 0; a < angles.size(); ++a) {
            double integral = 0.0;
            for (double d : sino.density[a]) integral += d * h;
            CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(sino.column_variance(a) == doctest::Approx(0.5).epsilon(0.06));
            // raw samples pass a normality check
            CHECK(jarque_bera(samples[a]) < 9.21);  // chi^2(2) at 1%
        }
    }
    SUBCASE("usage guards") {
        std::vector<std::vector<double>> samples(3, std::vector<double>(100, 0.0));
        const std::vector<double> three = {0.0, 1.0, 2.0};
        CHECK_THROWS_AS(tomo::build_sinogram(samples, three, 64, 3.0), UsageError);
        std::vector<std::vector<double>> with_empty(5);
        for (std::size_t i = 0; i + 1 < with_empty.size(); ++i)
            with_empty[i].assign(100, 0.1);
        CHECK_THROWS_AS(tomo::build_sinogram(with_empty, angles, 64, 3.0), UsageError);
    }
}

TEST_CASE("forward projection realizes the marginal convention") {
    const double vx = 0.5, vy = 1.6, cxy = -0.45;
    const auto grid = gaussian_grid(vx, vy, cxy, 192, 6.0);
    std::vector<double> edges;
    for (int b = 0; b <= 96; ++b) edges.push_back(-4.8 + 0.1 * b);
    for (double theta : {0.0, 0.2, 0.25 * pi, 0.5 * pi, 0.8 * pi}) {
        const auto proj = tomo::radon_project(grid, theta, edges);
        // second moment of the projected density
        double mass = 0.0, mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            const double s = 0.5 * (edges[b] + edges[b + 1]);
            mass += proj[b] * 0.1;
            mean += proj[b] * s * 0.1;
        }
        mean /= mass;
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            const double s = 0.5 * (edges[b] + edges[b + 1]);
            var += proj[b] * (s - mean) * (s - mean) * 0.1;
        }
        var /= mass;
        CHECK(mass == doctest::Approx(1.0).epsilon(0.01));
        CHECK(var == doctest::Approx(marginal_variance(vx, vy, cxy, theta)).epsilon(0.01));
    }
}

TEST_CASE("SART reconstruction") {
    SUBCASE("isotropic Gaussian sinogram reconstructs the vacuum circle") {
        const auto sino = analytic_gaussian_sinogram(0.5, 0.5, 0.0, 19, 64, 4.0 / std::sqrt(2.0));
        tomo::SartOptions opts;
        opts.sweeps = 60;
        opts.relaxation = 0.5;
        const auto result = tomo::sart_reconstruct(sino, 128, opts);
        CHECK(std::abs(result.grid.mass() - 1.0) < 1e-3);
        const auto e = tomo::grid_covariance(result.grid);
        CHECK(std::sqrt(e.var_x) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.03));
        CHECK(std::sqrt(e.var_y) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.03));
        CHECK(std::abs(e.cov_xy) < 0.01);
        // residual decreases over the first sweeps
        for (std::size_t i = 1; i < 5; ++i) CHECK(result.residuals[i] < result.residuals[i - 1]);
        // near-nonnegative for a Gaussian input
        double min_v = 0.0;
        for (double v : result.grid.values) min_v = std::min(min_v, v);
        CHECK(min_v > -0.02);
    }
    SUBCASE("point mass localizes at (a, 0)") {
        const double a = 1.2;
        tomo::Sinogram sino;
        const std::size_t bins = 64;
        const double halfrange = 2.5;
        for (int i = 0; i < 9; ++i) sino.angles.push_back(pi * i / 8.0);
        const double h = 2.0 * halfrange / bins;
        for (std::size_t b = 0; b <= bins; ++b) sino.bin_edges.push_back(-halfrange + h * b);
        const double sigma = 0.08;
        for (double theta : sino.angles) {
            std::vector<double> col(bins);
            const double center = a * std::cos(theta);  // point (a, 0) projects to a cos(theta)
            for (std::size_t b = 0; b < bins; ++b) {
                const double s = -halfrange + h * (b + 0.5);
                col[b] = std::exp(-0.5 * (s - center) * (s - center) / (sigma * sigma)) /
                         (sigma * std::sqrt(two_pi));
            }
            sino.density.push_back(col);
        }
        auto opts = tomo::SartOptions{};
        opts.sweeps = 15;
        const auto result = tomo::sart_reconstruct(sino, 128, opts);
        double mass = 0.0, mx = 0.0, my = 0.0;
        const double c2 = result.grid.cell() * result.grid.cell();
        for (std::size_t iy = 0; iy < result.grid.size; ++iy)
            for (std::size_t ix = 0; ix < result.grid.size; ++ix) {
                const double v = result.grid.at(ix, iy) * c2;
                mass += v;
                mx += v * result.grid.coord(ix);
                my += v * result.grid.coord(iy);
            }
        CHECK(mx / mass == doctest::Approx(a).epsilon(0.03));
        CHECK(std::abs(my / mass) < 0.05);
    }
    SUBCASE("squeezed-state sinogram reproduces the theoretical ellipse") {
        const auto params = paper_params();
        const auto truth = tomo::theoretical_covariance(70.1e3, params);
        const double sd_max = std::sqrt(truth.major_variance());
        const auto sino = analytic_gaussian_sinogram(truth.var_x, truth.var_y, truth.cov_xy, 19,
                                                     64, 4.0 * sd_max);
        tomo::SartOptions opts;
        opts.sweeps = 60;
        opts.relaxation = 0.5;
        const auto result = tomo::sart_reconstruct(sino, 128, opts);
        const auto e = tomo::grid_covariance(result.grid);
        CHECK(e.var_x == doctest::Approx(truth.var_x).epsilon(0.05));
        CHECK(e.var_y == doctest::Approx(truth.var_y).epsilon(0.05));
        CHECK(e.cov_xy == doctest::Approx(truth.cov_xy).epsilon(0.05));
        CHECK(e.minor_variance() < 0.5);
    }
}

TEST_CASE("filtered backprojection cross-checks SART") {
    const auto params = paper_params();
    const auto truth = tomo::theoretical_covariance(70.1e3, params);
    const double sd_max = std::sqrt(truth.major_variance());
    const auto sino = analytic_gaussian_sinogram(truth.var_x, truth.var_y, truth.cov_xy, 19, 64,
                                                 4.0 * sd_max);
    tomo::SartOptions opts;
    opts.sweeps = 60;
    opts.relaxation = 0.5;
    const auto sart = tomo::sart_reconstruct(sino, 128, opts);
    const auto fbp = tomo::fbp_reconstruct(sino, 128);
    const auto es = tomo::grid_covariance(sart.grid);
    const auto ef = tomo::grid_covariance(fbp);
    CHECK(std::abs(fbp.mass() - 1.0) < 1e-6);
    // FBP carries a known +O(bin width^2) variance inflation; 10% covers it
    CHECK(ef.var_x == doctest::Approx(es.var_x).epsilon(0.10));
    CHECK(ef.var_y == doctest::Approx(es.var_y).epsilon(0.10));
    CHECK(ef.cov_xy == doctest::Approx(es.cov_xy).epsilon(0.15));
}

TEST_CASE("full round trip: grid -> projections -> SART -> covariance") {
    const double vx = 0.9, vy = 0.35, cxy = 0.25;
    const double sd_max = std::sqrt(std::max(vx, vy));
    const auto original = gaussian_grid(vx, vy, cxy, 128, 4.0 * sd_max);
    tomo::Sinogram sino;
    const std::size_t bins = 64;
    for (int i = 0; i < 20; ++i) sino.angles.push_back(pi * i / 19.0);
    const double h = 2.0 * 4.0 * sd_max / bins;
    for (std::size_t b = 0; b <= bins; ++b) sino.bin_edges.push_back(-4.0 * sd_max + h * b);
    for (double theta : sino.angles)
        sino.density.push_back(tomo::radon_project(original, theta, sino.bin_edges));
    const auto result = tomo::sart_reconstruct(sino, 128, {});
    const auto e = tomo::grid_covariance(result.grid);
    CHECK(e.var_x == doctest::Approx(vx).epsilon(0.05));
    CHECK(e.var_y == doctest::Approx(vy).epsilon(0.05));
    CHECK(e.cov_xy == doctest::Approx(cxy).epsilon(0.05));
}
