#include "sqz/tomography.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"

namespace sqz::tomo {

using constants::pi;
using constants::two_pi;

std::vector<double> TemporalModeSamples::quadrature_samples() const {
    std::vector<double> out;
    out.reserve(2 * modes.size());
    for (const auto& m : modes) out.push_back(m.real());
    for (const auto& m : modes) out.push_back(m.imag());
    return out;
}

ModeAccumulator::ModeAccumulator(double dt, double chunk_duration, double center_freq_hz,
                                 spectral::Window window) {
    if (!(dt > 0.0)) throw UsageError("mode extraction: dt must be positive");
    if (!(chunk_duration > dt)) throw UsageError("mode extraction: chunk shorter than one sample");
    if (!(center_freq_hz > 0.0 && center_freq_hz < 0.5 / dt))
        throw UsageError("mode extraction: center frequency must lie below Nyquist");
    chunk_len_ = static_cast<std::size_t>(std::llround(chunk_duration / dt));
    window_.resize(chunk_len_, 1.0);
    if (window == spectral::Window::Hann) {
        for (std::size_t i = 0; i < chunk_len_; ++i)
            window_[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) /
                                               static_cast<double>(chunk_len_)));
    }
    const double wp = std::inner_product(window_.begin(), window_.end(), window_.begin(), 0.0);
    // unit-PSD white input -> variance 1/2 per component
    norm_ = std::sqrt(2.0 * dt / wp);
    const double dphi = two_pi * center_freq_hz * dt;
    phase_step_cos_ = std::cos(dphi);
    phase_step_sin_ = std::sin(dphi);
}

void ModeAccumulator::push(double sample) {
    acc_ += window_[pos_] * sample * std::complex<double>(phasor_re_, phasor_im_);
    const double re = phasor_re_ * phase_step_cos_ - phasor_im_ * phase_step_sin_;
    phasor_im_ = phasor_re_ * phase_step_sin_ + phasor_im_ * phase_step_cos_;
    phasor_re_ = re;
    if (++pos_ == chunk_len_) {
        modes_.push_back(norm_ * acc_);
        acc_ = {0.0, 0.0};
        phasor_re_ = 1.0;
        phasor_im_ = 0.0;
        pos_ = 0;
    }
}

TemporalModeSamples extract_modes(const langevin::PhotocurrentRecord& record,
                                  double chunk_duration, double center_freq_hz,
                                  spectral::Window window, std::optional<double> gamma_m) {
    if (record.samples.empty()) throw UsageError("extract_modes: empty record");
    ModeAccumulator acc(record.dt, chunk_duration, center_freq_hz, window);
    if (record.samples.size() < acc.chunk_samples())
        throw UsageError("extract_modes: record shorter than one chunk");
    for (double s : record.samples) acc.push(s);

    TemporalModeSamples out;
    out.modes = acc.modes();
    out.chunk_duration = chunk_duration;
    out.center_freq_hz = center_freq_hz;
    out.theta = record.theta;
    if (gamma_m && chunk_duration * (*gamma_m) < 1.0)
        out.warnings.push_back("chunk duration below 1/gamma_m: samples are correlated");
    if (out.modes.size() < 100)
        out.warnings.push_back("fewer than 100 chunks: poor statistics");
    return out;
}

void Sinogram::validate() const {
    if (angles.size() < 2 || angles.size() != density.size())
        throw UsageError("sinogram: angle/column mismatch");
    for (std::size_t i = 1; i < angles.size(); ++i)
        if (!(angles[i] > angles[i - 1])) throw UsageError("sinogram: angles must increase");
    if (bin_edges.size() < 3) throw UsageError("sinogram: too few bins");
    for (const auto& col : density)
        if (col.size() + 1 != bin_edges.size()) throw UsageError("sinogram: bad column size");
}

std::vector<double> Sinogram::bin_centers() const {
    std::vector<double> centers(bin_edges.size() - 1);
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers[i] = 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    return centers;
}

double Sinogram::column_variance(std::size_t angle_index) const {
    const auto centers = bin_centers();
    const double h = bin_width();
    const auto& col = density.at(angle_index);
    double mass = 0.0, mean = 0.0;
    for (std::size_t b = 0; b < col.size(); ++b) {
        mass += col[b] * h;
        mean += col[b] * centers[b] * h;
    }
    if (!(mass > 0.0)) throw UsageError("sinogram column has zero mass");
    mean /= mass;
    double var = 0.0;
    for (std::size_t b = 0; b < col.size(); ++b)
        var += col[b] * (centers[b] - mean) * (centers[b] - mean) * h;
    return var / mass;
}

Sinogram build_sinogram(const std::vector<std::vector<double>>& samples_per_angle,
                        std::span<const double> angles, std::size_t bin_count,
                        double bin_halfrange) {
    if (angles.size() < 5) throw UsageError("build_sinogram needs >= 5 angles");
    if (angles.size() != samples_per_angle.size())
        throw UsageError("build_sinogram: angle/sample-set mismatch");
    if (bin_count < 8) throw UsageError("build_sinogram: too few bins");
    if (!(bin_halfrange > 0.0)) throw UsageError("build_sinogram: bad bin range");

    Sinogram sino;
    sino.angles.assign(angles.begin(), angles.end());
    sino.bin_edges.resize(bin_count + 1);
    const double h = 2.0 * bin_halfrange / static_cast<double>(bin_count);
    for (std::size_t i = 0; i <= bin_count; ++i)
        sino.bin_edges[i] = -bin_halfrange + h * static_cast<double>(i);

    sino.density.resize(angles.size());
    for (std::size_t a = 0; a < angles.size(); ++a) {
        const auto& samples = samples_per_angle[a];
        if (samples.empty()) throw UsageError("build_sinogram: empty column");
        std::vector<double>& col = sino.density[a];
        col.assign(bin_count, 0.0);
        std::size_t in_range = 0;
        for (double s : samples) {
            if (s < -bin_halfrange || s >= bin_halfrange) continue;
            const auto b = static_cast<std::size_t>((s + bin_halfrange) / h);
            ++col[std::min(b, bin_count - 1)];
            ++in_range;
        }
        if (in_range == 0) throw UsageError("build_sinogram: no samples inside bin range");
        const double norm = 1.0 / (static_cast<double>(in_range) * h);
        for (double& v : col) v *= norm;
    }
    return sino;
}

double WignerGrid::mass() const {
    const double c2 = cell() * cell();
    return std::accumulate(values.begin(), values.end(), 0.0) * c2;
}

namespace {

// bilinear sample of a cell-centered grid; zero outside
inline double sample_grid(const WignerGrid& g, double x, double y) {
    const double cell = g.cell();
    const double fx = (x + g.extent) / cell - 0.5;
    const double fy = (y + g.extent) / cell - 0.5;
    const auto n = static_cast<long>(g.size);
    const long ix = static_cast<long>(std::floor(fx));
    const long iy = static_cast<long>(std::floor(fy));
    const double tx = fx - static_cast<double>(ix);
    const double ty = fy - static_cast<double>(iy);
    double v = 0.0;
    for (int dy = 0; dy < 2; ++dy) {
        const long jy = iy + dy;
        if (jy < 0 || jy >= n) continue;
        const double wy = dy ? ty : 1.0 - ty;
        for (int dx = 0; dx < 2; ++dx) {
            const long jx = ix + dx;
            if (jx < 0 || jx >= n) continue;
            const double wx = dx ? tx : 1.0 - tx;
            v += wx * wy * g.values[static_cast<std::size_t>(jy) * g.size +
                                    static_cast<std::size_t>(jx)];
        }
    }
    return v;
}

// scatter with the same bilinear weights
inline void scatter_grid(WignerGrid& g, double x, double y, double value) {
    const double cell = g.cell();
    const double fx = (x + g.extent) / cell - 0.5;
    const double fy = (y + g.extent) / cell - 0.5;
    const auto n = static_cast<long>(g.size);
    const long ix = static_cast<long>(std::floor(fx));
    const long iy = static_cast<long>(std::floor(fy));
    const double tx = fx - static_cast<double>(ix);
    const double ty = fy - static_cast<double>(iy);
    for (int dy = 0; dy < 2; ++dy) {
        const long jy = iy + dy;
        if (jy < 0 || jy >= n) continue;
        const double wy = dy ? ty : 1.0 - ty;
        for (int dx = 0; dx < 2; ++dx) {
            const long jx = ix + dx;
            if (jx < 0 || jx >= n) continue;
            const double wx = dx ? tx : 1.0 - tx;
            g.values[static_cast<std::size_t>(jy) * g.size + static_cast<std::size_t>(jx)] +=
                wx * wy * value;
        }
    }
}

struct Ray {
    double nx, ny;  // detector direction (s axis)
    double tx, ty;  // marching direction
};

inline Ray ray_for_angle(double theta) {
    // s = x cos(theta) - y sin(theta); marching direction is orthogonal
    return {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
}

}  // namespace

std::vector<double> radon_project(const WignerGrid& grid, double theta,
                                  std::span<const double> bin_edges) {
    if (bin_edges.size() < 2) throw UsageError("radon_project: need at least one bin");
    const Ray ray = ray_for_angle(theta);
    const double step = 0.5 * grid.cell();
    const double reach = grid.extent * std::numbers::sqrt2_v<double>;
    const auto n_steps = static_cast<long>(std::ceil(2.0 * reach / step));
    std::vector<double> proj(bin_edges.size() - 1, 0.0);
    for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b) {
        const double s = 0.5 * (bin_edges[b] + bin_edges[b + 1]);
        double sum = 0.0;
        for (long k = 0; k <= n_steps; ++k) {
            const double t = -reach + step * static_cast<double>(k);
            sum += sample_grid(grid, s * ray.nx + t * ray.tx, s * ray.ny + t * ray.ty);
        }
        proj[b] = sum * step;
    }
    return proj;
}

SartResult sart_reconstruct(const Sinogram& sinogram, std::size_t grid_size,
                            const SartOptions& options) {
    sinogram.validate();
    if (grid_size < 16) throw UsageError("sart_reconstruct: grid too small");
    if (!(options.relaxation > 0.0 && options.relaxation <= 1.0))
        throw UsageError("sart_reconstruct: relaxation must lie in (0, 1]");

    const double extent = std::max(std::abs(sinogram.bin_edges.front()),
                                   std::abs(sinogram.bin_edges.back()));
    SartResult result;
    WignerGrid& grid = result.grid;
    grid.size = grid_size;
    grid.extent = extent;
    grid.values.assign(grid_size * grid_size, 0.0);

    const auto centers = sinogram.bin_centers();
    const std::size_t n_bins = centers.size();
    const double step = 0.5 * grid.cell();
    const double reach = extent * std::numbers::sqrt2_v<double>;
    const auto n_steps = static_cast<long>(std::ceil(2.0 * reach / step));

    WignerGrid numer = grid, denom = grid;

    auto rms_residual = [&]() {
        double ss = 0.0;
        std::size_t n = 0;
        for (std::size_t a = 0; a < sinogram.angles.size(); ++a) {
            const auto proj = radon_project(grid, sinogram.angles[a], sinogram.bin_edges);
            for (std::size_t b = 0; b < n_bins; ++b) {
                const double r = sinogram.density[a][b] - proj[b];
                ss += r * r;
                ++n;
            }
        }
        return std::sqrt(ss / static_cast<double>(n));
    };

    int rising = 0;
    double prev_residual = rms_residual();
    for (int sweep = 0; sweep < options.sweeps; ++sweep) {
        for (std::size_t a = 0; a < sinogram.angles.size(); ++a) {
            const Ray ray = ray_for_angle(sinogram.angles[a]);
            const auto proj = radon_project(grid, sinogram.angles[a], sinogram.bin_edges);
            std::fill(numer.values.begin(), numer.values.end(), 0.0);
            std::fill(denom.values.begin(), denom.values.end(), 0.0);
            for (std::size_t b = 0; b < n_bins; ++b) {
                // per-ray weight total ~ chord length through the grid
                const double s = centers[b];
                double row_sum = 0.0;
                for (long k = 0; k <= n_steps; ++k) {
                    const double t = -reach + step * static_cast<double>(k);
                    const double x = s * ray.nx + t * ray.tx;
                    const double y = s * ray.ny + t * ray.ty;
                    if (std::abs(x) <= extent && std::abs(y) <= extent) row_sum += step;
                }
                if (row_sum <= 0.0) continue;
                const double update = (sinogram.density[a][b] - proj[b]) / row_sum;
                for (long k = 0; k <= n_steps; ++k) {
                    const double t = -reach + step * static_cast<double>(k);
                    const double x = s * ray.nx + t * ray.tx;
                    const double y = s * ray.ny + t * ray.ty;
                    scatter_grid(numer, x, y, update * step);
                    scatter_grid(denom, x, y, step);
                }
            }
            for (std::size_t k = 0; k < grid.values.size(); ++k)
                if (denom.values[k] > 1e-12)
                    grid.values[k] += options.relaxation * numer.values[k] / denom.values[k];
        }
        const double res = rms_residual();
        result.residuals.push_back(res);
        rising = res > prev_residual ? rising + 1 : 0;
        if (rising >= 3)
            throw NumericalError("sart_reconstruct diverged: residual grew for 3 sweeps, last " +
                                 std::to_string(res));
        prev_residual = res;
    }

    const double mass = grid.mass();
    if (!(std::abs(mass) > 0.0)) throw NumericalError("sart_reconstruct produced an empty grid");
    for (double& v : grid.values) v /= mass;
    return result;
}

WignerGrid fbp_reconstruct(const Sinogram& sinogram, std::size_t grid_size) {
    sinogram.validate();
    const auto centers = sinogram.bin_centers();
    const std::size_t n_bins = centers.size();
    const double h = sinogram.bin_width();
    const double extent = std::max(std::abs(sinogram.bin_edges.front()),
                                   std::abs(sinogram.bin_edges.back()));

    // Ramp-filter each column against the discrete bandlimited ramp kernel
    // (built in real space, so the DC treatment is exact), mildly apodized.
    std::size_t padded = 1;
    while (padded < 8 * n_bins) padded <<= 1;
    static std::mutex plan_mutex;
    double* buf = nullptr;
    fftw_complex* freq = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        buf = fftw_alloc_real(padded);
        freq = fftw_alloc_complex(padded / 2 + 1);
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(padded), buf, freq, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_1d(static_cast<int>(padded), freq, buf, FFTW_ESTIMATE);
    }
    // kernel: g[0] = 1/(4h^2), g[n odd] = -1/(pi n h)^2, zero otherwise
    std::fill(buf, buf + padded, 0.0);
    buf[0] = 1.0 / (4.0 * h * h);
    for (std::size_t n = 1; n < padded / 2; n += 2) {
        const double v = -1.0 / (pi * pi * static_cast<double>(n) * static_cast<double>(n) * h * h);
        buf[n] = v;
        buf[padded - n] = v;
    }
    fftw_execute(fwd);
    const double nyquist = 0.5 / h;
    std::vector<double> filter(padded / 2 + 1);
    for (std::size_t k = 0; k <= padded / 2; ++k) {
        const double nu = static_cast<double>(k) / (static_cast<double>(padded) * h);
        const double x = 0.5 * pi * nu / nyquist;
        const double apod = x > 0.0 ? std::sin(x) / x : 1.0;  // Shepp-Logan
        filter[k] = freq[k][0] * apod * h / static_cast<double>(padded);
    }
    std::vector<std::vector<double>> filtered(sinogram.angles.size(),
                                              std::vector<double>(n_bins, 0.0));
    for (std::size_t a = 0; a < sinogram.angles.size(); ++a) {
        std::fill(buf, buf + padded, 0.0);
        std::copy(sinogram.density[a].begin(), sinogram.density[a].end(), buf);
        fftw_execute(fwd);
        for (std::size_t k = 0; k <= padded / 2; ++k) {
            freq[k][0] *= filter[k];
            freq[k][1] *= filter[k];
        }
        fftw_execute(bwd);
        std::copy(buf, buf + n_bins, filtered[a].begin());
    }
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(buf);
        fftw_free(freq);
    }

    // trapezoid weights over the angle grid
    std::vector<double> weights(sinogram.angles.size(), 0.0);
    for (std::size_t a = 0; a + 1 < sinogram.angles.size(); ++a) {
        const double dth = sinogram.angles[a + 1] - sinogram.angles[a];
        weights[a] += 0.5 * dth;
        weights[a + 1] += 0.5 * dth;
    }

    WignerGrid grid;
    grid.size = grid_size;
    grid.extent = extent;
    grid.values.assign(grid_size * grid_size, 0.0);
    for (std::size_t iy = 0; iy < grid_size; ++iy) {
        const double y = grid.coord(iy);
        for (std::size_t ix = 0; ix < grid_size; ++ix) {
            const double x = grid.coord(ix);
            double acc = 0.0;
            for (std::size_t a = 0; a < sinogram.angles.size(); ++a) {
                const double s = x * std::cos(sinogram.angles[a]) -
                                 y * std::sin(sinogram.angles[a]);
                const double f = (s - centers.front()) / h;
                const auto i0 = static_cast<long>(std::floor(f));
                if (i0 < 0 || i0 + 1 >= static_cast<long>(n_bins)) continue;
                const double t = f - static_cast<double>(i0);
                acc += weights[a] *
                       ((1.0 - t) * filtered[a][static_cast<std::size_t>(i0)] +
                        t * filtered[a][static_cast<std::size_t>(i0) + 1]);
            }
            // projections only determine the inscribed disk
            grid.at(ix, iy) = (x * x + y * y <= extent * extent) ? acc : 0.0;
        }
    }
    const double mass = grid.mass();
    if (std::abs(mass) > 0.0)
        for (double& v : grid.values) v /= mass;
    return grid;
}

double CovarianceEllipse::minor_variance() const {
    const double mean = 0.5 * (var_x + var_y);
    const double disc = std::sqrt(0.25 * (var_x - var_y) * (var_x - var_y) + cov_xy * cov_xy);
    return mean - disc;
}

double CovarianceEllipse::major_variance() const {
    const double mean = 0.5 * (var_x + var_y);
    const double disc = std::sqrt(0.25 * (var_x - var_y) * (var_x - var_y) + cov_xy * cov_xy);
    return mean + disc;
}

double CovarianceEllipse::tilt() const { return 0.5 * std::atan2(2.0 * cov_xy, var_x - var_y); }

CovarianceEllipse covariance_from_cuts(double v1, double v2, double v3) {
    if (!(v1 > 0.0 && v2 > 0.0 && v3 > 0.0))
        throw UsageError("covariance_from_cuts: variances must be positive");
    CovarianceEllipse e;
    e.var_x = v1;
    e.var_y = v3;
    e.cov_xy = 0.5 * (v1 + v3) - v2;
    e.physical = e.cov_xy * e.cov_xy <= v1 * v3;
    return e;
}

CovarianceEllipse theoretical_covariance(double center_freq_hz, const model::ModelParams& params) {
    const double omega = two_pi * center_freq_hz;
    const double v1 = 0.5 * model::homodyne_psd(omega, 0.0, params);
    const double v2 = 0.5 * model::homodyne_psd(omega, 0.25 * pi, params);
    const double v3 = 0.5 * model::homodyne_psd(omega, 0.5 * pi, params);
    return covariance_from_cuts(v1, v2, v3);
}

CovarianceEllipse grid_covariance(const WignerGrid& grid) {
    if (grid.values.empty()) throw UsageError("grid_covariance: empty grid");
    const double c2 = grid.cell() * grid.cell();
    double mass = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t iy = 0; iy < grid.size; ++iy)
        for (std::size_t ix = 0; ix < grid.size; ++ix) {
            const double v = grid.at(ix, iy) * c2;
            mass += v;
            mx += v * grid.coord(ix);
            my += v * grid.coord(iy);
        }
    if (!(std::abs(mass) > 0.0)) throw UsageError("grid_covariance: zero mass");
    mx /= mass;
    my /= mass;
    double vxx = 0.0, vyy = 0.0, vxy = 0.0;
    for (std::size_t iy = 0; iy < grid.size; ++iy)
        for (std::size_t ix = 0; ix < grid.size; ++ix) {
            const double v = grid.at(ix, iy) * c2;
            const double dx = grid.coord(ix) - mx;
            const double dy = grid.coord(iy) - my;
            vxx += v * dx * dx;
            vyy += v * dy * dy;
            vxy += v * dx * dy;
        }
    CovarianceEllipse e;
    e.var_x = vxx / mass;
    e.var_y = vyy / mass;
    e.cov_xy = vxy / mass;
    e.physical = e.cov_xy * e.cov_xy <= e.var_x * e.var_y;
    return e;
}

}  // namespace sqz::tomo
