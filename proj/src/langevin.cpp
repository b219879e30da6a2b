#include "sqz/langevin.hpp"

#include <cmath>

#include "sqz/errors.hpp"
#include "sqz/rng.hpp"

namespace sqz::langevin {

namespace {

// noise channel ids within a trajectory stream
enum Channel : std::uint32_t {
    kChannelXIn = 0,
    kChannelThermal = 1,
    kChannelYIn = 2,
    kChannelXNu = 3,
    kChannelInit = 4,
    kChannelDecorrelated = 5,
};

}  // namespace

void SimConfig::validate() const {
    params.validate();
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (dt * params.omega_m > 0.05 * (1.0 + 1e-12))
        throw ConfigError("resolution guard violated: dt * omega_m must be <= 0.05");
    if (n_samples == 0) throw ConfigError("n_samples must be positive");
    if (scheme == Scheme::EulerMaruyama && params.gamma_m <= params.omega_m * params.omega_m * dt)
        throw ConfigError(
            "Euler-Maruyama is unstable here: requires gamma_m > omega_m^2 dt; "
            "use the exponential scheme or reduce dt");
    if (scheme == Scheme::Exponential && params.gamma_m >= 2.0 * params.omega_m)
        throw ConfigError("exponential scheme requires an underdamped oscillator");
}

Stepper::Stepper(const SimConfig& config) : config_(config) {
    config_.validate();
    const model::ModelParams& mp = config_.params;
    const double dt = config_.dt;
    if (config_.scheme == Scheme::Exponential) {
        const double omega_r = std::sqrt(mp.omega_m * mp.omega_m - 0.25 * mp.gamma_m * mp.gamma_m);
        const double decay = std::exp(-0.5 * mp.gamma_m * dt);
        const double phase = omega_r * dt;
        const double c = std::cos(phase);
        const double s = std::sin(phase) / omega_r;
        m11_ = decay * (c + 0.5 * mp.gamma_m * s);
        m12_ = decay * mp.omega_m * s;
        m21_ = -decay * mp.omega_m * s;
        m22_ = decay * (c - 0.5 * mp.gamma_m * s);
    } else {
        m11_ = 1.0;
        m12_ = mp.omega_m * dt;
        m21_ = -mp.omega_m * dt;
        m22_ = 1.0 - mp.gamma_m * dt;
    }
    noise_sd_ = std::sqrt(0.5 / dt);
    thermal_sd_ = std::sqrt(2.0 * mp.gamma_m * (mp.n_bar + 0.5) / dt);
    qba_coupling_ = std::sqrt(4.0 * mp.gamma_qba);

    if (config_.init == InitMode::SteadyState) {
        // stationary covariance of (q, p) is (gamma_tot / gamma_m) I
        const double sd = std::sqrt(mp.gamma_tot() / mp.gamma_m);
        const rng::GaussianPair g =
            rng::gaussian_pair(config_.seed, config_.trajectory_index, kChannelInit, 0);
        q_ = sd * g.a;
        p_ = sd * g.b;
    } else {
        q_ = 0.0;
        p_ = 0.0;
    }
}

void Stepper::draw(double out[4]) {
    // one pair per channel per two steps
    if (have_spare_) {
        out[0] = spare_[0];
        out[1] = spare_[1];
        out[2] = spare_[2];
        out[3] = spare_[3];
        have_spare_ = false;
        return;
    }
    const rng::GaussianPair gx =
        rng::gaussian_pair(config_.seed, config_.trajectory_index, kChannelXIn, gauss_index_);
    const rng::GaussianPair gt =
        rng::gaussian_pair(config_.seed, config_.trajectory_index, kChannelThermal, gauss_index_);
    const rng::GaussianPair gy =
        rng::gaussian_pair(config_.seed, config_.trajectory_index, kChannelYIn, gauss_index_);
    const rng::GaussianPair gn =
        rng::gaussian_pair(config_.seed, config_.trajectory_index, kChannelXNu, gauss_index_);
    ++gauss_index_;
    out[0] = gx.a;
    out[1] = gt.a;
    out[2] = gy.a;
    out[3] = gn.a;
    spare_[0] = gx.b;
    spare_[1] = gt.b;
    spare_[2] = gy.b;
    spare_[3] = gn.b;
    have_spare_ = true;
}

Stepper::Sample Stepper::next() {
    double g[4];
    draw(g);
    Sample s;
    s.q = q_;
    s.p = p_;
    s.x_in = noise_sd_ * g[0];
    s.y_in = noise_sd_ * g[2];
    s.x_nu = noise_sd_ * g[3];

    double force = thermal_sd_ * g[1] + qba_coupling_ * s.x_in;
    if (config_.drive)
        force += config_.drive->amplitude *
                 std::cos(config_.drive->omega * static_cast<double>(index_) * config_.dt);

    const double q_next = m11_ * q_ + m12_ * p_;
    const double p_next = m21_ * q_ + m22_ * p_ + force * config_.dt;
    q_ = q_next;
    p_ = p_next;
    ++index_;
    return s;
}

TrajectoryBundle simulate(const SimConfig& config) {
    Stepper stepper(config);
    TrajectoryBundle bundle;
    bundle.dt = config.dt;
    bundle.q.reserve(config.n_samples);
    bundle.p.reserve(config.n_samples);
    bundle.x_in.reserve(config.n_samples);
    bundle.y_in.reserve(config.n_samples);
    bundle.x_nu.reserve(config.n_samples);
    for (std::uint64_t i = 0; i < config.n_samples; ++i) {
        const Stepper::Sample s = stepper.next();
        bundle.q.push_back(s.q);
        bundle.p.push_back(s.p);
        bundle.x_in.push_back(s.x_in);
        bundle.y_in.push_back(s.y_in);
        bundle.x_nu.push_back(s.x_nu);
    }
    return bundle;
}

namespace {

void check_bundle(const TrajectoryBundle& b) {
    const std::size_t n = b.q.size();
    if (n == 0) throw UsageError("empty trajectory bundle");
    if (b.p.size() != n || b.x_in.size() != n || b.y_in.size() != n || b.x_nu.size() != n)
        throw UsageError("trajectory bundle series lengths differ");
    if (!(b.dt > 0.0)) throw UsageError("trajectory bundle has no time step");
}

}  // namespace

OutputQuadratures output_quadratures(const TrajectoryBundle& bundle,
                                     const model::ModelParams& params) {
    params.validate();
    check_bundle(bundle);
    const double offset = std::sqrt(2.0 * params.gamma_rp);
    const double coupling = std::sqrt(4.0 * params.gamma_qba);
    OutputQuadratures out;
    out.dt = bundle.dt;
    out.gamma_qba = params.gamma_qba;
    out.x_out.resize(bundle.q.size());
    out.y_out.resize(bundle.q.size());
    for (std::size_t i = 0; i < bundle.q.size(); ++i) {
        out.x_out[i] = bundle.x_in[i] + offset;
        out.y_out[i] = bundle.y_in[i] + coupling * bundle.q[i];
    }
    return out;
}

OutputQuadratures decorrelated_output_quadratures(const TrajectoryBundle& bundle,
                                                  const model::ModelParams& params,
                                                  const SimConfig& config) {
    OutputQuadratures out = output_quadratures(bundle, params);
    const double offset = std::sqrt(2.0 * params.gamma_rp);
    const double sd = std::sqrt(0.5 / bundle.dt);
    rng::GaussianChannel fresh(config.seed, config.trajectory_index, kChannelDecorrelated);
    for (double& x : out.x_out) x = sd * fresh.next() + offset;
    return out;
}

PhotocurrentRecord photocurrent(const OutputQuadratures& quads, double theta, double eta_d,
                                std::span<const double> x_nu, double theta_offset) {
    if (!(eta_d >= 0.0 && eta_d <= 1.0)) throw ParamError("eta_d must lie in [0,1]");
    if (quads.x_out.size() != quads.y_out.size() || quads.x_out.size() != x_nu.size())
        throw UsageError("photocurrent: series lengths differ");
    const double theta_eff = theta + theta_offset;
    const double cx = std::sqrt(eta_d) * std::cos(theta_eff);
    const double cy = std::sqrt(eta_d) * std::sin(theta_eff);
    const double cn = std::sqrt(1.0 - eta_d);
    PhotocurrentRecord rec;
    rec.theta = theta;
    rec.eta_d = eta_d;
    rec.dt = quads.dt;
    rec.samples.resize(x_nu.size());
    for (std::size_t i = 0; i < x_nu.size(); ++i)
        rec.samples[i] = cx * quads.x_out[i] + cy * quads.y_out[i] + cn * x_nu[i];
    return rec;
}

double photocurrent_sample(const Stepper::Sample& s, const model::ModelParams& params,
                           double theta, double eta_d, double theta_offset) {
    const double theta_eff = theta + theta_offset;
    const double cx = std::sqrt(eta_d) * std::cos(theta_eff);
    const double cy = std::sqrt(eta_d) * std::sin(theta_eff);
    const double cn = std::sqrt(1.0 - eta_d);
    const double x_out = s.x_in + std::sqrt(2.0 * params.gamma_rp);
    const double y_out = s.y_in + std::sqrt(4.0 * params.gamma_qba) * s.q;
    return cx * x_out + cy * y_out + cn * s.x_nu;
}

}  // namespace sqz::langevin
