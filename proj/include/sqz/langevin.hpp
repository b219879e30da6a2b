#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sqz/model.hpp"

namespace sqz::langevin {

// Integration scheme. Exponential propagates the damped rotation exactly per
// step and is the default; EulerMaruyama is the textbook explicit scheme,
// kept as a cross-check. The explicit scheme is only stable when
// gamma_m > omega_m^2 dt, which it enforces.
enum class Scheme { Exponential, EulerMaruyama };

enum class InitMode { SteadyState, Zero };

struct Drive {
    double amplitude = 0.0;  // dimensionless force amplitude
    double omega = 0.0;      // rad/s
};

struct SimConfig {
    model::ModelParams params;
    double dt = 0.0;               // s
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
    std::optional<Drive> drive;
    Scheme scheme = Scheme::Exponential;
    InitMode init = InitMode::SteadyState;
    std::uint32_t trajectory_index = 0;  // RNG stream id for ensembles

    void validate() const;
};

// Position/momentum series plus the raw vacuum-noise series that drove them.
// The stored x_in realization is reused by output_quadratures: the common
// noise in drive and readout is what produces the squeezing correlations.
struct TrajectoryBundle {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> x_in;
    std::vector<double> y_in;
    std::vector<double> x_nu;
    double dt = 0.0;
};

struct OutputQuadratures {
    std::vector<double> x_out;
    std::vector<double> y_out;
    double dt = 0.0;
    double gamma_qba = 0.0;  // provenance guard for photocurrent synthesis
};

struct PhotocurrentRecord {
    std::vector<double> samples;
    double theta = 0.0;   // requested analyser angle
    double eta_d = 1.0;
    double dt = 0.0;
};

// One-sample-at-a-time integrator for streaming pipelines; simulate() is a
// convenience wrapper that materializes a bundle.
class Stepper {
  public:
    explicit Stepper(const SimConfig& config);

    struct Sample {
        double q;
        double p;
        double x_in;   // white, per-step variance 1/(2 dt)
        double y_in;
        double x_nu;
    };

    // State q_k, p_k together with the noise applied on the step k -> k+1.
    Sample next();

    std::uint64_t index() const { return index_; }

  private:
    SimConfig config_;
    double m11_, m12_, m21_, m22_;  // one-step propagator
    double q_, p_;
    double noise_sd_;    // per-step s.d. of the vacuum quadrature series
    double thermal_sd_;  // per-step s.d. of the thermal force
    double qba_coupling_;
    std::uint64_t index_ = 0;
    std::uint64_t gauss_index_ = 0;
    bool have_spare_ = false;
    double spare_[4] = {0, 0, 0, 0};
    void draw(double out[4]);
};

TrajectoryBundle simulate(const SimConfig& config);

OutputQuadratures output_quadratures(const TrajectoryBundle& bundle,
                                     const model::ModelParams& params);

// Control variant with the readout x_out replaced by an independently drawn
// realization: breaks the drive/readout correlation, so no spectrum may dip
// below shot noise. Validation aid.
OutputQuadratures decorrelated_output_quadratures(const TrajectoryBundle& bundle,
                                                  const model::ModelParams& params,
                                                  const SimConfig& config);

// i_theta = sqrt(eta_d) (cos(theta') x_out + sin(theta') y_out)
//           + sqrt(1 - eta_d) x_nu,  theta' = theta + theta_offset.
// theta_offset models a weak co-propagating reflection of the trapping beam.
PhotocurrentRecord photocurrent(const OutputQuadratures& quads, double theta, double eta_d,
                                std::span<const double> x_nu, double theta_offset = 0.0);

// Streaming single-sample synthesis from a Stepper sample.
double photocurrent_sample(const Stepper::Sample& s, const model::ModelParams& params,
                           double theta, double eta_d, double theta_offset = 0.0);

}  // namespace sqz::langevin
