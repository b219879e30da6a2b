#pragma once

#include <complex>

namespace sqz::model {

// Dimensionless dynamical model of the measured oscillator. All angular
// frequencies and rates are in rad/s; user-facing I/O converts to Hz.
struct ModelParams {
    double omega_m = 0.0;    // mechanical resonance
    double gamma_m = 0.0;    // damping (gas + feedback)
    double gamma_qba = 0.0;  // quantum backaction decoherence rate
    double eta_d = 1.0;      // detection efficiency in [0,1]
    double n_bar = 0.0;      // mean bath phonon occupancy
    double gamma_rp = 0.0;   // optional static radiation-pressure rate

    void validate() const;  // throws ParamError

    double gamma_tot() const { return gamma_qba + gamma_m * (n_bar + 0.5); }
    double gamma_meas() const { return eta_d * gamma_qba; }
    double eta_meas() const { return gamma_meas() / gamma_tot(); }

    // static displacement of the trap equilibrium caused by gamma_rp;
    // the dynamics are integrated in the shifted frame.
    double equilibrium_shift() const;

    // Split fitted rates (gamma_tot, gamma_meas) into a concrete
    // (gamma_qba, eta_d) with n_bar = 0. The pair is not separately
    // identifiable from homodyne spectra; any consistent split gives
    // identical observable statistics.
    static ModelParams from_rates(double omega_m, double gamma_m, double gamma_tot,
                                  double gamma_meas);
};

// Laboratory-side quantities of the trap and the scattered field. SI units.
struct PhysicalParams {
    double mass = 0.0;               // kg
    double polarizability = 0.0;     // C m^2 / V
    double field_amplitude = 0.0;    // V/m, tweezer amplitude at the focus
    double waist_x = 0.0;            // m
    double waist_y = 0.0;            // m
    double rayleigh_range = 0.0;     // m
    double wavenumber = 0.0;         // 1/m
    double scattered_power = 0.0;    // W, dipole-radiated power
    double geometric_factor = 0.0;   // dimensionless Gouy-phase factor A

    void validate() const;

    static double derive_geometric_factor(double wavenumber, double rayleigh_range);
    static double derive_scattered_power(double polarizability, double field_amplitude,
                                         double wavenumber);
};

using ComplexResponse = std::complex<double>;

// chi(omega) = omega_m / (omega_m^2 - omega^2 - i gamma_m omega)
ComplexResponse susceptibility(double omega, const ModelParams& params);

// Homodyne photocurrent PSD in shot-noise units:
//   S(omega, theta) = 1 + 8 G_meas sin^2(theta) |chi|^2 2 G_tot
//                       + 4 G_meas Re[chi] sin(2 theta)
double homodyne_psd(double omega, double theta, const ModelParams& params);

struct MeasurementRates {
    double gamma_tot;
    double gamma_meas;
    double eta_meas;
};
MeasurementRates measurement_rates(const ModelParams& params);

struct TrapFrequencies {
    double omega_x;
    double omega_y;
    double omega_z;
};
TrapFrequencies trap_frequencies(const PhysicalParams& phys);

enum class PatternAxis { X, Y, Z, Dipole };

// Angular photon density (per steradian) of the interacting mode coupled to
// one motional axis, or of the dipole scattering mode. Integrates to beta_sq
// over the full solid angle.
double radiation_pattern(PatternAxis axis, double theta, double phi, double beta_sq, double A);

// Numerical check of the pattern normalization: product quadrature on a
// regular (theta, phi) grid with `resolution` intervals per angle
// (Simpson in theta, periodic trapezoid in phi).
double pattern_solid_angle_integral(PatternAxis axis, double beta_sq, double A, int resolution);

struct AxisTriplet {
    double x;
    double y;
    double z;
};

struct NoiseLimits {
    AxisTriplet imprecision;  // displacement-referred imprecision PSD, m^2 s
    AxisTriplet backaction;   // photon-recoil force PSD, N^2 s
};

// Per-axis imprecision and backaction PSDs of the dipole-scattering
// measurement. Their product is hbar^2/(16 pi^2) on every axis.
NoiseLimits imprecision_backaction(const PhysicalParams& phys);

AxisTriplet heisenberg_product(const PhysicalParams& phys);

// theta minimizing the PSD at fixed omega (and the minimized value).
double optimal_theta(double omega, const ModelParams& params);
double min_psd_over_theta(double omega, const ModelParams& params);

struct PsdMinimum {
    double omega;
    double theta;
    double value;
};

// Global minimum of the PSD over (omega, theta) within [omega_lo, omega_hi].
PsdMinimum minimize_psd(const ModelParams& params, double omega_lo, double omega_hi);

}  // namespace sqz::model
