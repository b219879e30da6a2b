#include "sqz/model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"

namespace sqz::model {

using constants::pi;

void ModelParams::validate() const {
    if (!(omega_m > 0.0)) throw ParamError("omega_m must be positive");
    if (!(gamma_m > 0.0)) throw ParamError("gamma_m must be positive");
    if (!(gamma_qba >= 0.0)) throw ParamError("gamma_qba must be nonnegative");
    if (!(eta_d >= 0.0 && eta_d <= 1.0)) throw ParamError("eta_d must lie in [0,1]");
    if (!(n_bar >= 0.0)) throw ParamError("n_bar must be nonnegative");
    if (!(gamma_rp >= 0.0)) throw ParamError("gamma_rp must be nonnegative");
}

double ModelParams::equilibrium_shift() const {
    return std::sqrt(2.0 * gamma_qba * gamma_rp) / omega_m;
}

ModelParams ModelParams::from_rates(double omega_m, double gamma_m, double gamma_tot,
                                    double gamma_meas) {
    const double gamma_qba = gamma_tot - 0.5 * gamma_m;
    if (!(gamma_qba > 0.0))
        throw ParamError("gamma_tot must exceed gamma_m/2 for an n_bar = 0 split");
    if (!(gamma_meas >= 0.0 && gamma_meas <= gamma_qba))
        throw ParamError("gamma_meas must lie in [0, gamma_tot - gamma_m/2]");
    ModelParams p;
    p.omega_m = omega_m;
    p.gamma_m = gamma_m;
    p.gamma_qba = gamma_qba;
    p.eta_d = gamma_meas > 0.0 ? gamma_meas / gamma_qba : 0.0;
    p.n_bar = 0.0;
    p.validate();
    return p;
}

void PhysicalParams::validate() const {
    if (!(mass > 0.0)) throw ParamError("mass must be positive");
    if (!(polarizability > 0.0)) throw ParamError("polarizability must be positive");
    if (!(field_amplitude > 0.0)) throw ParamError("field_amplitude must be positive");
    if (!(waist_x > 0.0 && waist_y > 0.0)) throw ParamError("waists must be positive");
    if (!(rayleigh_range > 0.0)) throw ParamError("rayleigh_range must be positive");
    if (!(wavenumber > 0.0)) throw ParamError("wavenumber must be positive");
    if (!(scattered_power > 0.0)) throw ParamError("scattered_power must be positive");
    if (!std::isfinite(geometric_factor)) throw ParamError("geometric_factor must be finite");
}

double PhysicalParams::derive_geometric_factor(double wavenumber, double rayleigh_range) {
    return 1.0 - 1.0 / (wavenumber * rayleigh_range);
}

double PhysicalParams::derive_scattered_power(double polarizability, double field_amplitude,
                                              double wavenumber) {
    const double omega0 = wavenumber * constants::speed_of_light;
    const double c3 = constants::speed_of_light * constants::speed_of_light *
                      constants::speed_of_light;
    return std::pow(omega0, 4) * polarizability * polarizability * field_amplitude *
           field_amplitude / (12.0 * pi * constants::vacuum_permittivity * c3);
}

ComplexResponse susceptibility(double omega, const ModelParams& params) {
    params.validate();
    const std::complex<double> denom(params.omega_m * params.omega_m - omega * omega,
                                     -params.gamma_m * omega);
    return params.omega_m / denom;
}

double homodyne_psd(double omega, double theta, const ModelParams& params) {
    const ComplexResponse chi = susceptibility(omega, params);
    const double g_meas = params.gamma_meas();
    const double g_tot = params.gamma_tot();
    const double s = std::sin(theta);
    const double abs2 = std::norm(chi);
    return 1.0 + 8.0 * g_meas * s * s * abs2 * 2.0 * g_tot +
           2.0 * (2.0 * g_meas * chi.real() * std::sin(2.0 * theta));
}

MeasurementRates measurement_rates(const ModelParams& params) {
    params.validate();
    const double g_tot = params.gamma_tot();
    const double g_meas = params.gamma_meas();
    return {g_tot, g_meas, g_tot > 0.0 ? g_meas / g_tot : 0.0};
}

TrapFrequencies trap_frequencies(const PhysicalParams& phys) {
    phys.validate();
    const double k = phys.polarizability * phys.field_amplitude * phys.field_amplitude;
    return {
        std::sqrt(k / (phys.mass * phys.waist_x * phys.waist_x)),
        std::sqrt(k / (phys.mass * phys.waist_y * phys.waist_y)),
        std::sqrt(k / (2.0 * phys.mass * phys.rayleigh_range * phys.rayleigh_range)),
    };
}

double radiation_pattern(PatternAxis axis, double theta, double phi, double beta_sq, double A) {
    if (!(theta >= 0.0 && theta <= pi)) throw UsageError("polar angle outside [0, pi]");
    if (!(beta_sq >= 0.0)) throw ParamError("beta_sq must be nonnegative");
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    const double cp = std::cos(phi);
    const double sp = std::sin(phi);
    const double pol = 1.0 - cp * cp * st * st;  // polarization closure factor
    switch (axis) {
        case PatternAxis::X:
            return beta_sq * (15.0 / (8.0 * pi)) * pol * cp * cp * st * st;
        case PatternAxis::Y:
            return beta_sq * (15.0 / (16.0 * pi)) * pol * sp * sp * st * st;
        case PatternAxis::Z:
            return beta_sq * (15.0 / (8.0 * pi * (2.0 + 5.0 * A * A))) * pol * (ct - A) * (ct - A);
        case PatternAxis::Dipole:
            return beta_sq * (3.0 / (8.0 * pi)) * pol;
    }
    throw UsageError("unknown pattern axis");
}

double pattern_solid_angle_integral(PatternAxis axis, double beta_sq, double A, int resolution) {
    if (resolution < 16) throw UsageError("quadrature resolution must be >= 16");
    int n_theta = resolution;
    if (n_theta % 2 != 0) ++n_theta;  // Simpson needs an even interval count
    const int n_phi = resolution;
    const double h_theta = pi / n_theta;
    const double h_phi = constants::two_pi / n_phi;

    double integral = 0.0;
    for (int i = 0; i <= n_theta; ++i) {
        const double theta = i * h_theta;
        const double jac = std::sin(theta);
        // periodic trapezoid in phi
        double ring = 0.0;
        for (int j = 0; j < n_phi; ++j)
            ring += radiation_pattern(axis, theta, j * h_phi, beta_sq, A);
        ring *= h_phi * jac;
        const double w = (i == 0 || i == n_theta) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        integral += w * ring;
    }
    return integral * h_theta / 3.0;
}

NoiseLimits imprecision_backaction(const PhysicalParams& phys) {
    phys.validate();
    const double A = phys.geometric_factor;
    const double k0 = phys.wavenumber;
    const double omega0 = k0 * constants::speed_of_light;
    const double photon_rate = phys.scattered_power / (constants::hbar * omega0);

    const double imp_base = 5.0 / (8.0 * pi) / (k0 * k0) / photon_rate;
    const double ff_base = 0.2 * constants::hbar * constants::hbar * k0 * k0 /
                           constants::two_pi * photon_rate;
    // z imprecision weight is 1/(2+5A^2): the product with the recoil weight
    // (2+5A^2) must cancel axis-independently.
    return {
        {imp_base, 0.5 * imp_base, imp_base / (2.0 + 5.0 * A * A)},
        {ff_base, 2.0 * ff_base, (2.0 + 5.0 * A * A) * ff_base},
    };
}

AxisTriplet heisenberg_product(const PhysicalParams& phys) {
    const NoiseLimits n = imprecision_backaction(phys);
    return {
        n.imprecision.x * n.backaction.x,
        n.imprecision.y * n.backaction.y,
        n.imprecision.z * n.backaction.z,
    };
}

namespace {

// S(theta) = 1 + a sin^2(theta) + c sin(2 theta) with
// a = 16 G_meas G_tot |chi|^2, c = 4 G_meas Re[chi].
void theta_terms(double omega, const ModelParams& params, double& a, double& c) {
    const ComplexResponse chi = susceptibility(omega, params);
    a = 16.0 * params.gamma_meas() * params.gamma_tot() * std::norm(chi);
    c = 4.0 * params.gamma_meas() * chi.real();
}

}  // namespace

double optimal_theta(double omega, const ModelParams& params) {
    double a, c;
    theta_terms(omega, params, a, c);
    // minimum of 1 + a/2 - (a/2) cos(2t) + c sin(2t) at (cos, sin) ~ (a/2, -c)
    return 0.5 * std::atan2(-c, 0.5 * a);
}

double min_psd_over_theta(double omega, const ModelParams& params) {
    double a, c;
    theta_terms(omega, params, a, c);
    return 1.0 + 0.5 * a - std::sqrt(0.25 * a * a + c * c);
}

PsdMinimum minimize_psd(const ModelParams& params, double omega_lo, double omega_hi) {
    if (!(omega_hi > omega_lo && omega_lo > 0.0))
        throw UsageError("minimize_psd needs 0 < omega_lo < omega_hi");
    // coarse scan, then golden-section refinement around the best point
    const int n = 20000;
    double best_omega = omega_lo;
    double best = min_psd_over_theta(omega_lo, params);
    for (int i = 1; i <= n; ++i) {
        const double omega = omega_lo + (omega_hi - omega_lo) * i / n;
        const double v = min_psd_over_theta(omega, params);
        if (v < best) {
            best = v;
            best_omega = omega;
        }
    }
    const double step = (omega_hi - omega_lo) / n;
    double lo = std::max(omega_lo, best_omega - step);
    double hi = std::min(omega_hi, best_omega + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = min_psd_over_theta(x1, params);
    double f2 = min_psd_over_theta(x2, params);
    for (int it = 0; it < 200 && (hi - lo) > 1e-9 * best_omega; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = min_psd_over_theta(x1, params);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = min_psd_over_theta(x2, params);
        }
    }
    const double omega_star = 0.5 * (lo + hi);
    return {omega_star, optimal_theta(omega_star, params), min_psd_over_theta(omega_star, params)};
}

}  // namespace sqz::model
