#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "sqz/constants.hpp"
#include "sqz/errors.hpp"
#include "sqz/io.hpp"
#include "sqz/langevin.hpp"
#include "sqz/model.hpp"
#include "sqz/spectral.hpp"
#include "sqz/threading.hpp"
#include "sqz/tomography.hpp"

namespace sqzlab {

namespace fs = std::filesystem;
using sqz::constants::pi;
using sqz::constants::two_pi;

namespace {

constexpr std::uint32_t kShotStream = 9999;

struct Context {
    IniFile ini;
    sqz::io::Provenance prov;
    std::uint64_t seed = 1;
    fs::path out;
    bool binary = true;
};

void apply_preset(IniFile& ini, const std::string& preset) {
    if (preset.empty()) return;
    if (preset != "paper-2021") throw sqz::ConfigError("unknown preset: " + preset);
    // fitted rates of the 2021 free-space squeezing run; values are defaults,
    // an explicit config file overrides them
    const std::map<std::string, std::string> defaults = {
        {"model.omega_m_hz", "73250"},    {"model.gamma_m_hz", "40"},
        {"model.gamma_tot_hz", "5000"},   {"model.gamma_meas_hz", "1400"},
        {"tomography.center_freqs_hz", "70100,77100"},
    };
    for (const auto& [k, v] : defaults)
        if (!ini.has(k)) ini.values()[k] = v;
}

Context make_context(const AppOptions& options) {
    Context ctx;
    if (!options.config_path.empty()) ctx.ini = IniFile::load(options.config_path);
    apply_preset(ctx.ini, options.preset);
    ctx.seed = options.seed_given
                   ? options.seed
                   : static_cast<std::uint64_t>(ctx.ini.get_int("sim.seed", 1));
    ctx.out = options.out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (!fs::is_directory(ctx.out))
        throw sqz::IoError("cannot create output directory: " + ctx.out.string());
    if (options.format != "binary" && options.format != "csv")
        throw sqz::UsageError("format must be 'binary' or 'csv'");
    ctx.binary = options.format == "binary";
    ctx.prov.seed = ctx.seed;
    ctx.prov.config_hash = sqz::io::fnv1a_hex("preset=" + options.preset + "\n" +
                                              ctx.ini.canonical() + "seed=" +
                                              std::to_string(ctx.seed) + "\n");
    return ctx;
}

sqz::model::ModelParams model_from_config(const IniFile& ini) {
    const double omega_m = two_pi * ini.get_double("model.omega_m_hz", 0.0);
    const double gamma_m = two_pi * ini.get_double("model.gamma_m_hz", 0.0);
    if (!(omega_m > 0.0 && gamma_m > 0.0))
        throw sqz::ConfigError("model.omega_m_hz and model.gamma_m_hz are required "
                               "(set a preset or a config file)");
    sqz::model::ModelParams p;
    if (ini.has("model.gamma_qba_hz")) {
        p.omega_m = omega_m;
        p.gamma_m = gamma_m;
        p.gamma_qba = two_pi * ini.get_double("model.gamma_qba_hz", 0.0);
        p.eta_d = ini.get_double("model.eta_d", 1.0);
        p.n_bar = ini.get_double("model.n_bar", 0.0);
    } else {
        p = sqz::model::ModelParams::from_rates(
            omega_m, gamma_m, two_pi * ini.get_double("model.gamma_tot_hz", 0.0),
            two_pi * ini.get_double("model.gamma_meas_hz", 0.0));
    }
    p.gamma_rp = two_pi * ini.get_double("model.gamma_rp_hz", 0.0);
    p.validate();
    return p;
}

// representative silica-like trap; every entry can be overridden in [physical]
sqz::model::PhysicalParams physical_from_config(const IniFile& ini) {
    sqz::model::PhysicalParams p;
    p.mass = ini.get_double("physical.mass_kg", 1.1519173063162575e-18);
    p.polarizability = ini.get_double("physical.polarizability", 3.7376498663353964e-33);
    p.field_amplitude = ini.get_double("physical.field_amplitude", 9.7e6);
    p.waist_x = ini.get_double("physical.waist_x_m", 0.60e-6);
    p.waist_y = ini.get_double("physical.waist_y_m", 0.70e-6);
    p.rayleigh_range = ini.get_double("physical.rayleigh_range_m", 0.85e-6);
    const double wavelength = ini.get_double("physical.wavelength_m", 1550e-9);
    p.wavenumber = ini.get_double("physical.wavenumber", two_pi / wavelength);
    p.geometric_factor = ini.get_double(
        "physical.geometric_factor",
        sqz::model::PhysicalParams::derive_geometric_factor(p.wavenumber, p.rayleigh_range));
    p.scattered_power = ini.get_double(
        "physical.scattered_power_w",
        sqz::model::PhysicalParams::derive_scattered_power(p.polarizability, p.field_amplitude,
                                                           p.wavenumber));
    p.validate();
    return p;
}

std::vector<double> parse_angles(const std::string& spec) {
    std::vector<double> angles;
    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        try {
            if (token.size() > 2 && token.substr(token.size() - 2) == "pi")
                angles.push_back(pi * std::stod(token.substr(0, token.size() - 2)));
            else
                angles.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw sqz::UsageError("bad angle token: " + token);
        }
    }
    for (double a : angles)
        if (a < 0.0 || a > pi + 1e-9)
            throw sqz::UsageError("angles must lie in [0, pi]");
    return angles;
}

std::vector<double> resolve_angles(const AppOptions& options, const Context& ctx,
                                   const std::string& fallback) {
    const std::string spec = !options.angles_spec.empty()
                                 ? options.angles_spec
                                 : ctx.ini.get("sim.angles", fallback);
    auto angles = parse_angles(spec);
    if (angles.empty()) throw sqz::UsageError("no analyser angles given");
    return angles;
}

sqz::langevin::SimConfig sim_from_config(const AppOptions& options, const Context& ctx,
                                         const sqz::model::ModelParams& params) {
    sqz::langevin::SimConfig cfg;
    cfg.params = params;
    cfg.dt = options.dt > 0.0 ? options.dt
                              : ctx.ini.get_double("sim.dt", 0.02 / params.omega_m);
    cfg.n_samples = options.n_samples > 0
                        ? static_cast<std::uint64_t>(options.n_samples)
                        : static_cast<std::uint64_t>(ctx.ini.get_int("sim.n_samples", 2000000));
    cfg.seed = ctx.seed;
    const double drive_amp =
        options.drive_amplitude != 0.0 ? options.drive_amplitude
                                       : ctx.ini.get_double("sim.drive_amplitude", 0.0);
    const double drive_freq = options.drive_freq_hz > 0.0
                                  ? options.drive_freq_hz
                                  : ctx.ini.get_double("sim.drive_freq_hz", 0.0);
    if (drive_amp != 0.0 && drive_freq > 0.0)
        cfg.drive = sqz::langevin::Drive{drive_amp, two_pi * drive_freq};
    cfg.validate();
    return cfg;
}

double resolve_theta_offset(const AppOptions& options, const Context& ctx) {
    return options.theta_offset != 0.0 ? options.theta_offset
                                       : ctx.ini.get_double("sim.theta_offset", 0.0);
}

std::string format_rates(const sqz::model::ModelParams& p) {
    std::ostringstream os;
    os.precision(10);
    os << "omega_m_hz = " << p.omega_m / two_pi << "\n"
       << "gamma_m_hz = " << p.gamma_m / two_pi << "\n"
       << "gamma_qba_hz = " << p.gamma_qba / two_pi << "\n"
       << "eta_d = " << p.eta_d << "\n"
       << "n_bar = " << p.n_bar << "\n"
       << "gamma_rp_hz = " << p.gamma_rp / two_pi << "\n"
       << "gamma_tot_hz = " << p.gamma_tot() / two_pi << "\n"
       << "gamma_meas_hz = " << p.gamma_meas() / two_pi << "\n"
       << "eta_meas = " << p.eta_meas() << "\n";
    return os.str();
}

std::string ellipse_block(const std::string& label, const sqz::tomo::CovarianceEllipse& e) {
    std::ostringstream os;
    os.precision(10);
    os << label << ".var_x = " << e.var_x << "\n"
       << label << ".var_y = " << e.var_y << "\n"
       << label << ".cov_xy = " << e.cov_xy << "\n"
       << label << ".minor_variance = " << e.minor_variance() << "\n"
       << label << ".major_variance = " << e.major_variance() << "\n"
       << label << ".tilt_rad = " << e.tilt() << "\n"
       << label << ".physical = " << (e.physical ? "yes" : "no") << "\n";
    return os.str();
}

std::string angle_file_tag(std::size_t index) {
    std::ostringstream os;
    os.width(2);
    os.fill('0');
    os << index;
    return os.str();
}

}  // namespace

int run_simulate(const AppOptions& options) {
    const Context ctx = make_context(options);
    const auto params = model_from_config(ctx.ini);
    const auto base = sim_from_config(options, ctx, params);
    const double theta_offset = resolve_theta_offset(options, ctx);
    const auto angles = resolve_angles(options, ctx, "0,0.125pi,0.25pi,0.375pi,0.5pi,0.75pi,0.9pi");
    const std::string ext = ctx.binary ? ".bin" : ".csv";

    sqz::threading::parallel_for(angles.size(), [&](std::size_t i) {
        auto cfg = base;
        cfg.trajectory_index = static_cast<std::uint32_t>(i);
        sqz::langevin::Stepper stepper(cfg);
        sqz::io::TimeSeriesWriter writer(ctx.out / ("photocurrent_" + angle_file_tag(i) + ext),
                                         ctx.binary, cfg.n_samples, cfg.dt, angles[i],
                                         params.eta_d, ctx.prov);
        std::unique_ptr<sqz::io::TimeSeriesWriter> qwriter;
        if (options.save_trajectory)
            qwriter = std::make_unique<sqz::io::TimeSeriesWriter>(
                ctx.out / ("trajectory_q_" + angle_file_tag(i) + ext), ctx.binary, cfg.n_samples,
                cfg.dt, angles[i], params.eta_d, ctx.prov);
        for (std::uint64_t k = 0; k < cfg.n_samples; ++k) {
            const auto s = stepper.next();
            writer.push(sqz::langevin::photocurrent_sample(s, params, angles[i], params.eta_d,
                                                           theta_offset));
            if (qwriter) qwriter->push(s.q);
        }
        writer.finish();
        if (qwriter) qwriter->finish();
    });

    // shot-noise reference: backaction switched off
    {
        auto cfg = base;
        cfg.params.gamma_qba = 0.0;
        cfg.params.n_bar = 0.0;
        cfg.trajectory_index = kShotStream;
        sqz::langevin::Stepper stepper(cfg);
        sqz::io::TimeSeriesWriter writer(ctx.out / ("shot_reference" + ext), ctx.binary,
                                         cfg.n_samples, cfg.dt, 0.5 * pi, params.eta_d, ctx.prov);
        for (std::uint64_t k = 0; k < cfg.n_samples; ++k)
            writer.push(sqz::langevin::photocurrent_sample(stepper.next(), cfg.params, 0.5 * pi,
                                                           params.eta_d, theta_offset));
        writer.finish();
    }

    std::ostringstream meta;
    meta << sqz::io::provenance_header(ctx.prov) << format_rates(params);
    meta.precision(17);
    meta << "dt = " << base.dt << "\n"
         << "n_samples = " << base.n_samples << "\n"
         << "theta_offset = " << theta_offset << "\n"
         << "angles_rad =";
    for (double a : angles) meta << " " << a;
    meta << "\nshot_reference_stream = " << kShotStream << "\n";
    sqz::io::write_text_file(ctx.out / "metadata.txt", meta.str());
    std::cout << "simulate: wrote " << angles.size() << " photocurrent record(s) + shot reference"
              << " to " << ctx.out.string() << "\n";
    return 0;
}

int run_fit(const AppOptions& options) {
    const Context ctx = make_context(options);
    if (options.inputs.empty()) throw sqz::UsageError("fit: no spectrum files given");
    std::vector<sqz::spectral::Spectrum> spectra;
    for (const auto& f : options.inputs) spectra.push_back(sqz::io::read_spectrum_csv(f));

    // initial guess: config values if present, else a peak-based heuristic
    sqz::spectral::FitInit init;
    std::size_t peak_spectrum = 0, peak_bin = 0;
    double peak_value = 0.0;
    for (std::size_t i = 0; i < spectra.size(); ++i)
        for (std::size_t k = 0; k < spectra[i].values.size(); ++k)
            if (spectra[i].values[k] > peak_value) {
                peak_value = spectra[i].values[k];
                peak_spectrum = i;
                peak_bin = k;
            }
    const double f_peak = spectra[peak_spectrum].freqs_hz[peak_bin];
    init.gamma_m = two_pi * ctx.ini.get_double("fit.init_gamma_m_hz", 100.0);
    init.omega_m = {two_pi * ctx.ini.get_double("fit.init_omega_m_hz", f_peak)};
    const double s_theta = std::abs(std::sin(spectra[peak_spectrum].theta_inferred));
    const double product = std::max(peak_value - 1.0, 1e-3) * init.gamma_m * init.gamma_m /
                           (16.0 * std::max(s_theta * s_theta, 0.05));
    init.gamma_tot = two_pi * ctx.ini.get_double("fit.init_gamma_tot_hz",
                                                 std::sqrt(3.0 * product) / two_pi);
    init.gamma_meas = two_pi * ctx.ini.get_double("fit.init_gamma_meas_hz",
                                                  std::sqrt(product / 3.0) / two_pi);

    const sqz::spectral::Band band{
        ctx.ini.get_double("fit.band_lo_hz", f_peak - 25e3),
        ctx.ini.get_double("fit.band_hi_hz", f_peak + 25e3),
    };
    const auto fit = sqz::spectral::fit_multi(spectra, band, init);

    std::ostringstream report;
    report << sqz::io::provenance_header(ctx.prov);
    report.precision(10);
    report << "converged = " << (fit.converged ? "yes" : "no") << "\n"
           << "iterations = " << fit.iterations << "\n"
           << "gamma_m_hz = " << fit.gamma_m / two_pi << " +- " << fit.gamma_m_err / two_pi << "\n"
           << "gamma_tot_hz = " << fit.gamma_tot / two_pi << " +- " << fit.gamma_tot_err / two_pi
           << "\n"
           << "gamma_meas_hz = " << fit.gamma_meas / two_pi << " +- "
           << fit.gamma_meas_err / two_pi << "\n"
           << "eta_meas = " << fit.eta_meas() << "\n"
           << "eta_clamped = " << (fit.eta_clamped ? "yes" : "no") << "\n"
           << "reduced_chi_sq = " << fit.reduced_chi_sq << "\n"
           << "angle_slope = " << fit.angle_slope << "\n"
           << "angle_offset_rad = " << fit.angle_offset << "\n";
    for (std::size_t i = 0; i < spectra.size(); ++i)
        report << "spectrum_" << i << ".theta_inferred_rad = " << spectra[i].theta_inferred
               << "\nspectrum_" << i << ".theta_fit_rad = " << fit.theta[i] << " +- "
               << fit.theta_err[i] << "\nspectrum_" << i
               << ".omega_m_hz = " << fit.omega_m[i] / two_pi << " +- "
               << fit.omega_m_err[i] / two_pi << "\n";
    sqz::io::write_text_file(ctx.out / "fit_report.txt", report.str());

    // predicted PSD grid over (theta, omega) from the fitted parameters
    std::ostringstream pred;
    pred << sqz::io::provenance_header(ctx.prov) << "theta_rad,freq_hz,psd_sn_units\n";
    pred.precision(10);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        const auto params = sqz::model::ModelParams::from_rates(fit.omega_m[i], fit.gamma_m,
                                                                fit.gamma_tot, fit.gamma_meas);
        for (double f = band.lo_hz; f <= band.hi_hz; f += 25.0)
            pred << fit.theta[i] << "," << f << ","
                 << sqz::model::homodyne_psd(two_pi * f, fit.theta[i], params) << "\n";
    }
    sqz::io::write_text_file(ctx.out / "predicted_spectra.csv", pred.str());
    std::cout << "fit: gamma_tot/2pi = " << fit.gamma_tot / two_pi
              << " Hz, gamma_meas/2pi = " << fit.gamma_meas / two_pi
              << " Hz, eta_meas = " << fit.eta_meas() << "\n";
    return 0;
}

int run_tomography(const AppOptions& options) {
    const Context ctx = make_context(options);
    if (options.inputs.size() < 5)
        throw sqz::UsageError("tomography: need photocurrent records for at least 5 angles");

    std::vector<sqz::io::TimeSeries> records(options.inputs.size());
    for (std::size_t i = 0; i < options.inputs.size(); ++i)
        records[i] = sqz::io::read_timeseries(options.inputs[i]);

    std::vector<double> center_freqs = options.center_freqs_hz;
    if (center_freqs.empty()) {
        std::stringstream ss(ctx.ini.get("tomography.center_freqs_hz", "70100"));
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) center_freqs.push_back(std::stod(tok));
    }
    const double chunk = 1e-3 * ctx.ini.get_double("tomography.chunk_ms", 8.26);
    const auto bins = static_cast<std::size_t>(ctx.ini.get_int("tomography.bins", 64));
    const auto grid_size = static_cast<std::size_t>(ctx.ini.get_int("tomography.grid", 128));
    sqz::tomo::SartOptions sart;
    sart.sweeps = static_cast<int>(ctx.ini.get_int("tomography.sweeps", 60));
    sart.relaxation = ctx.ini.get_double("tomography.relaxation", 0.5);
    const double range_cfg = ctx.ini.get_double("tomography.range", 0.0);

    const bool have_model = ctx.ini.has("model.omega_m_hz");
    sqz::model::ModelParams params;
    if (have_model) params = model_from_config(ctx.ini);

    for (const double f0 : center_freqs) {
        std::vector<std::vector<double>> samples(records.size());
        std::vector<double> angles(records.size());
        sqz::threading::parallel_for(records.size(), [&](std::size_t i) {
            sqz::langevin::PhotocurrentRecord rec;
            rec.samples = records[i].samples;
            rec.dt = records[i].dt;
            rec.theta = records[i].theta;
            const auto modes = sqz::tomo::extract_modes(rec, chunk, f0);
            samples[i] = modes.quadrature_samples();
            angles[i] = records[i].theta;
        });
        double range = range_cfg;
        if (!(range > 0.0)) {
            double max_var = 0.0;
            for (const auto& s : samples) {
                double var = 0.0;
                for (double x : s) var += x * x;
                max_var = std::max(max_var, var / static_cast<double>(s.size()));
            }
            range = 4.0 * std::sqrt(max_var);
        }
        const auto sino = sqz::tomo::build_sinogram(samples, angles, bins, range);
        const auto result = sqz::tomo::sart_reconstruct(sino, grid_size, sart);
        const auto ellipse = sqz::tomo::grid_covariance(result.grid);

        const std::string tag = std::to_string(static_cast<long long>(std::llround(f0)));
        sqz::io::write_sinogram_csv(ctx.out / ("sinogram_" + tag + ".csv"), sino, ctx.prov);
        sqz::io::write_wigner_grid(ctx.out / ("wigner_" + tag + ".txt"), result.grid, ctx.prov);

        std::ostringstream rep;
        rep << sqz::io::provenance_header(ctx.prov);
        rep.precision(10);
        rep << "center_freq_hz = " << f0 << "\nchunk_duration_s = " << chunk
            << "\nmode_samples_per_angle = " << samples.front().size() << "\n";
        rep << ellipse_block("reconstructed", ellipse);
        if (have_model)
            rep << ellipse_block("theoretical", sqz::tomo::theoretical_covariance(f0, params));
        if (!options.shot_path.empty()) {
            const auto shot = sqz::io::read_timeseries(options.shot_path);
            sqz::langevin::PhotocurrentRecord rec;
            rec.samples = shot.samples;
            rec.dt = shot.dt;
            rec.theta = shot.theta;
            const auto modes = sqz::tomo::extract_modes(rec, chunk, f0);
            const auto q = modes.quadrature_samples();
            double var = 0.0;
            for (double x : q) var += x * x;
            var /= static_cast<double>(q.size());
            sqz::tomo::CovarianceEllipse vac;
            vac.var_x = vac.var_y = var;
            vac.cov_xy = 0.0;
            rep << ellipse_block("vacuum_reference", vac);
        } else {
            rep << ellipse_block("vacuum_reference", {0.5, 0.5, 0.0, true});
        }
        sqz::io::write_text_file(ctx.out / ("ellipse_" + tag + ".txt"), rep.str());
        std::cout << "tomography @ " << f0 << " Hz: minor variance "
                  << ellipse.minor_variance() << " (vacuum 0.5)\n";
    }
    return 0;
}

int run_patterns(const AppOptions& options) {
    const Context ctx = make_context(options);
    const auto phys = physical_from_config(ctx.ini);
    const double beta_sq = ctx.ini.get_double("patterns.beta_sq", 1.0);
    const auto res = static_cast<int>(ctx.ini.get_int("patterns.resolution", 64));
    const double A = phys.geometric_factor;

    const std::pair<sqz::model::PatternAxis, const char*> axes[] = {
        {sqz::model::PatternAxis::X, "x"},
        {sqz::model::PatternAxis::Y, "y"},
        {sqz::model::PatternAxis::Z, "z"},
        {sqz::model::PatternAxis::Dipole, "dipole"},
    };
    for (const auto& [axis, name] : axes) {
        std::ostringstream csv;
        csv << sqz::io::provenance_header(ctx.prov) << "theta_rad,phi_rad,density_per_sr\n";
        csv.precision(10);
        for (int i = 0; i <= res; ++i) {
            const double theta = pi * i / res;
            for (int j = 0; j < 2 * res; ++j) {
                const double phi = two_pi * j / (2 * res);
                csv << theta << "," << phi << ","
                    << sqz::model::radiation_pattern(axis, theta, phi, beta_sq, A) << "\n";
            }
        }
        sqz::io::write_text_file(ctx.out / (std::string("pattern_") + name + ".csv"), csv.str());
    }

    const auto limits = sqz::model::imprecision_backaction(phys);
    const auto product = sqz::model::heisenberg_product(phys);
    const auto traps = sqz::model::trap_frequencies(phys);
    std::ostringstream rep;
    rep << sqz::io::provenance_header(ctx.prov);
    rep.precision(10);
    rep << "geometric_factor_A = " << A << "\n"
        << "scattered_power_w = " << phys.scattered_power << "\n"
        << "trap_freq_x_hz = " << traps.omega_x / two_pi << "\n"
        << "trap_freq_y_hz = " << traps.omega_y / two_pi << "\n"
        << "trap_freq_z_hz = " << traps.omega_z / two_pi << "\n"
        << "s_imp_x = " << limits.imprecision.x << "\ns_imp_y = " << limits.imprecision.y
        << "\ns_imp_z = " << limits.imprecision.z << "\n"
        << "s_ff_x = " << limits.backaction.x << "\ns_ff_y = " << limits.backaction.y
        << "\ns_ff_z = " << limits.backaction.z << "\n"
        << "heisenberg_product_x = " << product.x << "\nheisenberg_product_y = " << product.y
        << "\nheisenberg_product_z = " << product.z << "\n";
    for (const auto& [axis, name] : axes)
        rep << "solid_angle_integral_" << name << " = "
            << sqz::model::pattern_solid_angle_integral(axis, beta_sq, A, 512) << "\n";
    sqz::io::write_text_file(ctx.out / "limits_report.txt", rep.str());
    std::cout << "patterns: wrote 4 pattern grids and limits_report.txt to " << ctx.out.string()
              << "\n";
    return 0;
}

int run_pipeline(const AppOptions& options) {
    const Context ctx = make_context(options);
    const auto params = model_from_config(ctx.ini);
    const auto base = sim_from_config(options, ctx, params);
    const double theta_offset = resolve_theta_offset(options, ctx);
    const auto angles = resolve_angles(
        options, ctx, "0.05pi,0.15pi,0.25pi,0.35pi,0.45pi,0.55pi,0.65pi,0.75pi,0.85pi,0.95pi");

    std::vector<double> center_freqs = options.center_freqs_hz;
    if (center_freqs.empty()) {
        std::stringstream ss(ctx.ini.get("tomography.center_freqs_hz", "70100"));
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) center_freqs.push_back(std::stod(tok));
    }
    const double chunk = 1e-3 * ctx.ini.get_double("tomography.chunk_ms", 8.26);

    sqz::spectral::WelchParams wp;
    wp.segment_length = static_cast<std::size_t>(
        ctx.ini.get_int("welch.segment_length", 1 << 19));
    wp.overlap = ctx.ini.get_double("welch.overlap", 0.5);
    if (wp.segment_length > base.n_samples)
        throw sqz::ConfigError("pipeline: welch.segment_length exceeds sim.n_samples");

    // one streaming pass per angle: PSD + temporal modes for every center freq
    std::vector<sqz::spectral::Spectrum> spectra(angles.size());
    std::vector<std::vector<std::vector<double>>> mode_samples(
        center_freqs.size(), std::vector<std::vector<double>>(angles.size()));
    sqz::threading::parallel_for(angles.size(), [&](std::size_t i) {
        auto cfg = base;
        cfg.trajectory_index = static_cast<std::uint32_t>(i);
        sqz::langevin::Stepper stepper(cfg);
        sqz::spectral::WelchAccumulator welch(wp, cfg.dt);
        std::vector<sqz::tomo::ModeAccumulator> modes;
        for (double f0 : center_freqs) modes.emplace_back(cfg.dt, chunk, f0);
        for (std::uint64_t k = 0; k < cfg.n_samples; ++k) {
            const auto s = stepper.next();
            const double it = sqz::langevin::photocurrent_sample(s, params, angles[i],
                                                                 params.eta_d, theta_offset);
            welch.push(it);
            for (auto& m : modes) m.push(it);
        }
        spectra[i] = welch.finalize();
        spectra[i].theta_inferred = angles[i];
        for (std::size_t c = 0; c < center_freqs.size(); ++c) {
            sqz::tomo::TemporalModeSamples tm;
            tm.modes = modes[c].modes();
            mode_samples[c][i] = tm.quadrature_samples();
        }
    });

    // shot-noise reference pass
    sqz::spectral::Spectrum shot_spectrum;
    std::vector<double> shot_mode_variance(center_freqs.size(), 0.0);
    {
        auto cfg = base;
        cfg.params.gamma_qba = 0.0;
        cfg.params.n_bar = 0.0;
        cfg.trajectory_index = kShotStream;
        sqz::langevin::Stepper stepper(cfg);
        sqz::spectral::WelchAccumulator welch(wp, cfg.dt);
        std::vector<sqz::tomo::ModeAccumulator> modes;
        for (double f0 : center_freqs) modes.emplace_back(cfg.dt, chunk, f0);
        for (std::uint64_t k = 0; k < cfg.n_samples; ++k) {
            const double it = sqz::langevin::photocurrent_sample(stepper.next(), cfg.params,
                                                                 0.5 * pi, params.eta_d, 0.0);
            welch.push(it);
            for (auto& m : modes) m.push(it);
        }
        shot_spectrum = welch.finalize();
        for (std::size_t c = 0; c < center_freqs.size(); ++c) {
            double var = 0.0;
            for (const auto& m : modes[c].modes()) var += std::norm(m);
            shot_mode_variance[c] = var / (2.0 * static_cast<double>(modes[c].modes().size()));
        }
    }

    const sqz::spectral::Band shot_band{
        ctx.ini.get_double("calibration.band_lo_hz", 75e3),
        ctx.ini.get_double("calibration.band_hi_hz", 85e3),
    };
    sqz::io::write_spectrum_csv(ctx.out / "shot_spectrum.csv", shot_spectrum, ctx.prov);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        spectra[i] = sqz::spectral::normalize_to_shot_noise(spectra[i], shot_spectrum, shot_band);
        sqz::io::write_spectrum_csv(ctx.out / ("spectrum_" + angle_file_tag(i) + ".csv"),
                                    spectra[i], ctx.prov);
    }

    // simultaneous fit, initialized from the generating rates
    sqz::spectral::FitInit init;
    init.gamma_m = params.gamma_m;
    init.gamma_tot = params.gamma_tot();
    init.gamma_meas = std::max(params.gamma_meas(), 1e-3 * params.gamma_tot());
    init.omega_m = {params.omega_m};
    const sqz::spectral::Band band{params.omega_m / two_pi - 25e3, params.omega_m / two_pi + 25e3};
    const auto fit = sqz::spectral::fit_multi(spectra, band, init);

    std::ostringstream report;
    report << sqz::io::provenance_header(ctx.prov);
    report.precision(10);
    report << "ground_truth:\n" << format_rates(params) << "fit:\n"
           << "gamma_m_hz = " << fit.gamma_m / two_pi << " +- " << fit.gamma_m_err / two_pi << "\n"
           << "gamma_tot_hz = " << fit.gamma_tot / two_pi << " +- " << fit.gamma_tot_err / two_pi
           << "\n"
           << "gamma_meas_hz = " << fit.gamma_meas / two_pi << " +- "
           << fit.gamma_meas_err / two_pi << "\n"
           << "eta_meas = " << fit.eta_meas() << "\n"
           << "angle_slope = " << fit.angle_slope << "\n"
           << "angle_offset_rad = " << fit.angle_offset << "\n"
           << "theta_offset_injected_rad = " << theta_offset << "\n";
    sqz::io::write_text_file(ctx.out / "fit_report.txt", report.str());

    // tomography per analysis frequency
    const auto bins = static_cast<std::size_t>(ctx.ini.get_int("tomography.bins", 64));
    const auto grid_size = static_cast<std::size_t>(ctx.ini.get_int("tomography.grid", 128));
    sqz::tomo::SartOptions sart;
    sart.sweeps = static_cast<int>(ctx.ini.get_int("tomography.sweeps", 60));
    sart.relaxation = ctx.ini.get_double("tomography.relaxation", 0.5);
    for (std::size_t c = 0; c < center_freqs.size(); ++c) {
        double max_var = 0.0;
        for (const auto& s : mode_samples[c]) {
            double var = 0.0;
            for (double x : s) var += x * x;
            max_var = std::max(max_var, var / static_cast<double>(s.size()));
        }
        const double range = 4.0 * std::sqrt(max_var);
        const auto sino = sqz::tomo::build_sinogram(mode_samples[c], angles, bins, range);
        const auto result = sqz::tomo::sart_reconstruct(sino, grid_size, sart);
        const auto ellipse = sqz::tomo::grid_covariance(result.grid);
        const std::string tag =
            std::to_string(static_cast<long long>(std::llround(center_freqs[c])));
        sqz::io::write_sinogram_csv(ctx.out / ("sinogram_" + tag + ".csv"), sino, ctx.prov);
        sqz::io::write_wigner_grid(ctx.out / ("wigner_" + tag + ".txt"), result.grid, ctx.prov);
        std::ostringstream rep;
        rep << sqz::io::provenance_header(ctx.prov);
        rep.precision(10);
        rep << "center_freq_hz = " << center_freqs[c] << "\n";
        rep << ellipse_block("reconstructed", ellipse);
        rep << ellipse_block("theoretical",
                             sqz::tomo::theoretical_covariance(center_freqs[c], params));
        sqz::tomo::CovarianceEllipse vac;
        vac.var_x = vac.var_y = shot_mode_variance[c];
        vac.cov_xy = 0.0;
        rep << ellipse_block("vacuum_reference", vac);
        sqz::io::write_text_file(ctx.out / ("ellipse_" + tag + ".txt"), rep.str());
    }

    std::ostringstream meta;
    meta << sqz::io::provenance_header(ctx.prov) << format_rates(params);
    meta << "dt = " << base.dt << "\nn_samples_per_angle = " << base.n_samples << "\nangles_rad =";
    for (double a : angles) meta << " " << a;
    meta << "\n";
    sqz::io::write_text_file(ctx.out / "metadata.txt", meta.str());
    std::cout << "pipeline: fit eta_meas = " << fit.eta_meas() << "; artifacts in "
              << ctx.out.string() << "\n";
    return 0;
}

}  // namespace sqzlab
