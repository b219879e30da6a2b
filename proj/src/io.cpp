#include "sqz/io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sqz/errors.hpp"

namespace sqz::io {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'Z', 'B'};
constexpr std::uint32_t kBinaryVersion = 1;

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.precision(17);
    return out;
}

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated binary file");
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

std::string provenance_header(const Provenance& p) {
    std::ostringstream os;
    os << "# squeezelab " << kToolVersion << "; config=" << p.config_hash << "; seed=" << p.seed
       << "\n";
    return os.str();
}

struct TimeSeriesWriter::Impl {
    std::ofstream out;
    bool binary;
    std::uint64_t expected;
    std::uint64_t written = 0;
    double dt;
    bool finished = false;
    std::filesystem::path path;
};

TimeSeriesWriter::TimeSeriesWriter(const std::filesystem::path& path, bool binary,
                                   std::uint64_t n_samples, double dt, double theta, double eta_d,
                                   const Provenance& prov)
    : impl_(std::make_unique<Impl>()) {
    impl_->binary = binary;
    impl_->expected = n_samples;
    impl_->dt = dt;
    impl_->path = path;
    impl_->out = open_out(path, binary);
    if (binary) {
        auto& out = impl_->out;
        out.write(kMagic, sizeof(kMagic));
        put(out, kBinaryVersion);
        std::array<char, 16> hash{};
        std::memcpy(hash.data(), prov.config_hash.data(),
                    std::min<std::size_t>(hash.size(), prov.config_hash.size()));
        out.write(hash.data(), hash.size());
        put(out, prov.seed);
        put(out, dt);
        put(out, theta);
        put(out, eta_d);
        put(out, n_samples);
    } else {
        impl_->out << provenance_header(prov);
        impl_->out << "# dt=" << dt << " theta=" << theta << " eta_d=" << eta_d
                   << " n=" << n_samples << "\n";
        impl_->out << "t,value\n";
    }
}

TimeSeriesWriter::~TimeSeriesWriter() = default;

void TimeSeriesWriter::push(double sample) {
    if (impl_->binary) {
        put(impl_->out, sample);
    } else {
        impl_->out << static_cast<double>(impl_->written) * impl_->dt << "," << sample << "\n";
    }
    ++impl_->written;
}

void TimeSeriesWriter::finish() {
    if (impl_->finished) return;
    impl_->finished = true;
    if (impl_->written != impl_->expected)
        throw IoError("time-series writer: sample count mismatch for " + impl_->path.string());
    impl_->out.flush();
    if (!impl_->out) throw IoError("write failed: " + impl_->path.string());
}

void write_timeseries_csv(const std::filesystem::path& path, std::span<const double> samples,
                          double dt, double theta, double eta_d, const Provenance& prov) {
    auto out = open_out(path, false);
    out << provenance_header(prov);
    out << "# dt=" << dt << " theta=" << theta << " eta_d=" << eta_d << " n=" << samples.size()
        << "\n";
    out << "t,value\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        out << static_cast<double>(i) * dt << "," << samples[i] << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

void write_timeseries_binary(const std::filesystem::path& path, std::span<const double> samples,
                             double dt, double theta, double eta_d, const Provenance& prov) {
    auto out = open_out(path, true);
    out.write(kMagic, sizeof(kMagic));
    put(out, kBinaryVersion);
    std::array<char, 16> hash{};
    std::memcpy(hash.data(), prov.config_hash.data(),
                std::min<std::size_t>(hash.size(), prov.config_hash.size()));
    out.write(hash.data(), hash.size());
    put(out, prov.seed);
    put(out, dt);
    put(out, theta);
    put(out, eta_d);
    const std::uint64_t n = samples.size();
    put(out, n);
    out.write(reinterpret_cast<const char*>(samples.data()),
              static_cast<std::streamsize>(samples.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path.string());
}

TimeSeries read_timeseries(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4] = {};
    in.read(magic, sizeof(magic));
    if (!in) throw IoError("cannot read: " + path.string());
    TimeSeries ts;
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) == 0) {
        std::uint32_t version = 0;
        get(in, version);
        if (version != kBinaryVersion) throw IoError("unsupported binary version");
        std::array<char, 16> hash{};
        in.read(hash.data(), hash.size());
        get(in, ts.seed);
        get(in, ts.dt);
        get(in, ts.theta);
        get(in, ts.eta_d);
        std::uint64_t n = 0;
        get(in, n);
        ts.samples.resize(n);
        in.read(reinterpret_cast<char*>(ts.samples.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw IoError("truncated binary file: " + path.string());
        return ts;
    }
    // CSV fallback
    in.seekg(0);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string token;
            while (ls >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq);
                const std::string value = token.substr(eq + 1);
                try {
                    if (key == "dt") ts.dt = std::stod(value);
                    else if (key == "theta") ts.theta = std::stod(value);
                    else if (key == "eta_d") ts.eta_d = std::stod(value);
                    else if (key == "seed") ts.seed = std::stoull(value);
                } catch (const std::exception&) {
                    throw IoError("bad header value in " + path.string());
                }
            }
            continue;
        }
        if (line.rfind("t,", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("bad CSV row in " + path.string());
        try {
            ts.samples.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw IoError("bad CSV value in " + path.string());
        }
    }
    if (!(ts.dt > 0.0)) throw IoError("time-series CSV lacks a dt header: " + path.string());
    return ts;
}

void write_spectrum_csv(const std::filesystem::path& path, const spectral::Spectrum& spectrum,
                        const Provenance& prov) {
    spectrum.validate();
    auto out = open_out(path, false);
    out << provenance_header(prov);
    out << "# theta_inferred=" << spectrum.theta_inferred;
    if (spectrum.unbalance_voltage) out << " unbalance_voltage=" << *spectrum.unbalance_voltage;
    out << "\n";
    out << "freq_hz,psd_sn_units\n";
    for (std::size_t i = 0; i < spectrum.freqs_hz.size(); ++i)
        out << spectrum.freqs_hz[i] << "," << spectrum.values[i] << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

spectral::Spectrum read_spectrum_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    spectral::Spectrum s;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string token;
            while (ls >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq);
                try {
                    if (key == "theta_inferred") s.theta_inferred = std::stod(token.substr(eq + 1));
                    else if (key == "unbalance_voltage")
                        s.unbalance_voltage = std::stod(token.substr(eq + 1));
                } catch (const std::exception&) {
                    throw IoError("bad header value in " + path.string());
                }
            }
            continue;
        }
        if (line.rfind("freq_hz", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("bad CSV row in " + path.string());
        try {
            s.freqs_hz.push_back(std::stod(line.substr(0, comma)));
            s.values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw IoError("bad CSV value in " + path.string());
        }
    }
    s.validate();
    return s;
}

void write_sinogram_csv(const std::filesystem::path& path, const tomo::Sinogram& sinogram,
                        const Provenance& prov) {
    sinogram.validate();
    auto out = open_out(path, false);
    out << provenance_header(prov);
    out << "angle_rad,bin_center,density\n";
    const auto centers = sinogram.bin_centers();
    for (std::size_t a = 0; a < sinogram.angles.size(); ++a)
        for (std::size_t b = 0; b < centers.size(); ++b)
            out << sinogram.angles[a] << "," << centers[b] << "," << sinogram.density[a][b]
                << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

void write_wigner_grid(const std::filesystem::path& path, const tomo::WignerGrid& grid,
                       const Provenance& prov) {
    auto out = open_out(path, false);
    out << provenance_header(prov);
    out << "# extent=" << grid.extent << " size=" << grid.size << "\n";
    for (std::size_t iy = 0; iy < grid.size; ++iy) {
        for (std::size_t ix = 0; ix < grid.size; ++ix) {
            out << grid.at(ix, iy);
            out << (ix + 1 == grid.size ? '\n' : ',');
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    auto out = open_out(path, false);
    out << contents;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sqz::io
