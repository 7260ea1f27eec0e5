#include "sparselets/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace sparselets {

namespace {

std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto t = trim(s);
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw std::invalid_argument("config: '" + key + "' expects a number, got '" + s + "'");
    return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& s) {
    Int v = 0;
    const auto t = trim(s);
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + s + "'");
    return v;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

std::vector<double> to_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(to_double(key, item));
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define SL_DOUBLE(name, member) \
    Field{name, [](const RunConfig& c) { return fmt(c.member); }, \
          [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); }}
#define SL_INT(name, member, type) \
    Field{name, [](const RunConfig& c) { return std::to_string(c.member); }, \
          [](RunConfig& c, const std::string& v) { c.member = to_int<type>(name, v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        SL_INT("image_size", image_size, int),
        SL_INT("seed", seed, std::uint64_t),
        SL_INT("bank.n_scales", bank.n_scales, int),
        SL_INT("bank.n_orientations", bank.n_orientations, int),
        SL_DOUBLE("bank.bandwidth_log_frequency", bank.bandwidth_log_frequency),
        SL_DOUBLE("bank.bandwidth_orientation", bank.bandwidth_orientation),
        SL_DOUBLE("bank.scale_ratio", bank.scale_ratio),
        SL_DOUBLE("bank.f_max", bank.f_max),
        SL_DOUBLE("bank.samples_per_wavelength", bank.samples_per_wavelength),
        Field{"bank.orientations", [](const RunConfig& c) { return fmt_list(c.bank.orientations); },
              [](RunConfig& c, const std::string& v) { c.bank.orientations = to_list("bank.orientations", v); }},
        SL_DOUBLE("pursuit.alpha", pursuit.alpha),
        SL_INT("pursuit.max_edges", pursuit.max_edges, int),
        SL_DOUBLE("pursuit.energy_threshold", pursuit.energy_threshold),
        SL_DOUBLE("pursuit.tie_epsilon", pursuit.tie_epsilon),
        SL_INT("pursuit.refresh_interval", pursuit.refresh_interval, int),
        SL_DOUBLE("pursuit.kernel_tolerance", pursuit.kernel_tolerance),
        SL_INT("shl.patch_side", shl.patch_side, int),
        SL_INT("shl.n_atoms", shl.n_atoms, int),
        SL_DOUBLE("shl.eta", shl.eta),
        SL_DOUBLE("shl.burn_in_fraction", shl.burn_in_fraction),
        SL_INT("shl.l0_target", shl.l0_target, int),
        SL_INT("shl.n_steps", shl.n_steps, int),
        SL_INT("shl.batch_size", shl.batch_size, int),
        Field{"shl.homeo_mode", [](const RunConfig& c) { return to_string(c.shl.homeo_mode); },
              [](RunConfig& c, const std::string& v) { c.shl.homeo_mode = parse_homeo_mode(trim(v)); }},
        SL_DOUBLE("shl.homeo_rate", shl.homeo_rate),
        SL_INT("shl.log_interval", shl.log_interval, int),
        SL_INT("shl.seed", shl.seed, std::uint64_t),
        SL_DOUBLE("cooc.eta", cooc.eta),
        SL_DOUBLE("cooc.neighborhood_radius", cooc.neighborhood_radius),
        SL_DOUBLE("cooc.epsilon_prob", cooc.epsilon_prob),
        SL_DOUBLE("whitening.f0_nyquist_fraction", whitening.f0_nyquist_fraction),
        SL_DOUBLE("whitening.steepness", whitening.steepness),
        SL_DOUBLE("synth.radius", synth.radius),
        SL_INT("synth.n_clutter", synth.n_clutter, int),
        SL_INT("synth.clutter_scale_min", synth.clutter_scale_min, int),
        SL_INT("synth.clutter_scale_max", synth.clutter_scale_max, int),
        SL_INT("synth.seed", synth.seed, std::uint64_t),
        SL_INT("synth.circle_scale", synth.circle_scale, int),
        SL_DOUBLE("synth.spacing", synth.spacing),
        SL_DOUBLE("synth.circle_amplitude", synth.circle_amplitude),
        SL_DOUBLE("synth.clutter_amplitude", synth.clutter_amplitude),
    };
    return f;
}

#undef SL_DOUBLE
#undef SL_INT

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    if (key.rfind("paths.", 0) == 0 && key.size() > 6) {
        config.paths[key.substr(6)] = trim(value);
        return;
    }
    for (const auto& f : fields())
        if (key == f.key) {
            f.set(config, value);
            return;
        }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
    if (key.rfind("paths.", 0) == 0) {
        auto it = config.paths.find(key.substr(6));
        if (it == config.paths.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
        return it->second;
    }
    for (const auto& f : fields())
        if (key == f.key) return f.get(config);
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
    for (const auto& [k, v] : config.paths) out += "paths." + k + " = " + v + "\n";
    return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::stringstream ss(text);
    std::string line;
    int number = 0;
    while (std::getline(ss, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(number) + " is not 'key = value'");
        set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << format_config(config);
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : format_config(config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sparselets
