#include "pigp/pipeline.hpp"

#include "pigp/csv_io.hpp"
#include "pigp/errors.hpp"
#include "pigp/signal_metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>

namespace pigp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr Channel kResponseChannels[] = {Channel::displacement, Channel::velocity, Channel::acceleration};

const char* channel_units(Channel ch) {
    switch (ch) {
        case Channel::displacement: return "m";
        case Channel::velocity: return "m/s";
        case Channel::acceleration: return "m/s^2";
        case Channel::force: return "N";
    }
    return "";
}

std::string channel_name(Channel ch) { return std::string(to_string(ch)); }

std::uint64_t derive_seed(std::uint64_t base, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(base & 0xffffffffu), static_cast<std::uint32_t>(base >> 32), tag};
    std::mt19937_64 mix(seq);
    return mix();
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
    return s;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw IoError("malformed number list '" + s + "'");
        }
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- config parsing -------------------------------------------------------

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(section + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
            throw ConfigError("unknown configuration key '" + (section.empty() ? "" : section + ".") + it.key() + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    const std::string where = (section.empty() ? "" : section + ".") + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
    } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (!v.is_number_unsigned() && v.template get<std::int64_t>() < 0) throw ConfigError(where + ": expected a non-negative integer");
        }
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
    }
    out = v.get<T>();
}

void read_optional(const json& j, const char* key, std::optional<double>& out, const std::string& section) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    double v = 0.0;
    read(j, key, v, section);
    out = v;
}

ModeSpec mode_from_json(const json& j, std::size_t index) {
    const std::string section = "structure.modes[" + std::to_string(index) + "]";
    check_keys(j, section, {"name", "frequency_hz", "zeta", "mass", "direction", "half_waves"});
    ModeSpec m;
    m.name = "mode-" + std::to_string(index + 1);
    read(j, "name", m.name, section);
    read(j, "frequency_hz", m.frequency_hz, section);
    read(j, "zeta", m.zeta, section);
    read(j, "mass", m.mass, section);
    read(j, "half_waves", m.half_waves, section);
    if (j.contains("direction")) {
        std::string d;
        read(j, "direction", d, section);
        try {
            m.direction = direction_from_string(d);
        } catch (const std::exception& e) {
            throw ConfigError(section + ".direction: " + e.what());
        }
    }
    return m;
}

}  // namespace

// --- RunConfig ----------------------------------------------------------------

ModalModel RunConfig::modal_model() const {
    auto model = synthetic_modal_model(structure.span, structure.nodes, structure.modes);
    return model;
}

WindConfig RunConfig::wind_config() const {
    WindConfig w = wind;
    w.nodes = modal_model().node_coords;
    return w;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    try {
        if (structure.nodes < 2) fail("structure.nodes must be at least 2");
        if (structure.modes.empty()) fail("structure.modes must not be empty");
        std::set<std::string> names;
        for (const auto& m : structure.modes) {
            if (!names.insert(m.name).second) fail("duplicate mode name '" + m.name + "'");
            if (!(m.frequency_hz > 0.0)) fail("mode '" + m.name + "': frequency_hz must be positive");
            if (m.mass != 1.0) fail("mode '" + m.name + "': synthetic shapes are mass-normalized, mass must be 1");
        }
        const auto model = modal_model();
        model.validate();
        if (static_cast<Eigen::Index>(structure.modes.size()) > model.dof_count()) fail("more modes than degrees of freedom");
        wind_config().validate();
        aero.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(measurement.snr > 0.0) && measurement.snr_unit == SnrUnit::linear) fail("measurement.snr must be positive");
    if (!(measurement.dt_train >= wind.dt * (1.0 - 1e-12))) fail("measurement.dt_train must be at least wind.dt");
    if (measurement.channels.empty()) fail("measurement.channels must not be empty");
    if (measurement.channels.count(Channel::force)) fail("measurement.channels cannot contain force");
    for (int n : measurement.output_nodes)
        if (n < 0 || n >= structure.nodes) fail("measurement.output_nodes: index " + std::to_string(n) + " out of range");
    if (optimizer.restarts < 1) fail("optimizer.restarts must be at least 1");
    if (!(optimizer.gradient_tolerance > 0.0)) fail("optimizer.gradient_tolerance must be positive");
    if (optimizer.max_iterations < 1) fail("optimizer.max_iterations must be at least 1");
    if (!(prediction.dt >= 0.0)) fail("prediction.dt must be non-negative");
    if (prediction.t_begin && prediction.t_end && !(*prediction.t_end > *prediction.t_begin))
        fail("prediction.t_end must exceed prediction.t_begin");
    if (metrics.psd_segment < 8) fail("metrics.psd_segment must be at least 8");
    if (!(metrics.phase_band_lo > 0.0 && metrics.phase_band_hi > metrics.phase_band_lo))
        fail("metrics phase band must satisfy 0 < lo < hi");
    if (!(metrics.edge_fraction >= 0.0 && metrics.edge_fraction < 0.5)) fail("metrics.edge_fraction must lie in [0, 0.5)");
}

RunConfig config_from_json(const json& j) {
    check_keys(j, "", {"seed", "wind", "structure", "aero", "measurement", "optimizer", "prediction", "metrics", "output"});
    RunConfig c;
    read(j, "seed", c.seed, "");
    read(j, "output", c.output, "");
    if (j.contains("wind")) {
        const json& w = j.at("wind");
        check_keys(w, "wind", {"U", "I_u", "I_w", "L_u", "L_w", "dt", "duration", "coherence_decay"});
        read(w, "U", c.wind.U, "wind");
        read(w, "I_u", c.wind.I_u, "wind");
        read(w, "I_w", c.wind.I_w, "wind");
        read(w, "L_u", c.wind.L_u, "wind");
        read(w, "L_w", c.wind.L_w, "wind");
        read(w, "dt", c.wind.dt, "wind");
        read(w, "duration", c.wind.duration, "wind");
        read(w, "coherence_decay", c.wind.coherence_decay, "wind");
    }
    if (j.contains("structure")) {
        const json& s = j.at("structure");
        check_keys(s, "structure", {"span", "nodes", "modes"});
        read(s, "span", c.structure.span, "structure");
        read(s, "nodes", c.structure.nodes, "structure");
        if (s.contains("modes")) {
            if (!s.at("modes").is_array()) throw ConfigError("structure.modes: expected an array");
            c.structure.modes.clear();
            for (std::size_t i = 0; i < s.at("modes").size(); ++i) c.structure.modes.push_back(mode_from_json(s.at("modes")[i], i));
        }
    }
    if (j.contains("aero")) {
        const json& a = j.at("aero");
        check_keys(a, "aero", {"rho", "B", "H", "C_D", "C_L", "C_M", "dC_L", "dC_M", "admittance"});
        read(a, "rho", c.aero.rho, "aero");
        read(a, "B", c.aero.B, "aero");
        read(a, "H", c.aero.H, "aero");
        read(a, "C_D", c.aero.C_D, "aero");
        read(a, "C_L", c.aero.C_L, "aero");
        read(a, "C_M", c.aero.C_M, "aero");
        read(a, "dC_L", c.aero.dC_L, "aero");
        read(a, "dC_M", c.aero.dC_M, "aero");
        read(a, "admittance", c.aero.admittance_on, "aero");
    }
    if (j.contains("measurement")) {
        const json& m = j.at("measurement");
        check_keys(m, "measurement", {"snr", "snr_unit", "dt_train", "channels", "output_nodes"});
        read(m, "snr", c.measurement.snr, "measurement");
        read(m, "dt_train", c.measurement.dt_train, "measurement");
        if (m.contains("snr_unit")) {
            std::string u;
            read(m, "snr_unit", u, "measurement");
            if (u == "linear")
                c.measurement.snr_unit = SnrUnit::linear;
            else if (u == "dB" || u == "db" || u == "decibel")
                c.measurement.snr_unit = SnrUnit::decibel;
            else
                throw ConfigError("measurement.snr_unit must be 'linear' or 'dB'");
        }
        if (m.contains("channels")) {
            if (!m.at("channels").is_array()) throw ConfigError("measurement.channels: expected an array");
            c.measurement.channels.clear();
            for (const auto& item : m.at("channels")) {
                if (!item.is_string()) throw ConfigError("measurement.channels: expected channel names");
                try {
                    c.measurement.channels.insert(channel_from_string(item.get<std::string>()));
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("measurement.channels: ") + e.what());
                }
            }
        }
        if (m.contains("output_nodes")) {
            if (!m.at("output_nodes").is_array()) throw ConfigError("measurement.output_nodes: expected an array");
            c.measurement.output_nodes.clear();
            for (const auto& item : m.at("output_nodes")) {
                if (!item.is_number_integer()) throw ConfigError("measurement.output_nodes: expected integers");
                c.measurement.output_nodes.push_back(item.get<int>());
            }
        }
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        check_keys(o, "optimizer", {"enabled", "restarts", "gradient_tolerance", "max_iterations"});
        read(o, "enabled", c.optimizer.enabled, "optimizer");
        read(o, "restarts", c.optimizer.restarts, "optimizer");
        read(o, "gradient_tolerance", c.optimizer.gradient_tolerance, "optimizer");
        read(o, "max_iterations", c.optimizer.max_iterations, "optimizer");
    }
    if (j.contains("prediction")) {
        const json& p = j.at("prediction");
        check_keys(p, "prediction", {"dt", "t_begin", "t_end"});
        read(p, "dt", c.prediction.dt, "prediction");
        read_optional(p, "t_begin", c.prediction.t_begin, "prediction");
        read_optional(p, "t_end", c.prediction.t_end, "prediction");
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        check_keys(m, "metrics", {"psd_segment", "phase_band", "edge_fraction"});
        read(m, "psd_segment", c.metrics.psd_segment, "metrics");
        read(m, "edge_fraction", c.metrics.edge_fraction, "metrics");
        if (m.contains("phase_band")) {
            const json& b = m.at("phase_band");
            if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
                throw ConfigError("metrics.phase_band: expected [lo, hi] multiples of the natural frequency");
            c.metrics.phase_band_lo = b[0].get<double>();
            c.metrics.phase_band_hi = b[1].get<double>();
        }
    }
    c.validate();
    return c;
}

json config_to_json(const RunConfig& c) {
    json modes = json::array();
    for (const auto& m : c.structure.modes)
        modes.push_back({{"name", m.name},
                         {"frequency_hz", m.frequency_hz},
                         {"zeta", m.zeta},
                         {"mass", m.mass},
                         {"direction", to_string(m.direction)},
                         {"half_waves", m.half_waves}});
    json channels = json::array();
    for (Channel ch : c.measurement.channels) channels.push_back(channel_name(ch));
    return {
        {"seed", c.seed},
        {"output", c.output},
        {"wind",
         {{"U", c.wind.U},
          {"I_u", c.wind.I_u},
          {"I_w", c.wind.I_w},
          {"L_u", c.wind.L_u},
          {"L_w", c.wind.L_w},
          {"dt", c.wind.dt},
          {"duration", c.wind.duration},
          {"coherence_decay", c.wind.coherence_decay}}},
        {"structure", {{"span", c.structure.span}, {"nodes", c.structure.nodes}, {"modes", modes}}},
        {"aero",
         {{"rho", c.aero.rho},
          {"B", c.aero.B},
          {"H", c.aero.H},
          {"C_D", c.aero.C_D},
          {"C_L", c.aero.C_L},
          {"C_M", c.aero.C_M},
          {"dC_L", c.aero.dC_L},
          {"dC_M", c.aero.dC_M},
          {"admittance", c.aero.admittance_on}}},
        {"measurement",
         {{"snr", c.measurement.snr},
          {"snr_unit", c.measurement.snr_unit == SnrUnit::linear ? "linear" : "dB"},
          {"dt_train", c.measurement.dt_train},
          {"channels", channels},
          {"output_nodes", c.measurement.output_nodes}}},
        {"optimizer",
         {{"enabled", c.optimizer.enabled},
          {"restarts", c.optimizer.restarts},
          {"gradient_tolerance", c.optimizer.gradient_tolerance},
          {"max_iterations", c.optimizer.max_iterations}}},
        {"prediction",
         {{"dt", c.prediction.dt},
          {"t_begin", c.prediction.t_begin ? json(*c.prediction.t_begin) : json(nullptr)},
          {"t_end", c.prediction.t_end ? json(*c.prediction.t_end) : json(nullptr)}}},
        {"metrics",
         {{"psd_segment", c.metrics.psd_segment},
          {"phase_band", {c.metrics.phase_band_lo, c.metrics.phase_band_hi}},
          {"edge_fraction", c.metrics.edge_fraction}}},
    };
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::vector<std::size_t> select_modes(const RunConfig& cfg, const std::string& list) {
    std::vector<std::size_t> out;
    const auto& modes = cfg.structure.modes;
    if (list.empty()) {
        for (std::size_t i = 0; i < modes.size(); ++i) out.push_back(i);
        return out;
    }
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item.empty()) continue;
        std::size_t index = modes.size();
        for (std::size_t i = 0; i < modes.size(); ++i)
            if (modes[i].name == item) index = i;
        if (index == modes.size() && std::all_of(item.begin(), item.end(), ::isdigit)) {
            const auto n = std::stoul(item);
            if (n >= 1 && n <= modes.size()) index = n - 1;
        }
        if (index == modes.size()) throw ConfigError("--modes: unknown mode '" + item + "'");
        if (std::find(out.begin(), out.end(), index) == out.end()) out.push_back(index);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string mode_key(std::size_t index) { return "mode_" + std::to_string(index + 1); }

void run_stage(const std::string& stage, const std::function<void()>& body) {
    const std::string tag = "[" + stage + "] ";
    auto tagged = [&](const std::exception& e) {
        const std::string what = e.what();
        return what.rfind("[", 0) == 0 ? what : tag + what;
    };
    try {
        body();
    } catch (const ConfigError& e) {
        throw ConfigError(tagged(e));
    } catch (const IoError& e) {
        throw IoError(tagged(e));
    } catch (const NumericalError& e) {
        throw NumericalError(tagged(e));
    } catch (const std::domain_error& e) {
        throw std::domain_error(tagged(e));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(tagged(e));
    } catch (const fs::filesystem_error& e) {
        throw IoError(tag + e.what());
    } catch (const json::exception& e) {
        throw IoError(tag + e.what());
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::domain_error*>(&e) ||
        dynamic_cast<const std::invalid_argument*>(&e))
        return 2;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return 4;
    return 3;
}

// --- manifest -------------------------------------------------------------------

json load_manifest(const fs::path& dir) {
    const fs::path p = dir / kManifest;
    if (!fs::exists(p)) return json::object();
    std::ifstream in(p);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("'" + p.string() + "' is not valid JSON: " + e.what());
    }
}

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void save_manifest(const fs::path& dir, json m, const RunConfig& cfg) {
    m["software"] = {{"name", "pigp"}, {"version", kSoftwareVersion}};
    m["config"] = config_to_json(cfg);
    m["seeds"] = {{"master", cfg.seed},
                  {"wind", cfg.wind_seed()},
                  {"noise", cfg.noise_seed()},
                  {"optimizer", cfg.optimizer_seed()}};
    const fs::path p = dir / kManifest;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << m.dump(2) << '\n';
}

void stamp(CsvTable& t, const std::string& quantity, const std::string& units, std::uint64_t seed) {
    t.set_meta("quantity", quantity);
    t.set_meta("units", units);
    t.set_meta("seed", std::to_string(seed));
}

std::string response_units() {
    std::string u = "s";
    for (Channel ch : kResponseChannels) u += std::string(",") + channel_units(ch);
    return u;
}

TurbulenceField read_field(const RunConfig& cfg, const fs::path& in) {
    const auto model = cfg.modal_model();
    TurbulenceField field;
    Eigen::MatrixXd* targets[] = {&field.u, &field.w};
    const char* files[] = {"wind_u.csv", "wind_w.csv"};
    for (int c = 0; c < 2; ++c) {
        const auto table = read_csv(in / files[c]);
        const auto nodes = split_doubles(table.meta_value("nodes"));
        if (nodes.size() != model.node_coords.size())
            throw ConfigError(std::string(files[c]) + ": turbulence node grid does not match the structure");
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (std::abs(nodes[i] - model.node_coords[i]) > 1e-9 * (1.0 + std::abs(nodes[i])))
                throw ConfigError(std::string(files[c]) + ": turbulence node positions do not match the structure");
        const double U = table.meta_double("U");
        if (U != cfg.wind.U) throw ConfigError(std::string(files[c]) + ": mean wind speed differs from the configuration");
        Eigen::MatrixXd m(table.data.rows(), static_cast<Eigen::Index>(nodes.size()));
        TimeSeries first;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto s = read_series(table, "node_" + std::to_string(i));
            if (i == 0) first = s;
            m.col(static_cast<Eigen::Index>(i)) = s.values;
        }
        if (std::abs(first.dt - cfg.wind.dt) > 1e-12 * cfg.wind.dt)
            throw ConfigError(std::string(files[c]) + ": sampling interval differs from the configuration");
        *targets[c] = std::move(m);
        field.dt = first.dt;
        field.U = U;
        field.nodes = nodes;
    }
    if (field.u.rows() != field.w.rows()) throw IoError("wind_u.csv and wind_w.csv have different lengths");
    return field;
}

}  // namespace

// --- stages -----------------------------------------------------------------------

void cmd_windgen(const RunConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ensure_dir(out);
    const auto wc = cfg.wind_config();
    const auto field = synthesize_turbulence(wc, cfg.wind_seed());

    std::vector<std::string> names;
    for (std::size_t i = 0; i < wc.nodes.size(); ++i) names.push_back("node_" + std::to_string(i));
    for (auto comp : {WindComponent::u, WindComponent::w}) {
        const Eigen::MatrixXd& m = comp == WindComponent::u ? field.u : field.w;
        std::vector<Eigen::VectorXd> cols;
        for (Eigen::Index j = 0; j < m.cols(); ++j) cols.emplace_back(m.col(j));
        auto table = series_table(0.0, field.dt, names, cols);
        std::string units = "s";
        for (std::size_t i = 0; i < names.size(); ++i) units += ",m/s";
        stamp(table, "turbulence " + to_string(comp), units, cfg.wind_seed());
        table.set_meta("U", format_double(wc.U));
        table.set_meta("nodes", join_doubles(wc.nodes));
        write_csv(out / ("wind_" + to_string(comp) + ".csv"), table);
    }

    auto m = load_manifest(out);
    m["windgen"] = {{"samples", field.samples()},
                    {"nodes", wc.nodes.size()},
                    {"clipped_frequencies", field.clipped_frequencies}};
    m["timing"]["windgen_s"] = seconds_since(t0);
    save_manifest(out, m, cfg);
}

void cmd_simulate(const RunConfig& cfg, const fs::path& in, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ensure_dir(out);
    const auto model = cfg.modal_model();
    const auto field = read_field(cfg, in);
    const auto forces = buffeting_modal_forces(field, model, cfg.aero);

    std::vector<ModalResponse> clean;
    for (std::size_t k = 0; k < model.modes.size(); ++k) clean.push_back(newmark_response(model.modes[k].osc, forces[k]));

    std::vector<int> out_nodes = cfg.measurement.output_nodes;
    if (out_nodes.empty()) out_nodes.push_back(cfg.structure.nodes / 2);

    // Noise is added to the global field, as a sensor network would see it, and
    // the modal channels are recovered by least-squares decomposition.
    std::vector<std::vector<TimeSeries>> noisy_modal(3);
    json noise_seeds = json::object();
    for (int c = 0; c < 3; ++c) {
        const Channel ch = kResponseChannels[c];
        std::vector<TimeSeries> modal;
        for (const auto& r : clean) modal.push_back(r.channel(ch));
        const NodalField nodal = modal_superpose(modal, model);
        const std::uint64_t seed = derive_seed(cfg.noise_seed(), static_cast<std::uint32_t>(c));
        noise_seeds[channel_name(ch)] = seed;
        const NodalField noisy = add_noise_snr(nodal, cfg.measurement.snr, seed, cfg.measurement.snr_unit);
        noisy_modal[static_cast<std::size_t>(c)] = modal_decompose(noisy, model);

        std::vector<std::string> names;
        std::vector<Eigen::VectorXd> clean_cols, noisy_cols;
        for (int node : out_nodes)
            for (int d = 0; d < kDofsPerNode; ++d) {
                names.push_back("node" + std::to_string(node) + "_" + to_string(static_cast<Direction>(d)));
                clean_cols.emplace_back(nodal.values.col(node * kDofsPerNode + d));
                noisy_cols.emplace_back(noisy.values.col(node * kDofsPerNode + d));
            }
        std::string units = "s";
        for (std::size_t i = 0; i < names.size(); ++i) units += std::string(",") + channel_units(ch);
        auto ct = series_table(nodal.t0, nodal.dt, names, clean_cols);
        stamp(ct, "global " + channel_name(ch), units, cfg.wind_seed());
        write_csv(out / ("global_" + channel_name(ch) + ".csv"), ct);
        auto nt = series_table(noisy.t0, noisy.dt, names, noisy_cols);
        stamp(nt, "global " + channel_name(ch) + " with measurement noise", units, seed);
        write_csv(out / ("global_" + channel_name(ch) + "_noisy.csv"), nt);
    }

    for (std::size_t k = 0; k < model.modes.size(); ++k) {
        const std::string key = mode_key(k);
        const auto& r = clean[k];
        auto ft = series_table(forces[k].t0, forces[k].dt, {"force"}, {forces[k].values});
        stamp(ft, "modal buffeting force, " + model.modes[k].name, "s,N", cfg.wind_seed());
        write_csv(out / (key + "_force.csv"), ft);
        auto rt = series_table(r.z.t0, r.z.dt, {"displacement", "velocity", "acceleration"},
                               {r.z.values, r.zdot.values, r.zddot.values});
        stamp(rt, "modal response, " + model.modes[k].name, response_units(), cfg.wind_seed());
        write_csv(out / (key + "_response.csv"), rt);
        for (int c = 0; c < 3; ++c) {
            const Channel ch = kResponseChannels[c];
            const TimeSeries& s = noisy_modal[static_cast<std::size_t>(c)][k];
            auto nt = series_table(s.t0, s.dt, {channel_name(ch)}, {s.values});
            stamp(nt, "measured modal " + channel_name(ch) + ", " + model.modes[k].name,
                  std::string("s,") + channel_units(ch), noise_seeds[channel_name(ch)].get<std::uint64_t>());
            write_csv(out / (key + "_" + channel_name(ch) + ".csv"), nt);
        }
    }

    auto m = load_manifest(out);
    json modes = json::array();
    for (const auto& mode : model.modes) modes.push_back(mode.name);
    m["simulate"] = {{"modes", modes}, {"noise_seeds", noise_seeds}, {"global_output_nodes", out_nodes}};
    m["timing"]["simulate_s"] = seconds_since(t0);
    save_manifest(out, m, cfg);
}

namespace {

json hyperparams_json(const Hyperparams& hp) {
    return {{"sigma_s", hp.sigma_s},
            {"ell", hp.ell},
            {"sigma_z", hp.sigma_z},
            {"sigma_zdot", hp.sigma_zdot},
            {"sigma_zddot", hp.sigma_zddot}};
}

Hyperparams hyperparams_from_manifest(const json& manifest, const std::string& key) {
    if (!manifest.contains("modes") || !manifest["modes"].contains(key) || !manifest["modes"][key].contains("hyperparams"))
        throw ConfigError("hyperparameter manifest has no entry for " + key);
    const json& h = manifest["modes"][key]["hyperparams"];
    try {
        Hyperparams hp{h.at("sigma_s").get<double>(), h.at("ell").get<double>(), h.at("sigma_z").get<double>(),
                       h.at("sigma_zdot").get<double>(), h.at("sigma_zddot").get<double>()};
        hp.validate();
        return hp;
    } catch (const json::exception& e) {
        throw ConfigError("hyperparameter manifest entry " + key + " is malformed: " + e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError("hyperparameter manifest entry " + key + ": " + e.what());
    }
}

}  // namespace

ReconstructOutcome cmd_reconstruct(const RunConfig& cfg, const fs::path& in, const fs::path& out,
                                   const std::vector<std::size_t>& modes,
                                   const std::optional<fs::path>& hyperparams_manifest) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ensure_dir(out);
    const auto model = cfg.modal_model();
    std::optional<json> source;
    if (hyperparams_manifest) {
        std::ifstream hin(*hyperparams_manifest);
        if (!hin) throw ConfigError("cannot open hyperparameter manifest '" + hyperparams_manifest->string() + "'");
        try {
            source = json::parse(hin);
        } catch (const json::exception& e) {
            throw ConfigError("hyperparameter manifest is not valid JSON: " + std::string(e.what()));
        }
    } else if (!cfg.optimizer.enabled) {
        throw ConfigError("optimizer disabled but no hyperparameter manifest given");
    }

    // Inputs are checked for every mode before any training starts.
    std::vector<ModalResponse> measured(modes.size());
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::size_t k = modes[i];
        if (k >= model.modes.size()) throw ConfigError("mode index out of range");
        for (Channel ch : cfg.measurement.channels) {
            const fs::path p = in / (mode_key(k) + "_" + channel_name(ch) + ".csv");
            if (!fs::exists(p))
                throw ConfigError("channel '" + channel_name(ch) + "' requested for " + mode_key(k) + " but '" +
                                  p.string() + "' is missing");
            measured[i].channel(ch) = read_series(read_csv(p), channel_name(ch));
        }
    }

    ReconstructOutcome outcome;
    auto manifest = load_manifest(out);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::size_t k = modes[i];
        const std::string key = mode_key(k);
        const auto& osc = model.modes[k].osc;
        const fs::path posterior_path = out / (key + "_posterior.csv");
        json rec = {{"name", model.modes[k].name}, {"frequency_hz", cfg.structure.modes[k].frequency_hz}};
        const auto tm = std::chrono::steady_clock::now();
        try {
            const auto train = subsample_training(measured[i], cfg.measurement.dt_train, cfg.measurement.channels);
            rec["training_points"] = train.size();
            Hyperparams hp;
            if (source) {
                hp = hyperparams_from_manifest(*source, key);
                rec["hyperparams_source"] = "manifest";
            } else {
                OptimizerOptions opts;
                opts.restarts = cfg.optimizer.restarts;
                opts.seed = derive_seed(cfg.optimizer_seed(), static_cast<std::uint32_t>(k));
                opts.gradient_tolerance = cfg.optimizer.gradient_tolerance;
                opts.max_iterations = cfg.optimizer.max_iterations;
                const auto res = optimize_hyperparams(train, osc, opts);
                hp = res.hp;
                rec["hyperparams_source"] = "optimizer";
                rec["optimizer_seed"] = opts.seed;
                rec["lml"] = res.lml;
                json restarts = json::array();
                for (const auto& r : res.restarts)
                    restarts.push_back({{"lml", r.failed ? json(nullptr) : json(r.lml)},
                                        {"iterations", r.iterations},
                                        {"gradient_inf_norm", r.gradient_inf_norm},
                                        {"converged", r.converged},
                                        {"failed", r.failed}});
                rec["restarts"] = restarts;
            }
            rec["hyperparams"] = hyperparams_json(hp);

            const TimeSeries& ref = measured[i].channel(*cfg.measurement.channels.begin());
            const double tb = cfg.prediction.t_begin.value_or(ref.t0);
            const double te = cfg.prediction.t_end.value_or(ref.t_end());
            const double dt = cfg.prediction.dt > 0.0 ? cfg.prediction.dt : ref.dt;
            if (!(te > tb)) throw std::domain_error("empty prediction window");
            const auto count = static_cast<std::size_t>(std::floor((te - tb) / dt + 1e-9)) + 1;
            std::vector<double> grid(count);
            for (std::size_t g = 0; g < count; ++g) grid[g] = tb + static_cast<double>(g) * dt;
            const auto post = predict_force(train, hp, osc, grid, CovarianceMode::marginal);
            rec["jitter"] = post.jitter;

            auto table = series_table(tb, dt, {"mean", "std", "lo95", "hi95"},
                                      {post.mean, post.stddev(), post.lower95(), post.upper95()});
            stamp(table, "posterior modal force, " + model.modes[k].name, "s,N,N,N,N", cfg.seed);
            write_csv(posterior_path, table);
            rec["status"] = "ok";
            outcome.reconstructed.push_back(k);
        } catch (const NumericalError& e) {
            rec["status"] = "failed";
            rec["error"] = e.what();
        } catch (const std::domain_error& e) {
            rec["status"] = "failed";
            rec["error"] = e.what();
        }
        if (rec["status"] == "failed") {
            std::error_code ec;
            fs::remove(posterior_path, ec);
            outcome.failed.push_back(k);
        }
        manifest["timing"][key + "_reconstruct_s"] = seconds_since(tm);
        manifest["modes"][key] = rec;
    }
    manifest["timing"]["reconstruct_s"] = seconds_since(t0);
    save_manifest(out, manifest, cfg);
    return outcome;
}

void cmd_metrics(const RunConfig& cfg, const fs::path& truth_dir, const fs::path& pred_dir, const fs::path& out,
                 const std::vector<std::size_t>& modes) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ensure_dir(out);
    auto manifest = load_manifest(out);

    CsvTable table;
    table.columns = {"mode", "f_n", "m_rms", "m_mag", "m_phase", "m_peak"};
    table.data.resize(static_cast<Eigen::Index>(modes.size()), 6);
    std::string names;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::size_t k = modes[i];
        if (k >= cfg.structure.modes.size()) throw ConfigError("mode index out of range");
        const std::string key = mode_key(k);
        const auto& spec = cfg.structure.modes[k];
        const TimeSeries truth_full = read_series(read_csv(truth_dir / (key + "_force.csv")), "force");
        const auto pred_table = read_csv(pred_dir / (key + "_posterior.csv"));
        const TimeSeries pred = read_series(pred_table, pred_table.has_column("mean") ? "mean" : "force");

        // Score on the part of the truth record covered by the prediction.
        const double tol = 1e-9 * truth_full.dt;
        if (pred.t0 < truth_full.t0 - tol || pred.t_end() > truth_full.t_end() + tol)
            throw IoError(key + ": prediction extends outside the true force record (length mismatch)");
        const auto i0 = static_cast<Eigen::Index>(std::ceil((pred.t0 - truth_full.t0) / truth_full.dt - 1e-9));
        const auto i1 = static_cast<Eigen::Index>(std::floor((pred.t_end() - truth_full.t0) / truth_full.dt + 1e-9));
        if (i1 - i0 + 1 < 8) throw IoError(key + ": overlap of truth and prediction is too short");
        const TimeSeries truth{truth_full.time(i0), truth_full.dt, truth_full.values.segment(i0, i1 - i0 + 1)};

        CompareOptions opts;
        opts.phase_band = std::make_pair(cfg.metrics.phase_band_lo * spec.frequency_hz,
                                         cfg.metrics.phase_band_hi * spec.frequency_hz);
        opts.edge_fraction = cfg.metrics.edge_fraction;
        const auto report = compare_signals(truth, pred, opts);
        table.data.row(static_cast<Eigen::Index>(i)) << static_cast<double>(k + 1), spec.frequency_hz, report.m_rms,
            report.m_mag, report.m_phase, report.m_peak;
        names += (i ? "; " : "") + std::to_string(k + 1) + "=" + spec.name;

        const TimeSeries pred_on = truth.same_grid(pred) ? pred : resample_linear(pred, truth);
        const Eigen::Index seg = std::min<Eigen::Index>(cfg.metrics.psd_segment, truth.size());
        const auto pt = welch_psd(truth, seg), pp = welch_psd(pred_on, seg);
        CsvTable psd;
        psd.columns = {"freq", "truth", "pred"};
        psd.data.resize(pt.freqs.size(), 3);
        psd.data << pt.freqs, pt.psd, pp.psd;
        psd.set_meta("quantity", "Welch PSD of true and posterior-mean modal force, " + spec.name);
        psd.set_meta("units", "Hz,N^2/Hz,N^2/Hz");
        psd.set_meta("t0", format_double(truth.t0));
        psd.set_meta("dt", format_double(truth.dt));
        psd.set_meta("df", format_double(pt.df()));
        psd.set_meta("segment", std::to_string(seg));
        psd.set_meta("seed", std::to_string(cfg.seed));
        write_csv(out / ("psd_" + key + ".csv"), psd);

        manifest["modes"][key]["metrics"] = {{"m_rms", report.m_rms},
                                             {"m_mag", report.m_mag},
                                             {"m_phase", report.m_phase},
                                             {"m_peak", report.m_peak}};
    }
    table.set_meta("quantity", "force reconstruction metrics");
    table.set_meta("units", "-,Hz,-,-,-,-");
    table.set_meta("modes", names);
    table.set_meta("seed", std::to_string(cfg.seed));
    write_csv(out / "metrics.csv", table);

    manifest["timing"]["metrics_s"] = seconds_since(t0);
    save_manifest(out, manifest, cfg);
}

int cmd_pipeline(const RunConfig& cfg, const fs::path& out, const std::vector<std::size_t>& modes) {
    cfg.validate();
    ensure_dir(out);
    std::error_code ec;
    fs::remove(out / kManifest, ec);  // a pipeline run owns its manifest
    ReconstructOutcome r;
    run_stage("windgen", [&] { cmd_windgen(cfg, out); });
    run_stage("simulate", [&] { cmd_simulate(cfg, out, out); });
    run_stage("reconstruct", [&] { r = cmd_reconstruct(cfg, out, out, modes); });
    run_stage("metrics", [&] { cmd_metrics(cfg, out, out, out, r.reconstructed); });
    return r.failed.empty() ? 0 : 3;
}

}  // namespace pigp
