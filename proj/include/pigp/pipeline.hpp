#pragma once

#include "pigp/gp_engine.hpp"
#include "pigp/oscillator_sim.hpp"
#include "pigp/wind_field.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pigp {

inline constexpr const char* kSoftwareVersion = "0.1.0";

struct StructureConfig {
    double span = 1624.0;  ///< m
    /// 20 m spacing. Coarser grids treat each node as an independent strip and
    /// overstate the modal force above about 0.3 Hz.
    int nodes = 81;
    std::vector<ModeSpec> modes = default_bridge_modes();
};

struct MeasurementConfig {
    double snr = 20.0;
    SnrUnit snr_unit = SnrUnit::linear;
    double dt_train = 1.25;
    std::set<Channel> channels{Channel::displacement, Channel::velocity, Channel::acceleration};
    /// Node indices whose global responses are written; empty means mid-span.
    std::vector<int> output_nodes;
};

struct OptimizerConfig {
    /// When false, hyperparameters must come from a previous run manifest.
    bool enabled = true;
    int restarts = 3;
    double gradient_tolerance = 1e-6;
    int max_iterations = 500;
};

struct PredictionConfig {
    double dt = 0.0;  ///< 0 uses the response sampling interval
    std::optional<double> t_begin;
    std::optional<double> t_end;
};

struct MetricsConfig {
    int psd_segment = 1024;  ///< Welch segment length, samples
    /// Phase band as multiples of the mode's natural frequency.
    double phase_band_lo = 0.25;
    double phase_band_hi = 4.0;
    double edge_fraction = 0.1;
};

struct RunConfig {
    std::uint64_t seed = 1;
    WindConfig wind;  ///< `nodes` is ignored; the structure grid is used
    StructureConfig structure;
    AeroSection aero{.admittance_on = true};
    MeasurementConfig measurement;
    OptimizerConfig optimizer;
    PredictionConfig prediction;
    MetricsConfig metrics;
    std::string output = "out";

    [[nodiscard]] ModalModel modal_model() const;
    /// Wind parameters on the structure's node grid.
    [[nodiscard]] WindConfig wind_config() const;
    [[nodiscard]] std::uint64_t wind_seed() const { return seed; }
    [[nodiscard]] std::uint64_t noise_seed() const { return seed + 1; }
    [[nodiscard]] std::uint64_t optimizer_seed() const { return seed + 2; }
    /// Throws ConfigError.
    void validate() const;
};

/// Unknown keys and ill-typed values raise ConfigError; absent keys keep defaults.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

/// Zero-based mode indices from a comma list of 1-based indices or mode names;
/// an empty list selects every mode.
std::vector<std::size_t> select_modes(const RunConfig& cfg, const std::string& list);

/// File stem of mode `index` (zero-based), e.g. "mode_1".
std::string mode_key(std::size_t index);

/// Re-throws ConfigError / IoError / NumericalError / domain errors raised by
/// `body` with "[stage] " prepended, keeping the exception type.
void run_stage(const std::string& stage, const std::function<void()>& body);

/// 0 ok, 2 configuration, 3 numerical, 4 I/O.
int exit_code_for(const std::exception& e);

nlohmann::json load_manifest(const std::filesystem::path& dir);

// Stages. Each writes into `out` and merges its record into out/manifest.json.

void cmd_windgen(const RunConfig& cfg, const std::filesystem::path& out);

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& in, const std::filesystem::path& out);

struct ReconstructOutcome {
    std::vector<std::size_t> reconstructed;
    std::vector<std::size_t> failed;
};

/// Per-mode training and prediction. Numerical failures are recorded per mode
/// and do not stop the other modes. `hyperparams_manifest` replaces training
/// with the hyperparameters stored in an earlier manifest.
ReconstructOutcome cmd_reconstruct(const RunConfig& cfg, const std::filesystem::path& in,
                                   const std::filesystem::path& out, const std::vector<std::size_t>& modes,
                                   const std::optional<std::filesystem::path>& hyperparams_manifest = std::nullopt);

void cmd_metrics(const RunConfig& cfg, const std::filesystem::path& truth_dir, const std::filesystem::path& pred_dir,
                 const std::filesystem::path& out, const std::vector<std::size_t>& modes);

/// All stages in sequence; returns 0 when every selected mode was reconstructed, 3 otherwise.
int cmd_pipeline(const RunConfig& cfg, const std::filesystem::path& out, const std::vector<std::size_t>& modes);

}  // namespace pigp
