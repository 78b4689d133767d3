#pragma once

#include <string>

#include "onode/model.hpp"
#include "onode/train.hpp"

namespace onode {

// ---------------------------------------------------------------------------
// RunConfig: the resolved, validated description of one command invocation.
//
// Resolution order (lowest to highest): task defaults, JSON config file,
// command-line flags.  Enumerations stay as strings here so the same struct
// can round-trip through JSON config files and checkpoints; model_config()
// and train_config() produce the typed views.

struct RunConfig {
    std::string task = "mnist-mzi";  // mnist-mzi | mnist-dpu | trajectory
    std::string mode = "onode";      // onode | resnet
    std::string backend = "mzi";     // mzi | dpu

    int ports = 72;
    int layers = 1;

    std::string solver = "rk4";  // euler | midpoint | rk4
    int steps = 4;
    std::string grad = "auto";  // auto | discretize | adjoint
    bool renormalize = false;
    double t0 = 0.0;
    double t1 = 1.0;
    std::string time_policy = "autonomous";  // autonomous | time-injected
    double omega0 = 1.0;

    int epochs = 30;
    double lr = 0.01;
    int batch = 100;
    std::uint64_t seed = 1;

    int crop = 6;
    std::string encoding = "complex";  // complex | magnitude
    bool train_activation = false;

    int metalines = 4;
    double wavelength = 1.55e-6;
    double n_eff = 2.85;
    double pitch = 0.5e-6;
    double layer_distance = 50e-6;

    int resnet_baseline = 2;  // hardware-report comparison depth

    std::string data_dir = "data/mnist";
    std::string out_dir = "out";
    std::string checkpoint_path;

    // Task-specific defaults (mnist-mzi | mnist-dpu | trajectory).
    static RunConfig defaults_for(const std::string& task);

    // Full validation; throws ConfigError before any compute.
    void validate() const;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    PreprocessConfig preprocess_config() const;
    ReadoutSpec readout() const;

    // Canonical JSON object (every field, 17-significant-digit floats).
    std::string to_json() const;

    // Overlays the fields present in a JSON object onto *this.  Unknown keys
    // and type mismatches raise ConfigError mentioning `source`.
    void overlay_json(const std::string& text, const std::string& source);
};

// Extracts "task"/"backend" hints from a JSON config text without applying it
// (used to pick the defaults before overlaying).  Returns `fallback` when the
// key is absent or the text is empty.
std::string peek_config_string(const std::string& text, const std::string& key,
                               const std::string& fallback);

// Reads a --config file (IoError when unreadable).
std::string read_config_text(const std::string& path);

// ---------------------------------------------------------------------------
// Commands.  Each validates the config, takes the output-directory lock,
// performs the work, and returns 0; errors propagate as exceptions which
// main() maps to exit codes via exit_code_for().

int cmd_train_mnist(const RunConfig& config);
int cmd_train_trajectory(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_hardware_report(const RunConfig& config);
int cmd_export(const RunConfig& config);

// Exit-code policy: 2 config/validation, 3 I/O or parse, 4 numeric failure.
int exit_code_for(const std::exception& error);

}  // namespace onode
