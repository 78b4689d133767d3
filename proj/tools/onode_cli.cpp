// onode: train and inspect optical neural ODE models.
//
// Subcommands: train-mnist, train-trajectory, eval, hardware-report, export.
// Config precedence: task defaults < JSON config file (--config) < flags.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "onode/cli.hpp"
#include "onode/errors.hpp"
#include "onode/train.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::string data_dir;
    std::string backend;
    std::string mode;
    std::string solver;
    std::string grad;
    std::string encoding;
    std::string time_policy;
    std::string checkpoint;
    std::uint64_t seed = 0;
    int ports = 0;
    int layers = 0;
    int steps = 0;
    int epochs = 0;
    int batch = 0;
    int crop = 0;
    int metalines = 0;
    int resnet_baseline = 0;
    double lr = 0.0;
    double t0 = 0.0;
    double t1 = 0.0;
    double omega0 = 0.0;
    double wavelength = 0.0;
    double n_eff = 0.0;
    double pitch = 0.0;
    double layer_distance = 0.0;
    bool renormalize = false;
    bool train_activation = false;
};

void add_shared_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file overlaying the task defaults");
    cmd->add_option("--seed", f.seed, "RNG seed (default: 1)");
    cmd->add_option("--out", f.out, "output directory (default: out)");
    cmd->add_option("--data-dir", f.data_dir, "MNIST IDX directory (default: data/mnist)");
    cmd->add_option("--backend", f.backend,
                    "weight backend (default: mzi; the mnist-dpu task uses dpu)")
        ->check(CLI::IsMember({"mzi", "dpu"}));
    cmd->add_option("--mode", f.mode, "model mode (default: onode)")
        ->check(CLI::IsMember({"onode", "resnet"}));
    cmd->add_option("--layers", f.layers,
                    "hidden layers / residual blocks (default: 1; trajectory: 2)");
    cmd->add_option("--ports", f.ports,
                    "mesh ports or field samples (default: 72; dpu: 400; trajectory: 9)");
    cmd->add_option("--solver", f.solver, "ODE solver (default: rk4)")
        ->check(CLI::IsMember({"euler", "midpoint", "rk4"}));
    cmd->add_option("--steps", f.steps, "solver steps over [t0, t1] (default: 4)");
    cmd->add_option("--grad", f.grad,
                    "gradient mode (default: auto = discretize for steps <= 8, else adjoint)")
        ->check(CLI::IsMember({"auto", "discretize", "adjoint"}));
    cmd->add_option("--epochs", f.epochs, "training epochs (default: 30; trajectory: 2000)");
    cmd->add_option("--lr", f.lr, "Adam learning rate (default: 0.01)");
    cmd->add_option("--batch", f.batch, "minibatch size (default: 100)");
}

void add_model_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--t0", f.t0, "integration start time (default: 0)");
    cmd->add_option("--t1", f.t1, "integration end time (default: 1)");
    cmd->add_flag("--renormalize,!--no-renormalize", f.renormalize,
                  "renormalize the state to unit energy after each solver step (default: off)");
    cmd->add_option("--crop", f.crop,
                    "Fourier crop size k (default: 6; the dpu pipeline requires 4)");
    cmd->add_option("--encoding", f.encoding,
                    "input encoding: complex keeps crop phases, magnitude drops them "
                    "(default: complex)")
        ->check(CLI::IsMember({"complex", "magnitude"}));
    cmd->add_flag("--train-activation,!--freeze-activation", f.train_activation,
                  "train the activation parameters (default: frozen; trajectory default trains)");
    cmd->add_option("--metalines", f.metalines, "metalines per dpu layer (default: 4)");
    cmd->add_option("--wavelength", f.wavelength,
                    "propagation wavelength in m (default: 1.55e-6)");
    cmd->add_option("--n-eff", f.n_eff, "slab effective index (default: 2.85)");
    cmd->add_option("--pitch", f.pitch, "field sample pitch in m (default: 0.5e-6)");
    cmd->add_option("--layer-distance", f.layer_distance,
                    "metaline-to-metaline distance in m (default: 50e-6)");
    cmd->add_option("--time-policy", f.time_policy, "RHS time handling (default: autonomous)")
        ->check(CLI::IsMember({"autonomous", "time-injected"}));
    cmd->add_option("--omega0", f.omega0,
                    "time-injected rotation rate in rad per unit t (default: 1)");
    cmd->add_option("--resnet-baseline", f.resnet_baseline,
                    "ResNet depth for the hardware-report area ratio (default: 2)");
}

bool flag_passed(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

// Copies every flag the user actually passed onto the config.
void apply_flags(onode::RunConfig& config, const CLI::App* cmd, const Flags& f) {
    auto passed = [&](const char* name) { return flag_passed(cmd, name); };
    if (passed("--seed")) config.seed = f.seed;
    if (passed("--out")) config.out_dir = f.out;
    if (passed("--data-dir")) config.data_dir = f.data_dir;
    if (passed("--backend")) config.backend = f.backend;
    if (passed("--mode")) config.mode = f.mode;
    if (passed("--layers")) config.layers = f.layers;
    if (passed("--ports")) config.ports = f.ports;
    if (passed("--solver")) config.solver = f.solver;
    if (passed("--steps")) config.steps = f.steps;
    if (passed("--grad")) config.grad = f.grad;
    if (passed("--epochs")) config.epochs = f.epochs;
    if (passed("--lr")) config.lr = f.lr;
    if (passed("--batch")) config.batch = f.batch;
    if (passed("--t0")) config.t0 = f.t0;
    if (passed("--t1")) config.t1 = f.t1;
    if (passed("--renormalize")) config.renormalize = f.renormalize;
    if (passed("--crop")) config.crop = f.crop;
    if (passed("--encoding")) config.encoding = f.encoding;
    if (passed("--train-activation")) config.train_activation = f.train_activation;
    if (passed("--metalines")) config.metalines = f.metalines;
    if (passed("--wavelength")) config.wavelength = f.wavelength;
    if (passed("--n-eff")) config.n_eff = f.n_eff;
    if (passed("--pitch")) config.pitch = f.pitch;
    if (passed("--layer-distance")) config.layer_distance = f.layer_distance;
    if (passed("--time-policy")) config.time_policy = f.time_policy;
    if (passed("--omega0")) config.omega0 = f.omega0;
    if (passed("--resnet-baseline")) config.resnet_baseline = f.resnet_baseline;
    if (passed("--checkpoint")) config.checkpoint_path = f.checkpoint;
}

int dispatch(const std::string& name, const Flags& f, const CLI::App* cmd) {
    std::string config_text;
    if (!f.config.empty()) config_text = onode::read_config_text(f.config);

    // For eval the checkpoint's stored config seeds the defaults.
    std::string checkpoint_config;
    if (name == "eval" && !f.checkpoint.empty())
        checkpoint_config = onode::load_checkpoint(f.checkpoint).config_json;

    // Pick the task (and with it the defaults) before overlaying.
    std::string task;
    if (name == "train-trajectory") {
        task = "trajectory";
    } else if (name == "eval") {
        task = onode::peek_config_string(checkpoint_config, "task", "mnist-mzi");
        task = onode::peek_config_string(config_text, "task", task);
    } else {
        task = onode::peek_config_string(config_text, "task", "mnist-mzi");
        if (task != "trajectory") {
            std::string backend = task == "mnist-dpu" ? "dpu" : "mzi";
            backend = onode::peek_config_string(config_text, "backend", backend);
            if (flag_passed(cmd, "--backend")) backend = f.backend;
            task = backend == "dpu" ? "mnist-dpu" : "mnist-mzi";
        }
    }

    onode::RunConfig config = onode::RunConfig::defaults_for(task);
    if (!checkpoint_config.empty()) config.overlay_json(checkpoint_config, "checkpoint config");
    if (!config_text.empty()) config.overlay_json(config_text, f.config);
    apply_flags(config, cmd, f);
    // An explicit backend flag moves the run between the two mnist tasks.
    if (config.task != "trajectory" && flag_passed(cmd, "--backend"))
        config.task = "mnist-" + config.backend;

    if (name == "train-mnist") return onode::cmd_train_mnist(config);
    if (name == "train-trajectory") return onode::cmd_train_trajectory(config);
    if (name == "eval") return onode::cmd_eval(config);
    if (name == "hardware-report") return onode::cmd_hardware_report(config);
    return onode::cmd_export(config);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"onode: optical neural ODE trainer and reporter"};
    app.require_subcommand(1);

    Flags f;
    CLI::App* train_mnist =
        app.add_subcommand("train-mnist", "train an MNIST classifier (mzi or dpu backend)");
    CLI::App* train_traj =
        app.add_subcommand("train-trajectory", "fit the spiral trajectory dynamics");
    CLI::App* eval_cmd = app.add_subcommand("eval", "re-evaluate a checkpoint on the test data");
    CLI::App* hardware =
        app.add_subcommand("hardware-report", "chip area / latency report for a configuration");
    CLI::App* export_cmd =
        app.add_subcommand("export", "bundle a finished run directory into export/");

    for (CLI::App* cmd : {train_mnist, train_traj, eval_cmd, hardware, export_cmd})
        add_shared_flags(cmd, f);
    for (CLI::App* cmd : {train_mnist, train_traj, eval_cmd, hardware}) add_model_flags(cmd, f);
    eval_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint JSON to evaluate (required)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const CLI::App* cmd = app.get_subcommands().front();
    try {
        return dispatch(cmd->get_name(), f, cmd);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return onode::exit_code_for(e);
    }
}
