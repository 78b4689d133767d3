#include "onode/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "jsonio.hpp"
#include "onode/data.hpp"
#include "onode/errors.hpp"
#include "onode/hardware.hpp"
#include "onode/rng.hpp"

namespace fs = std::filesystem;

namespace onode {
namespace {

// ---------------------------------------------------------------------------
// Enum parsing

ModelMode parse_mode(const std::string& s) {
    if (s == "onode") return ModelMode::onode;
    if (s == "resnet") return ModelMode::resnet;
    throw ConfigError("mode must be onode or resnet, got '" + s + "'");
}

Backend parse_backend(const std::string& s) {
    if (s == "mzi") return Backend::mzi;
    if (s == "dpu") return Backend::dpu;
    throw ConfigError("backend must be mzi or dpu, got '" + s + "'");
}

SolverMethod parse_solver(const std::string& s) {
    if (s == "euler") return SolverMethod::euler;
    if (s == "midpoint") return SolverMethod::midpoint;
    if (s == "rk4") return SolverMethod::rk4;
    throw ConfigError("solver must be euler, midpoint or rk4, got '" + s + "'");
}

GradientMode parse_grad(const std::string& s) {
    if (s == "auto") return GradientMode::automatic;
    if (s == "discretize") return GradientMode::discretize;
    if (s == "adjoint") return GradientMode::adjoint;
    throw ConfigError("grad must be auto, discretize or adjoint, got '" + s + "'");
}

TimePolicy parse_time_policy(const std::string& s) {
    if (s == "autonomous") return TimePolicy::autonomous;
    if (s == "time-injected") return TimePolicy::time_injected;
    throw ConfigError("time-policy must be autonomous or time-injected, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Output directory lock (single writer per directory).

struct OutputDir {
    fs::path dir;
    fs::path lock_path;
    bool locked = false;

    explicit OutputDir(const std::string& directory) : dir(directory) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec)
            throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
        lock_path = dir / ".lock";
        const int fd = ::open(lock_path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST)
                throw IoError("output directory " + dir.string() +
                              " is locked (.lock present; remove it if no run is active)");
            throw IoError("cannot create lock file " + lock_path.string() + ": " +
                          std::strerror(errno));
        }
        ::close(fd);
        locked = true;
    }

    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    ~OutputDir() {
        if (locked) {
            std::error_code ec;
            fs::remove(lock_path, ec);
        }
    }

    std::string file(const std::string& name) const { return (dir / name).string(); }
};

// ---------------------------------------------------------------------------
// Small helpers

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

std::string mnist_path(const RunConfig& config, const char* name) {
    return (fs::path(config.data_dir) / name).string();
}

ImageDataset load_split(const RunConfig& config, bool train) {
    if (train)
        return load_mnist(mnist_path(config, "train-images-idx3-ubyte"),
                          mnist_path(config, "train-labels-idx1-ubyte"), "train");
    return load_mnist(mnist_path(config, "t10k-images-idx3-ubyte"),
                      mnist_path(config, "t10k-labels-idx1-ubyte"), "test");
}

nlohmann::json base_summary(const RunConfig& config) {
    nlohmann::json doc;
    doc["task"] = config.task;
    doc["mode"] = config.mode;
    doc["backend"] = config.backend;
    doc["ports"] = config.ports;
    doc["layers"] = config.layers;
    doc["solver"] = config.solver;
    doc["steps"] = config.steps;
    doc["grad"] = config.grad;
    doc["seed"] = config.seed;
    doc["epochs"] = config.epochs;
    return doc;
}

void write_trajectory_csv(const std::string& path, const TrajectoryTask& task,
                          const std::vector<std::array<double, 2>>& predictions) {
    std::ostringstream out;
    out << "t,x_pred,y_pred,x_true,y_true\n";
    for (std::size_t k = 0; k < task.times.size(); ++k) {
        out << format_double("%.10g", task.times[k]) << ','
            << format_double("%.10g", predictions[k][0]) << ','
            << format_double("%.10g", predictions[k][1]) << ','
            << format_double("%.10g", task.targets[k][0]) << ','
            << format_double("%.10g", task.targets[k][1]) << '\n';
    }
    write_text_file(path, out.str());
}

// CSV table reader for cmd_export (header + numeric rows).
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::vector<std::string>> rows;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double parse_csv_number(const std::string& cell, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw ParseError("non-numeric cell '" + cell + "' in " + path);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::defaults_for(const std::string& task) {
    RunConfig config;
    config.task = task;
    if (task == "mnist-mzi") {
        // Struct defaults are the mnist-mzi experiment.
    } else if (task == "mnist-dpu") {
        config.backend = "dpu";
        config.ports = 400;
        config.crop = 4;
    } else if (task == "trajectory") {
        config.ports = 9;
        config.layers = 2;
        config.epochs = 10000;
        config.train_activation = true;
    } else {
        throw ConfigError("unknown task '" + task + "' (mnist-mzi, mnist-dpu, trajectory)");
    }
    return config;
}

void RunConfig::validate() const {
    if (task != "mnist-mzi" && task != "mnist-dpu" && task != "trajectory")
        throw ConfigError("unknown task '" + task + "' (mnist-mzi, mnist-dpu, trajectory)");
    parse_mode(mode);
    const Backend be = parse_backend(backend);
    parse_solver(solver);
    parse_grad(grad);
    parse_time_policy(time_policy);
    if (encoding != "complex" && encoding != "magnitude")
        throw ConfigError("encoding must be complex or magnitude, got '" + encoding + "'");
    if (task == "mnist-mzi" && be != Backend::mzi)
        throw ConfigError("task mnist-mzi requires backend mzi");
    if (task == "mnist-dpu" && be != Backend::dpu)
        throw ConfigError("task mnist-dpu requires backend dpu");
    if (task == "trajectory" && mode != "onode")
        throw ConfigError("the trajectory task requires mode onode");

    if (task != "trajectory") {
        if (ports < 10) throw ConfigError("classification needs ports >= 10 for the readout");
        if (crop < 1 || crop > 28) throw ConfigError("crop must lie in [1, 28]");
        if (be == Backend::mzi && crop * crop > ports)
            throw ConfigError("crop^2 must not exceed ports for the mzi input encoding");
        if (be == Backend::dpu && ports != 400)
            throw ConfigError("the dpu input pipeline requires ports == 400");
        if (be == Backend::dpu && crop != 4)
            throw ConfigError("the dpu input pipeline requires crop == 4");
    }
    if (resnet_baseline < 1) throw ConfigError("resnet-baseline must be >= 1");

    model_config().validate();
    train_config().validate();

    const ODESolveConfig solve = model_config().solve;
    if (solve.renormalize && solve.resolved_gradient_mode() == GradientMode::adjoint)
        throw ConfigError("renormalize requires grad discretize (adjoint cannot reverse it)");
}

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.mode = parse_mode(mode);
    mc.backend = parse_backend(backend);
    mc.port_count = ports;
    mc.layers = layers;
    mc.solve.method = parse_solver(solver);
    mc.solve.t0 = t0;
    mc.solve.t1 = t1;
    mc.solve.steps = steps;
    mc.solve.gradient_mode = parse_grad(grad);
    mc.solve.renormalize = renormalize;
    mc.propagation.wavelength = wavelength;
    mc.propagation.effective_index = n_eff;
    mc.propagation.pitch = pitch;
    mc.propagation.layer_distance = layer_distance;
    mc.dpu_metalines = metalines;
    mc.train_activation = train_activation;
    mc.time_policy = parse_time_policy(time_policy);
    mc.omega0 = omega0;
    if (task == "trajectory") {
        // The classification bias point (pi) has zero small-signal response,
        // which leaves the trajectory flow dead at its operating energies.
        // Start near transparency with a light tap and let training place it.
        mc.activation.alpha = 0.05;
        mc.activation.phase_bias = 0.0;
    }
    return mc;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.learning_rate = lr;
    if (batch < 1) throw ConfigError("batch must be >= 1");
    tc.batch_size = static_cast<std::size_t>(batch);
    tc.epochs = epochs;
    tc.seed = seed;
    return tc;
}

PreprocessConfig RunConfig::preprocess_config() const {
    PreprocessConfig pc;
    pc.crop_size = crop;
    pc.magnitude_only = (encoding == "magnitude");
    return pc;
}

ReadoutSpec RunConfig::readout() const { return ReadoutSpec::centered(ports); }

std::string RunConfig::to_json() const {
    nlohmann::json doc;
    doc["task"] = task;
    doc["mode"] = mode;
    doc["backend"] = backend;
    doc["ports"] = ports;
    doc["layers"] = layers;
    doc["solver"] = solver;
    doc["steps"] = steps;
    doc["grad"] = grad;
    doc["renormalize"] = renormalize;
    doc["t0"] = t0;
    doc["t1"] = t1;
    doc["time_policy"] = time_policy;
    doc["omega0"] = omega0;
    doc["epochs"] = epochs;
    doc["lr"] = lr;
    doc["batch"] = batch;
    doc["seed"] = seed;
    doc["crop"] = crop;
    doc["encoding"] = encoding;
    doc["train_activation"] = train_activation;
    doc["metalines"] = metalines;
    doc["wavelength"] = wavelength;
    doc["n_eff"] = n_eff;
    doc["pitch"] = pitch;
    doc["layer_distance"] = layer_distance;
    doc["resnet_baseline"] = resnet_baseline;
    return dump_json_17(doc, -1);
}

void RunConfig::overlay_json(const std::string& text, const std::string& source) {
    nlohmann::json doc;
    try {
        doc = parse_json(text, source);
    } catch (const ParseError& e) {
        throw ConfigError(std::string(e.what()));
    }
    if (!doc.is_object()) throw ConfigError(source + ": config must be a JSON object");

    auto want = [&](const nlohmann::json& v, bool ok, const char* kind, const std::string& key) {
        if (!ok)
            throw ConfigError(source + ": key '" + key + "' must be " + kind + ", got " +
                              v.dump());
    };
    for (const auto& [key, v] : doc.items()) {
        auto str = [&]() {
            want(v, v.is_string(), "a string", key);
            return v.get<std::string>();
        };
        auto integer = [&]() {
            want(v, v.is_number_integer(), "an integer", key);
            return v.get<int>();
        };
        auto number = [&]() {
            want(v, v.is_number(), "a number", key);
            return v.get<double>();
        };
        auto boolean = [&]() {
            want(v, v.is_boolean(), "a boolean", key);
            return v.get<bool>();
        };
        if (key == "task") task = str();
        else if (key == "mode") mode = str();
        else if (key == "backend") backend = str();
        else if (key == "ports") ports = integer();
        else if (key == "layers") layers = integer();
        else if (key == "solver") solver = str();
        else if (key == "steps") steps = integer();
        else if (key == "grad") grad = str();
        else if (key == "renormalize") renormalize = boolean();
        else if (key == "t0") t0 = number();
        else if (key == "t1") t1 = number();
        else if (key == "time_policy") time_policy = str();
        else if (key == "omega0") omega0 = number();
        else if (key == "epochs") epochs = integer();
        else if (key == "lr") lr = number();
        else if (key == "batch") batch = integer();
        else if (key == "seed") {
            want(v, v.is_number_integer(), "an integer", key);
            seed = v.get<std::uint64_t>();
        } else if (key == "crop") crop = integer();
        else if (key == "encoding") encoding = str();
        else if (key == "train_activation") train_activation = boolean();
        else if (key == "metalines") metalines = integer();
        else if (key == "wavelength") wavelength = number();
        else if (key == "n_eff") n_eff = number();
        else if (key == "pitch") pitch = number();
        else if (key == "layer_distance") layer_distance = number();
        else if (key == "resnet_baseline") resnet_baseline = integer();
        else if (key == "data_dir") data_dir = str();
        else if (key == "out_dir") out_dir = str();
        else if (key == "checkpoint_path") checkpoint_path = str();
        else throw ConfigError(source + ": unknown config key '" + key + "'");
    }
}

std::string peek_config_string(const std::string& text, const std::string& key,
                               const std::string& fallback) {
    if (text.empty()) return fallback;
    nlohmann::json doc;
    try {
        doc = parse_json(text, "config");
    } catch (const ParseError& e) {
        throw ConfigError(std::string(e.what()));
    }
    if (doc.is_object() && doc.contains(key) && doc[key].is_string())
        return doc[key].get<std::string>();
    return fallback;
}

std::string read_config_text(const std::string& path) { return read_text_file(path); }

// ---------------------------------------------------------------------------
// Commands

int cmd_train_mnist(const RunConfig& config) {
    config.validate();
    if (config.task != "mnist-mzi" && config.task != "mnist-dpu")
        throw ConfigError("train-mnist requires task mnist-mzi or mnist-dpu, got '" +
                          config.task + "'");
    OutputDir out(config.out_dir);

    FourierPreprocessor preprocessor;
    ClassificationData train_data, test_data;
    {
        const ImageDataset train = load_split(config, true);
        const ImageDataset test = load_split(config, false);
        preprocessor = FourierPreprocessor::fit(train, config.preprocess_config());
        train_data = preprocess_classification(train, preprocessor);
        test_data = preprocess_classification(test, preprocessor);
    }

    SplitMix64 rng(config.seed);
    Model model = make_model(config.model_config(), rng);
    const ReadoutSpec spec = config.readout();

    std::cout << "training " << config.task << " mode=" << config.mode
              << " ports=" << config.ports << " layers=" << config.layers
              << " params=" << model.param_count() << " seed=" << config.seed << std::endl;
    const Metrics metrics =
        train_classification(config.train_config(), train_data, test_data, model, spec,
                             &std::cout);

    write_metrics_csv(out.file("metrics.csv"), metrics);
    write_confusion_csv(out.file("confusion.csv"), metrics);
    write_energy_csv(out.file("energy_distribution.csv"), metrics);

    Checkpoint ck = make_checkpoint(model, config.to_json(), config.seed, config.epochs);
    save_checkpoint(out.file("checkpoint.json"), ck);

    nlohmann::json summary = base_summary(config);
    summary["final_test_accuracy"] = metrics.accuracy;
    summary["final_train_loss"] = metrics.train_loss.empty() ? 0.0 : metrics.train_loss.back();
    summary["final_train_accuracy"] = metrics.train_acc.empty() ? 0.0 : metrics.train_acc.back();
    summary["preprocess_scale"] = preprocessor.scale;
    summary["param_count"] = model.param_count();
    write_text_file(out.file("train_summary.json"), dump_json_17(summary, 1) + "\n");

    std::cout << "final test accuracy: " << format_double("%.6f", metrics.accuracy) << "\n"
              << "artifacts: " << out.dir.string() << std::endl;
    return 0;
}

int cmd_train_trajectory(const RunConfig& config) {
    config.validate();
    if (config.task != "trajectory")
        throw ConfigError("train-trajectory requires task trajectory, got '" + config.task + "'");
    OutputDir out(config.out_dir);

    const TrajectoryTask task = TrajectoryTask::standard();
    SplitMix64 rng(config.seed);
    Model model = make_model(config.model_config(), rng);

    std::cout << "training trajectory ports=" << config.ports << " layers=" << config.layers
              << " params=" << model.param_count() << " seed=" << config.seed << std::endl;
    const TrajectoryHistory history =
        train_trajectory(config.train_config(), task, model, &std::cout);

    write_trajectory_csv(out.file("trajectory.csv"), task, history.predictions);
    Checkpoint ck = make_checkpoint(model, config.to_json(), config.seed, config.epochs);
    save_checkpoint(out.file("checkpoint.json"), ck);

    nlohmann::json summary = base_summary(config);
    summary["final_mse"] = history.final_mse;
    summary["param_count"] = model.param_count();
    write_text_file(out.file("train_summary.json"), dump_json_17(summary, 1) + "\n");

    std::cout << "final mse: " << format_double("%.8g", history.final_mse) << "\n"
              << "artifacts: " << out.dir.string() << std::endl;
    return 0;
}

int cmd_eval(const RunConfig& config) {
    config.validate();
    if (config.checkpoint_path.empty()) throw ConfigError("eval requires --checkpoint <path>");
    const Checkpoint ck = load_checkpoint(config.checkpoint_path);
    OutputDir out(config.out_dir);

    SplitMix64 rng(ck.seed);
    Model model = make_model(config.model_config(), rng);
    apply_checkpoint(ck, model);

    nlohmann::json summary = base_summary(config);
    summary["checkpoint"] = config.checkpoint_path;
    summary["checkpoint_epoch"] = ck.epoch;

    if (config.task == "trajectory") {
        const TrajectoryTask task = TrajectoryTask::standard();
        const std::vector<std::array<double, 2>> predictions = predict_trajectory(model, task);
        const double mse = trajectory_mse(predictions, task.targets).loss;
        write_trajectory_csv(out.file("trajectory.csv"), task, predictions);
        summary["final_mse"] = mse;
        write_text_file(out.file("eval_summary.json"), dump_json_17(summary, 1) + "\n");
        std::cout << "trajectory mse: " << format_double("%.8g", mse) << std::endl;
        return 0;
    }

    FourierPreprocessor preprocessor;
    ClassificationData test_data;
    {
        const ImageDataset train = load_split(config, true);
        const ImageDataset test = load_split(config, false);
        preprocessor = FourierPreprocessor::fit(train, config.preprocess_config());
        test_data = preprocess_classification(test, preprocessor);
    }
    const Metrics metrics = evaluate(model, test_data, config.readout());
    write_confusion_csv(out.file("confusion.csv"), metrics);
    write_energy_csv(out.file("energy_distribution.csv"), metrics);
    summary["accuracy"] = metrics.accuracy;
    summary["preprocess_scale"] = preprocessor.scale;
    write_text_file(out.file("eval_summary.json"), dump_json_17(summary, 1) + "\n");
    std::cout << "test accuracy: " << format_double("%.6f", metrics.accuracy) << std::endl;
    return 0;
}

int cmd_hardware_report(const RunConfig& config) {
    config.validate();
    const HardwareReport report = hardware_report(config.model_config(), config.resnet_baseline);
    print_hardware_report(report, std::cout);
    OutputDir out(config.out_dir);
    write_text_file(out.file("hardware_report.json"), hardware_report_json(report) + "\n");
    std::cout << "wrote " << out.file("hardware_report.json") << std::endl;
    return 0;
}

int cmd_export(const RunConfig& config) {
    config.validate();
    const fs::path dir(config.out_dir);
    if (!fs::exists(dir)) throw IoError("run directory " + dir.string() + " does not exist");
    OutputDir out(config.out_dir);

    const fs::path summary_path = dir / "train_summary.json";
    if (!fs::exists(summary_path))
        throw IoError("missing train artifacts in " + dir.string() +
                      ": expected train_summary.json plus metrics.csv, confusion.csv and "
                      "energy_distribution.csv (mnist tasks) or trajectory.csv (trajectory)");

    nlohmann::json merged = parse_json(read_text_file(summary_path.string()), "train_summary.json");
    if (!merged.is_object()) throw ParseError("train_summary.json: expected a JSON object");

    std::string curves_source;
    const fs::path metrics_path = dir / "metrics.csv";
    const fs::path trajectory_path = dir / "trajectory.csv";
    if (fs::exists(metrics_path)) {
        curves_source = metrics_path.string();
        const auto rows = read_csv(curves_source);
        if (rows.empty() || rows[0] != std::vector<std::string>{"epoch", "train_loss",
                                                                "train_acc", "test_acc"})
            throw ParseError("metrics.csv: unexpected header");
        nlohmann::json curves;
        curves["epoch"] = nlohmann::json::array();
        curves["train_loss"] = nlohmann::json::array();
        curves["train_acc"] = nlohmann::json::array();
        curves["test_acc"] = nlohmann::json::array();
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != 4) throw ParseError("metrics.csv: malformed row");
            curves["epoch"].push_back(
                static_cast<long>(parse_csv_number(rows[r][0], curves_source)));
            curves["train_loss"].push_back(parse_csv_number(rows[r][1], curves_source));
            curves["train_acc"].push_back(parse_csv_number(rows[r][2], curves_source));
            curves["test_acc"].push_back(parse_csv_number(rows[r][3], curves_source));
        }
        merged["curves"] = std::move(curves);
    } else if (fs::exists(trajectory_path)) {
        curves_source = trajectory_path.string();
        const auto rows = read_csv(curves_source);
        if (rows.empty() || rows[0] != std::vector<std::string>{"t", "x_pred", "y_pred", "x_true",
                                                                "y_true"})
            throw ParseError("trajectory.csv: unexpected header");
        merged["trajectory_points"] = static_cast<long>(rows.size() - 1);
    } else {
        throw IoError("missing curves in " + dir.string() +
                      ": expected metrics.csv (mnist tasks) or trajectory.csv (trajectory)");
    }

    auto merge_matrix = [&](const char* file, const char* key, bool integral) {
        const fs::path path = dir / file;
        if (!fs::exists(path)) return;
        const auto rows = read_csv(path.string());
        nlohmann::json matrix = nlohmann::json::array();
        for (std::size_t r = 1; r < rows.size(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t c = 1; c < rows[r].size(); ++c) {
                const double v = parse_csv_number(rows[r][c], path.string());
                if (integral)
                    row.push_back(static_cast<long>(v));
                else
                    row.push_back(v);
            }
            matrix.push_back(std::move(row));
        }
        merged[key] = std::move(matrix);
    };
    merge_matrix("confusion.csv", "confusion", true);
    merge_matrix("energy_distribution.csv", "energy_distribution", false);

    const fs::path export_dir = dir / "export";
    std::error_code ec;
    fs::create_directories(export_dir, ec);
    if (ec)
        throw IoError("cannot create " + export_dir.string() + ": " + ec.message());
    write_text_file((export_dir / "summary.json").string(), dump_json_17(merged, 1) + "\n");
    write_text_file((export_dir / "curves.csv").string(), read_text_file(curves_source));

    std::cout << "wrote " << (export_dir / "summary.json").string() << std::endl;
    return 0;
}

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const ConfigError*>(&error)) return 2;
    if (dynamic_cast<const ShapeError*>(&error)) return 2;
    if (dynamic_cast<const StateError*>(&error)) return 2;
    if (dynamic_cast<const IoError*>(&error)) return 3;
    if (dynamic_cast<const ParseError*>(&error)) return 3;
    if (dynamic_cast<const NumericError*>(&error)) return 4;
    return 1;
}

}  // namespace onode
