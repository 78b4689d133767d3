#include "onode/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "jsonio.hpp"
#include "onode/errors.hpp"
#include "onode/rng.hpp"

namespace onode {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
}

// ---------------------------------------------------------------------------
// Losses

LossResult intensity_cross_entropy(const OpticalState& state, const ReadoutSpec& spec,
                                   int label) {
    if (label < 0 || label > 9)
        throw ConfigError("intensity_cross_entropy: label must lie in [0, 9]");
    const std::array<double, 10> intensities = read_intensities(state, spec);

    double max_i = intensities[0];
    for (double v : intensities) max_i = std::max(max_i, v);
    std::array<double, 10> expo{};
    double z = 0.0;
    for (int q = 0; q < 10; ++q) {
        expo[static_cast<std::size_t>(q)] = std::exp(intensities[static_cast<std::size_t>(q)] - max_i);
        z += expo[static_cast<std::size_t>(q)];
    }

    LossResult out;
    out.loss = max_i - intensities[static_cast<std::size_t>(label)] + std::log(z);
    out.state_cotangent.assign(state.amplitudes().size(), cdouble(0.0, 0.0));
    for (int q = 0; q < 10; ++q) {
        const double p = expo[static_cast<std::size_t>(q)] / z;
        const double g = p - (q == label ? 1.0 : 0.0);
        const int port = spec.class_ports()[static_cast<std::size_t>(q)];
        // d|a|^2/dRe = 2 Re(a), d|a|^2/dIm = 2 Im(a).
        out.state_cotangent[static_cast<std::size_t>(port)] += 2.0 * g * state[port];
    }
    return out;
}

TrajectoryLoss trajectory_mse(const std::vector<std::array<double, 2>>& predicted,
                              const std::vector<std::array<double, 2>>& target) {
    if (predicted.size() != target.size())
        throw ShapeError("trajectory_mse: " + std::to_string(predicted.size()) +
                         " predictions vs " + std::to_string(target.size()) + " targets");
    TrajectoryLoss out;
    out.point_cotangents.assign(predicted.size(), {0.0, 0.0});
    if (predicted.empty()) return out;
    const double inv = 1.0 / static_cast<double>(predicted.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const double dx = predicted[k][0] - target[k][0];
        const double dy = predicted[k][1] - target[k][1];
        sum += dx * dx + dy * dy;
        out.point_cotangents[k] = {dx * inv, dy * inv};
    }
    out.loss = 0.5 * sum * inv;
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState OptimizerState::zeros(std::size_t param_count) {
    OptimizerState opt;
    opt.m.assign(param_count, 0.0);
    opt.v.assign(param_count, 0.0);
    return opt;
}

void adam_update(OptimizerState& opt, std::vector<double>& params,
                 const std::vector<double>& grads, double learning_rate) {
    if (opt.m.size() != params.size() || opt.v.size() != params.size() ||
        grads.size() != params.size())
        throw ShapeError("adam_update: parameter/gradient/moment shape mismatch");
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
        const double mhat = opt.m[i] / bc1;
        const double vhat = opt.v[i] / bc2;
        params[i] -= learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
}

// ---------------------------------------------------------------------------
// Evaluation

ClassificationData preprocess_classification(const ImageDataset& dataset,
                                             const FourierPreprocessor& preprocessor) {
    ClassificationData out;
    out.crops.reserve(dataset.size());
    out.labels = dataset.labels;
    std::vector<double> image(28 * 28);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double* px = dataset.image(i);
        image.assign(px, px + 28 * 28);
        out.crops.push_back(preprocessor.apply(image));
    }
    return out;
}

OpticalState encode_for_model(const Model& model, const ComplexGrid& crop) {
    if (model.config.backend == Backend::mzi)
        return encode_classification_input(crop, model.config.port_count);
    if (model.config.port_count != 400)
        throw ConfigError("encode_for_model: the dpu input pipeline produces 400 samples, model has " +
                          std::to_string(model.config.port_count));
    return OpticalState(dpu_input_pipeline(crop));
}

namespace {

int predict_index(const std::array<double, 10>& intensities) {
    int best = 0;
    for (int q = 1; q < 10; ++q)
        if (intensities[static_cast<std::size_t>(q)] > intensities[static_cast<std::size_t>(best)])
            best = q;
    return best;
}

} // namespace

Metrics evaluate(const Model& model, const ClassificationData& data, const ReadoutSpec& spec) {
    Metrics metrics;
    std::array<long, 10> class_counts{};
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int label = data.labels[i];
        if (label < 0 || label > 9) throw ConfigError("evaluate: label outside [0, 9]");
        const OpticalState input = encode_for_model(model, data.crops[i]);
        const OpticalState output = model.forward(input);
        const std::array<double, 10> intensities = read_intensities(output, spec);
        const int pred = predict_index(intensities);
        metrics.confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)] += 1;
        class_counts[static_cast<std::size_t>(label)] += 1;
        if (pred == label) ++correct;

        double total = 0.0;
        for (double v : intensities) total += v;
        if (total > 0.0)
            for (int q = 0; q < 10; ++q)
                metrics.energy_distribution[static_cast<std::size_t>(label)][static_cast<std::size_t>(q)] +=
                    intensities[static_cast<std::size_t>(q)] / total;
    }
    for (int c = 0; c < 10; ++c)
        if (class_counts[static_cast<std::size_t>(c)] > 0)
            for (int q = 0; q < 10; ++q)
                metrics.energy_distribution[static_cast<std::size_t>(c)][static_cast<std::size_t>(q)] /=
                    static_cast<double>(class_counts[static_cast<std::size_t>(c)]);
    if (data.size() > 0)
        metrics.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return metrics;
}

std::vector<double> fd_gradient_oracle(
    const std::function<double(const std::vector<double>&)>& loss, std::vector<double> params,
    double eps) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + eps;
        const double up = loss(params);
        params[i] = keep - eps;
        const double down = loss(params);
        params[i] = keep;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Training loops

Metrics train_classification(const TrainConfig& config, const ClassificationData& train,
                             const ClassificationData& test, Model& model,
                             const ReadoutSpec& spec, std::ostream* progress) {
    config.validate();
    if (train.size() == 0) throw ConfigError("train_classification: empty training set");

    std::vector<double> params;
    model.get_params(params);
    OptimizerState opt = OptimizerState::zeros(params.size());
    const std::vector<bool> mask = model.trainable_mask();
    std::vector<double> grad(params.size());

    std::vector<double> loss_curve, acc_curve, test_curve;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto batches =
            make_batches(train.size(), config.batch_size,
                         mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : batches) {
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t idx : batch) {
                const OpticalState input = encode_for_model(model, train.crops[idx]);
                const Model::ForwardRecord fwd = model.forward_for_training(input);
                const LossResult loss = intensity_cross_entropy(fwd.output, spec, train.labels[idx]);
                if (!std::isfinite(loss.loss))
                    throw NumericError("train_classification: non-finite loss");
                const GradientResult gr = model.backward_from(fwd, input, loss.state_cotangent);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gr.param_gradient[i];
                loss_sum += loss.loss;
                if (predict_index(read_intensities(fwd.output, spec)) == train.labels[idx])
                    ++correct;
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = mask[i] ? grad[i] * inv : 0.0;
            for (double g : grad)
                if (!std::isfinite(g))
                    throw NumericError("train_classification: non-finite gradient");
            adam_update(opt, params, grad, config.learning_rate);
            model.project_params(params);
            model.set_params(params);
        }
        loss_curve.push_back(loss_sum / static_cast<double>(train.size()));
        acc_curve.push_back(static_cast<double>(correct) / static_cast<double>(train.size()));
        test_curve.push_back(evaluate(model, test, spec).accuracy);
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "epoch %d/%d  train_loss %.6f  train_acc %.4f  test_acc %.4f",
                          epoch + 1, config.epochs, loss_curve.back(), acc_curve.back(),
                          test_curve.back());
            *progress << line << std::endl;
        }
    }

    Metrics metrics = evaluate(model, test, spec);
    metrics.train_loss = std::move(loss_curve);
    metrics.train_acc = std::move(acc_curve);
    metrics.test_acc = std::move(test_curve);
    return metrics;
}

std::vector<std::array<double, 2>> predict_trajectory(const Model& model,
                                                      const TrajectoryTask& task) {
    if (model.config.mode != ModelMode::onode)
        throw ConfigError("predict_trajectory: requires an onode-mode model");
    const OpticalState input =
        encode_trajectory_input(task.x0[0], task.x0[1], model.config.port_count);
    const std::vector<OpticalState> states =
        sample_trajectory(model.dynamics, input, task.times, model.config.solve);
    std::vector<std::array<double, 2>> out(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto [x, y] = decode_trajectory_output(states[k]);
        out[k] = {x, y};
    }
    return out;
}

TrajectoryHistory train_trajectory(const TrainConfig& config, const TrajectoryTask& task,
                                   Model& model, std::ostream* progress) {
    config.validate();
    if (model.config.mode != ModelMode::onode)
        throw ConfigError("train_trajectory: requires an onode-mode model");
    if (task.times.empty() || task.times.size() != task.targets.size())
        throw ShapeError("train_trajectory: times and targets must be nonempty and equal length");

    const int n = model.config.port_count;
    const OpticalState input = encode_trajectory_input(task.x0[0], task.x0[1], n);
    std::vector<double> params;
    model.get_params(params);
    OptimizerState opt = OptimizerState::zeros(params.size());
    const std::vector<bool> mask = model.trainable_mask();
    std::vector<double> grad(params.size());
    std::vector<cvec> cots(task.times.size());
    const double inv_n = 1.0 / static_cast<double>(n);

    TrajectoryHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<std::array<double, 2>> preds = predict_trajectory(model, task);
        const TrajectoryLoss loss = trajectory_mse(preds, task.targets);
        if (!std::isfinite(loss.loss)) throw NumericError("train_trajectory: non-finite loss");
        history.mse.push_back(loss.loss);
        if (progress && ((epoch + 1) % 100 == 0 || epoch == 0)) {
            char line[96];
            std::snprintf(line, sizeof(line), "epoch %d/%d  mse %.8f", epoch + 1, config.epochs,
                          loss.loss);
            *progress << line << std::endl;
        }

        for (std::size_t k = 0; k < cots.size(); ++k)
            cots[k].assign(static_cast<std::size_t>(n),
                           cdouble(loss.point_cotangents[k][0] * inv_n,
                                   loss.point_cotangents[k][1] * inv_n));
        const GradientResult gr =
            trajectory_gradients(model.dynamics, input, task.times, cots, model.config.solve);
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] = mask[i] ? gr.param_gradient[i] : 0.0;
        for (double g : grad)
            if (!std::isfinite(g)) throw NumericError("train_trajectory: non-finite gradient");
        adam_update(opt, params, grad, config.learning_rate);
        model.project_params(params);
        model.set_params(params);
    }

    history.predictions = predict_trajectory(model, task);
    history.final_mse = trajectory_mse(history.predictions, task.targets).loss;
    return history;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint make_checkpoint(const Model& model, const std::string& config_json,
                           std::uint64_t seed, int epoch) {
    Checkpoint ck;
    ck.config_json = dump_json_17(parse_json(config_json, "checkpoint config"), -1);
    ck.seed = seed;
    ck.epoch = epoch;
    for (const auto& [name, block] : model.named_blocks()) {
        CheckpointSegment seg;
        seg.name = name;
        seg.shape = {block->param_count()};
        seg.values.resize(static_cast<std::size_t>(block->param_count()));
        block->get_params(seg.values.data());
        ck.segments.push_back(std::move(seg));
    }
    return ck;
}

void apply_checkpoint(const Checkpoint& checkpoint, Model& model) {
    const auto blocks = model.named_blocks();
    if (checkpoint.segments.size() != blocks.size())
        throw ShapeError("apply_checkpoint: checkpoint has " +
                         std::to_string(checkpoint.segments.size()) + " segments, model expects " +
                         std::to_string(blocks.size()));
    std::vector<double> params;
    params.reserve(static_cast<std::size_t>(model.param_count()));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const CheckpointSegment& seg = checkpoint.segments[i];
        const auto& [name, block] = blocks[i];
        if (seg.name != name)
            throw ShapeError("apply_checkpoint: segment '" + seg.name + "' does not match model block '" +
                             name + "'");
        if (seg.shape != std::vector<int>{block->param_count()} ||
            seg.values.size() != static_cast<std::size_t>(block->param_count()))
            throw ShapeError("apply_checkpoint: segment '" + seg.name + "' has " +
                             std::to_string(seg.values.size()) + " values, block expects " +
                             std::to_string(block->param_count()));
        params.insert(params.end(), seg.values.begin(), seg.values.end());
    }
    model.set_params(params);
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    nlohmann::json doc;
    doc["version"] = checkpoint.version;
    doc["config"] = parse_json(checkpoint.config_json, "checkpoint config");
    nlohmann::json segs = nlohmann::json::array();
    for (const CheckpointSegment& seg : checkpoint.segments) {
        nlohmann::json j;
        j["name"] = seg.name;
        j["shape"] = seg.shape;
        j["values"] = seg.values;
        segs.push_back(std::move(j));
    }
    doc["segments"] = std::move(segs);
    if (checkpoint.has_optimizer) {
        nlohmann::json j;
        j["beta1"] = checkpoint.optimizer.beta1;
        j["beta2"] = checkpoint.optimizer.beta2;
        j["epsilon"] = checkpoint.optimizer.epsilon;
        j["step"] = checkpoint.optimizer.step;
        j["m"] = checkpoint.optimizer.m;
        j["v"] = checkpoint.optimizer.v;
        doc["optimizer"] = std::move(j);
    }
    doc["seed"] = checkpoint.seed;
    doc["epoch"] = checkpoint.epoch;
    write_text_file(path, dump_json_17(doc));
}

Checkpoint load_checkpoint(const std::string& path) {
    const nlohmann::json doc = parse_json(read_text_file(path), path);
    if (!doc.is_object()) throw ParseError(path + ": checkpoint root must be an object");
    for (const char* key : {"version", "config", "segments", "seed", "epoch"})
        if (!doc.contains(key)) throw ParseError(path + ": missing checkpoint field '" + key + "'");
    if (!doc["version"].is_number_integer())
        throw ParseError(path + ": version must be an integer");
    Checkpoint ck;
    ck.version = doc["version"].get<int>();
    if (ck.version != 1)
        throw ConfigError(path + ": unsupported checkpoint version " + std::to_string(ck.version));
    if (!doc["config"].is_object()) throw ParseError(path + ": config must be an object");
    ck.config_json = dump_json_17(doc["config"], -1);
    if (!doc["segments"].is_array()) throw ParseError(path + ": segments must be an array");
    for (const auto& j : doc["segments"]) {
        if (!j.is_object() || !j.contains("name") || !j.contains("shape") || !j.contains("values"))
            throw ParseError(path + ": malformed segment entry");
        CheckpointSegment seg;
        seg.name = j["name"].get<std::string>();
        seg.shape = j["shape"].get<std::vector<int>>();
        seg.values = j["values"].get<std::vector<double>>();
        long expect = 1;
        for (int d : seg.shape) expect *= d;
        if (seg.shape.empty() || expect != static_cast<long>(seg.values.size()))
            throw ShapeError(path + ": segment '" + seg.name + "' shape does not match its values");
        ck.segments.push_back(std::move(seg));
    }
    if (doc.contains("optimizer")) {
        const auto& j = doc["optimizer"];
        if (!j.is_object()) throw ParseError(path + ": optimizer must be an object");
        ck.has_optimizer = true;
        ck.optimizer.beta1 = j.at("beta1").get<double>();
        ck.optimizer.beta2 = j.at("beta2").get<double>();
        ck.optimizer.epsilon = j.at("epsilon").get<double>();
        ck.optimizer.step = j.at("step").get<long>();
        ck.optimizer.m = j.at("m").get<std::vector<double>>();
        ck.optimizer.v = j.at("v").get<std::vector<double>>();
    }
    ck.seed = doc["seed"].get<std::uint64_t>();
    ck.epoch = doc["epoch"].get<int>();
    return ck;
}

// ---------------------------------------------------------------------------
// CSV export

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void write_metrics_csv(const std::string& path, const Metrics& metrics) {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,test_acc\n";
    for (std::size_t e = 0; e < metrics.train_loss.size(); ++e)
        out << (e + 1) << ',' << fmt(metrics.train_loss[e]) << ',' << fmt(metrics.train_acc[e])
            << ',' << fmt(metrics.test_acc[e]) << '\n';
    write_text_file(path, out.str());
}

void write_confusion_csv(const std::string& path, const Metrics& metrics) {
    std::ostringstream out;
    for (int q = 0; q < 10; ++q) out << (q ? "," : "") << "pred_" << q;
    out << '\n';
    for (int c = 0; c < 10; ++c) {
        for (int q = 0; q < 10; ++q)
            out << (q ? "," : "")
                << metrics.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(q)];
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_energy_csv(const std::string& path, const Metrics& metrics) {
    std::ostringstream out;
    for (int q = 0; q < 10; ++q) out << (q ? "," : "") << "port_" << q;
    out << '\n';
    for (int c = 0; c < 10; ++c) {
        for (int q = 0; q < 10; ++q)
            out << (q ? "," : "")
                << fmt(metrics.energy_distribution[static_cast<std::size_t>(c)][static_cast<std::size_t>(q)]);
        out << '\n';
    }
    write_text_file(path, out.str());
}

} // namespace onode
