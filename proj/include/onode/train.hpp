#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "onode/data.hpp"
#include "onode/field.hpp"
#include "onode/model.hpp"

namespace onode {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 100;
    int epochs = 30;
    std::uint64_t seed = 1;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Losses

struct LossResult {
    double loss = 0.0;
    cvec state_cotangent;
};

// Softmax over the 10 readout intensities; loss = -log p(label); cotangent
// propagated through |a|^2 to the complex state.
LossResult intensity_cross_entropy(const OpticalState& state, const ReadoutSpec& spec, int label);

struct TrajectoryLoss {
    double loss = 0.0;
    std::vector<std::array<double, 2>> point_cotangents;
};

// Mean over samples and over the two coordinates of the squared error.
TrajectoryLoss trajectory_mse(const std::vector<std::array<double, 2>>& predicted,
                              const std::vector<std::array<double, 2>>& target);

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerState {
    std::vector<double> m, v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerState zeros(std::size_t param_count);
};

// Standard bias-corrected Adam step, in place.
void adam_update(OptimizerState& opt, std::vector<double>& params,
                 const std::vector<double>& grads, double learning_rate);

// ---------------------------------------------------------------------------
// Metrics and evaluation

struct Metrics {
    double accuracy = 0.0;
    // rows = true class, columns = predicted class.
    std::array<std::array<long, 10>, 10> confusion{};
    // rows = true class, columns = readout port; row-normalized mean energy
    // fractions over the 10 readout ports.
    std::array<std::array<double, 10>, 10> energy_distribution{};
    // Per-epoch curves, filled by the training loops.
    std::vector<double> train_loss, train_acc, test_acc;
};

// Preprocessed classification samples: scaled Fourier crops plus labels.
struct ClassificationData {
    std::vector<ComplexGrid> crops;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

ClassificationData preprocess_classification(const ImageDataset& dataset,
                                             const FourierPreprocessor& preprocessor);

// Crop -> model input state (mzi: centered contiguous ports; dpu: pad/upsample
// pipeline, which requires port_count == 400).
OpticalState encode_for_model(const Model& model, const ComplexGrid& crop);

// Argmax prediction (ties -> lowest index), confusion counts and energy
// distribution on the given samples.
Metrics evaluate(const Model& model, const ClassificationData& data, const ReadoutSpec& spec);

// Central finite differences, (L(p + eps e) - L(p - eps e)) / (2 eps).
std::vector<double> fd_gradient_oracle(
    const std::function<double(const std::vector<double>&)>& loss, std::vector<double> params,
    double eps = 1e-5);

// ---------------------------------------------------------------------------
// Training loops

// Epoch loop over seeded shuffled batches with sequential (fixed-order) batch
// gradient accumulation; returns test metrics with the per-epoch curves.
// progress, when given, receives one line per epoch.
Metrics train_classification(const TrainConfig& config, const ClassificationData& train,
                             const ClassificationData& test, Model& model,
                             const ReadoutSpec& spec, std::ostream* progress = nullptr);

struct TrajectoryHistory {
    std::vector<double> mse;
    double final_mse = 0.0;
    std::vector<std::array<double, 2>> predictions;
};

TrajectoryHistory train_trajectory(const TrainConfig& config, const TrajectoryTask& task,
                                   Model& model, std::ostream* progress = nullptr);

// Predictions at the task times with the current parameters.
std::vector<std::array<double, 2>> predict_trajectory(const Model& model,
                                                      const TrajectoryTask& task);

// ---------------------------------------------------------------------------
// Checkpoints

struct CheckpointSegment {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

struct Checkpoint {
    int version = 1;
    // Serialized JSON object echoing the run configuration.
    std::string config_json = "{}";
    std::vector<CheckpointSegment> segments;
    bool has_optimizer = false;
    OptimizerState optimizer;
    std::uint64_t seed = 0;
    int epoch = 0;
};

// JSON on disk; floating-point values carry 17 significant digits so the
// round-trip is bitwise.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Segment extraction/application with name+shape validation.
Checkpoint make_checkpoint(const Model& model, const std::string& config_json,
                           std::uint64_t seed, int epoch);
void apply_checkpoint(const Checkpoint& checkpoint, Model& model);

// Metrics export (CSV, stable formatting).
void write_metrics_csv(const std::string& path, const Metrics& metrics);
void write_confusion_csv(const std::string& path, const Metrics& metrics);
void write_energy_csv(const std::string& path, const Metrics& metrics);

} // namespace onode
