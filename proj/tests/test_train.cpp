#include "doctest.h"

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "onode/blocks.hpp"
#include "onode/data.hpp"
#include "onode/errors.hpp"
#include "onode/field.hpp"
#include "onode/model.hpp"
#include "onode/rng.hpp"
#include "onode/train.hpp"

using namespace onode;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "onode_train_tests";
    fs::create_directories(dir);
    return dir;
}

// Identity model: resnet mode with no residual layers leaves the encoded
// input untouched, so readout intensities are a direct function of the crop.
Model identity_model(int port_count) {
    Model model;
    model.config.mode = ModelMode::resnet;
    model.config.backend = Backend::mzi;
    model.config.port_count = port_count;
    model.config.layers = 0;
    return model;
}

ComplexGrid crop3(const std::array<cdouble, 9>& values) {
    ComplexGrid crop(3, 3);
    crop.values.assign(values.begin(), values.end());
    return crop;
}

// Small trainable model on 12 ports. The linear activation point
// (alpha = 0, bias = 0) keeps every forward cheap and well conditioned.
Model small_classifier(ModelMode mode, std::uint64_t seed) {
    ModelConfig config;
    config.mode = mode;
    config.backend = Backend::mzi;
    config.port_count = 12;
    config.layers = 1;
    config.activation.alpha = 0.0;
    config.activation.gain = 1.0;
    config.activation.phase_bias = 0.0;
    config.solve.steps = 2;
    SplitMix64 rng(seed);
    return make_model(config, rng);
}

// Two-class toy set: class c concentrates crop energy on crop cell c (which
// the centered 12-port encoding maps onto the class-c readout port), plus a
// small seeded complex perturbation everywhere.
ClassificationData toy_classification(int per_class, std::uint64_t seed) {
    ClassificationData data;
    SplitMix64 rng(seed);
    for (int s = 0; s < per_class; ++s) {
        for (int label : {2, 6}) {
            std::array<cdouble, 9> values{};
            for (auto& v : values) v = cdouble(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
            values[static_cast<std::size_t>(label)] += cdouble(1.8, 0.9);
            data.crops.push_back(crop3(values));
            data.labels.push_back(label);
        }
    }
    return data;
}

double params_max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace

// ---------------------------------------------------------------------------
// intensity_cross_entropy

TEST_CASE("cross entropy of an all-zero state is log(10)") {
    const OpticalState state = OpticalState::zeros(12);
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    const LossResult out = intensity_cross_entropy(state, spec, 7);
    // All ten intensities are equal, so the softmax is uniform.
    CHECK(out.loss == doctest::Approx(2.302585092994046).epsilon(1e-12));
    CHECK(out.state_cotangent.size() == 12);
}

TEST_CASE("cross entropy with a single unit-intensity port") {
    // Label port reads intensity 1, the other nine read 0:
    // loss = -log(e / (e + 9)) = log(1 + 9/e).
    cvec amps(12, cdouble(0.0, 0.0));
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    const int label = 4;
    amps[static_cast<std::size_t>(spec.class_ports()[static_cast<std::size_t>(label)])] =
        cdouble(0.6, -0.8); // |a|^2 = 1
    const OpticalState state{amps};
    const LossResult out = intensity_cross_entropy(state, spec, label);
    CHECK(out.loss == doctest::Approx(1.461150171734475).epsilon(1e-12));

    // Placing the unit somewhere else makes the label the cold port.
    const LossResult wrong = intensity_cross_entropy(state, spec, 0);
    CHECK(wrong.loss > out.loss);
}

TEST_CASE("cross entropy rejects labels outside [0, 9]") {
    const OpticalState state = OpticalState::zeros(12);
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    CHECK_THROWS_AS(intensity_cross_entropy(state, spec, -1), ConfigError);
    CHECK_THROWS_AS(intensity_cross_entropy(state, spec, 10), ConfigError);
}

TEST_CASE("cross entropy cotangent matches finite differences on the state") {
    SplitMix64 rng(31);
    cvec amps(14);
    for (auto& a : amps) a = cdouble(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const ReadoutSpec spec = ReadoutSpec::centered(14);
    const int label = 3;
    const LossResult out = intensity_cross_entropy(OpticalState{cvec(amps)}, spec, label);

    const double eps = 1e-6;
    for (std::size_t p = 0; p < amps.size(); ++p) {
        for (int part = 0; part < 2; ++part) {
            cvec up = amps, dn = amps;
            const cdouble delta = part == 0 ? cdouble(eps, 0.0) : cdouble(0.0, eps);
            up[p] += delta;
            dn[p] -= delta;
            const double fd = (intensity_cross_entropy(OpticalState{std::move(up)}, spec, label).loss -
                               intensity_cross_entropy(OpticalState{std::move(dn)}, spec, label).loss) /
                              (2.0 * eps);
            const double got =
                part == 0 ? out.state_cotangent[p].real() : out.state_cotangent[p].imag();
            CHECK(got == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// trajectory_mse

TEST_CASE("trajectory mse averages over samples and coordinates") {
    const std::vector<std::array<double, 2>> pred = {{1.0, 2.0}, {3.0, 4.0}};
    const std::vector<std::array<double, 2>> target = {{0.0, 0.0}, {0.0, 0.0}};
    const TrajectoryLoss out = trajectory_mse(pred, target);
    // 0.5 * (1 + 4 + 9 + 16) / 2
    CHECK(out.loss == doctest::Approx(7.5).epsilon(1e-15));
    REQUIRE(out.point_cotangents.size() == 2);
    CHECK(out.point_cotangents[0][0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.point_cotangents[0][1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.point_cotangents[1][0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out.point_cotangents[1][1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("trajectory mse of a perfect prediction is zero") {
    const std::vector<std::array<double, 2>> points = {{0.6, 0.3}, {-0.1, 0.2}, {0.0, 0.0}};
    const TrajectoryLoss out = trajectory_mse(points, points);
    CHECK(out.loss == 0.0);
    for (const auto& c : out.point_cotangents) {
        CHECK(c[0] == 0.0);
        CHECK(c[1] == 0.0);
    }
}

TEST_CASE("trajectory mse cotangents match finite differences") {
    std::vector<std::array<double, 2>> pred = {{0.3, -0.2}, {0.9, 0.4}, {-0.5, 0.7}};
    const std::vector<std::array<double, 2>> target = {{0.1, 0.1}, {0.8, 0.2}, {-0.4, 0.9}};
    const TrajectoryLoss out = trajectory_mse(pred, target);
    const double eps = 1e-7;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        for (int c = 0; c < 2; ++c) {
            auto up = pred, dn = pred;
            up[k][static_cast<std::size_t>(c)] += eps;
            dn[k][static_cast<std::size_t>(c)] -= eps;
            const double fd =
                (trajectory_mse(up, target).loss - trajectory_mse(dn, target).loss) / (2.0 * eps);
            CHECK(out.point_cotangents[k][static_cast<std::size_t>(c)] ==
                  doctest::Approx(fd).epsilon(1e-7).scale(1.0));
        }
    }
}

TEST_CASE("trajectory mse rejects mismatched lengths") {
    const std::vector<std::array<double, 2>> two = {{0.0, 0.0}, {1.0, 1.0}};
    const std::vector<std::array<double, 2>> one = {{0.0, 0.0}};
    CHECK_THROWS_AS(trajectory_mse(two, one), ShapeError);
}

// ---------------------------------------------------------------------------
// adam_update

TEST_CASE("adam takes the documented bias-corrected steps") {
    // One parameter, constant gradient 0.5, lr 0.1. With a constant gradient
    // the bias-corrected moments are exactly mhat = 0.5, vhat = 0.25, so each
    // step moves by lr * 0.5 / (0.5 + eps).
    OptimizerState opt = OptimizerState::zeros(1);
    std::vector<double> params = {1.0};
    const std::vector<double> grads = {0.5};
    adam_update(opt, params, grads, 0.1);
    CHECK(params[0] == doctest::Approx(0.900000002).epsilon(1e-12));
    CHECK(opt.step == 1);
    CHECK(opt.m[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(opt.v[0] == doctest::Approx(0.00025).epsilon(1e-15));
    adam_update(opt, params, grads, 0.1);
    CHECK(params[0] == doctest::Approx(0.8000000040000006).epsilon(1e-12));
    CHECK(opt.step == 2);
}

TEST_CASE("adam leaves parameters with zero gradient untouched") {
    OptimizerState opt = OptimizerState::zeros(3);
    std::vector<double> params = {1.0, -2.0, 0.5};
    adam_update(opt, params, {0.0, 1.0, 0.0}, 0.05);
    CHECK(params[0] == 1.0);
    CHECK(params[2] == 0.5);
    // Constant unit gradient: first step is lr * 1 / (1 + eps).
    CHECK(params[1] == doctest::Approx(-2.05).epsilon(1e-6));
}

TEST_CASE("adam rejects mismatched shapes") {
    OptimizerState opt = OptimizerState::zeros(2);
    std::vector<double> params = {1.0, 2.0};
    CHECK_THROWS_AS(adam_update(opt, params, {1.0}, 0.1), ShapeError);
    std::vector<double> three = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(adam_update(opt, three, {1.0, 2.0, 3.0}, 0.1), ShapeError);
}

// ---------------------------------------------------------------------------
// fd_gradient_oracle

TEST_CASE("finite-difference oracle recovers an analytic gradient") {
    const auto loss = [](const std::vector<double>& p) {
        return p[0] * p[0] + 3.0 * p[0] * p[1] + std::sin(p[2]);
    };
    const std::vector<double> at = {0.7, -1.2, 0.4};
    const std::vector<double> grad = fd_gradient_oracle(loss, at);
    CHECK(grad[0] == doctest::Approx(2.0 * 0.7 + 3.0 * -1.2).epsilon(1e-8));
    CHECK(grad[1] == doctest::Approx(3.0 * 0.7).epsilon(1e-8));
    CHECK(grad[2] == doctest::Approx(std::cos(0.4)).epsilon(1e-8));
}

// ---------------------------------------------------------------------------
// preprocess / encode_for_model

TEST_CASE("preprocess_classification applies the fitted preprocessor per image") {
    ImageDataset dataset;
    dataset.rows = 28;
    dataset.cols = 28;
    dataset.labels = {3, 8};
    dataset.pixels.assign(2 * 28 * 28, 0.0);
    for (int i = 0; i < 28 * 28; ++i) dataset.pixels[static_cast<std::size_t>(i)] = (i % 7) / 7.0;
    for (int i = 0; i < 28 * 28; ++i)
        dataset.pixels[static_cast<std::size_t>(28 * 28 + i)] = (i % 5) / 5.0;

    const FourierPreprocessor prep = FourierPreprocessor::fit(dataset, PreprocessConfig{});
    const ClassificationData data = preprocess_classification(dataset, prep);
    REQUIRE(data.size() == 2);
    CHECK(data.labels[0] == 3);
    CHECK(data.labels[1] == 8);
    for (std::size_t i = 0; i < 2; ++i) {
        const ComplexGrid direct = prep.apply(dataset, i);
        REQUIRE(data.crops[i].values.size() == direct.values.size());
        for (std::size_t k = 0; k < direct.values.size(); ++k)
            CHECK(std::abs(data.crops[i].values[k] - direct.values[k]) == 0.0);
    }
}

TEST_CASE("encode_for_model matches the backend-specific encoders") {
    const ComplexGrid crop = crop3({cdouble(1, 0), cdouble(0, 1), cdouble(2, 0), cdouble(0, 0),
                                    cdouble(0.5, 0.5), cdouble(0, 0), cdouble(0, 0), cdouble(1, 1),
                                    cdouble(0, 0)});
    const Model mzi = identity_model(12);
    const OpticalState got = encode_for_model(mzi, crop);
    const OpticalState want = encode_classification_input(crop, 12);
    REQUIRE(got.port_count() == want.port_count());
    for (int p = 0; p < 12; ++p) CHECK(std::abs(got[p] - want[p]) == 0.0);

    Model dpu = identity_model(400);
    dpu.config.backend = Backend::dpu;
    ComplexGrid crop4(4, 4);
    for (int i = 0; i < 16; ++i) crop4.values[static_cast<std::size_t>(i)] = cdouble(i, -i);
    const OpticalState dpu_state = encode_for_model(dpu, crop4);
    const cvec direct = dpu_input_pipeline(crop4);
    REQUIRE(dpu_state.port_count() == 400);
    for (int p = 0; p < 400; ++p)
        CHECK(std::abs(dpu_state[p] - direct[static_cast<std::size_t>(p)]) == 0.0);

    Model bad = identity_model(72);
    bad.config.backend = Backend::dpu;
    CHECK_THROWS_AS(encode_for_model(bad, crop4), ConfigError);
}

// ---------------------------------------------------------------------------
// evaluate

TEST_CASE("evaluate argmax, confusion and energy rows through an identity model") {
    // With 12 ports, a 3x3 crop lands on ports 1..9 and the centered readout
    // covers ports 1..10, so class q reads crop cell q (class 9 reads zero).
    const Model model = identity_model(12);
    const ReadoutSpec spec = ReadoutSpec::centered(12);

    ClassificationData data;
    // Correct sample: dominant cell 4, label 4.
    std::array<cdouble, 9> a{};
    a[4] = cdouble(0.0, 2.0);
    a[1] = cdouble(0.5, 0.0);
    data.crops.push_back(crop3(a));
    data.labels.push_back(4);
    // Misclassified sample: dominant cell 7, label 2.
    std::array<cdouble, 9> b{};
    b[7] = cdouble(1.5, 0.0);
    b[2] = cdouble(0.5, 0.5);
    data.crops.push_back(crop3(b));
    data.labels.push_back(2);
    // Tie sample: all nine cells share |v|^2 = 1; argmax resolves to the
    // lowest class index.
    std::array<cdouble, 9> c{};
    c.fill(cdouble(0.6, 0.8));
    data.crops.push_back(crop3(c));
    data.labels.push_back(3);

    const Metrics metrics = evaluate(model, data, spec);
    CHECK(metrics.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(metrics.confusion[4][4] == 1);
    CHECK(metrics.confusion[2][7] == 1);
    CHECK(metrics.confusion[3][0] == 1);

    long total = 0;
    for (const auto& row : metrics.confusion)
        for (long v : row) total += v;
    CHECK(total == 3);

    // Rows with samples are normalized energy fractions.
    for (int label : {4, 2, 3}) {
        double row_sum = 0.0;
        for (double v : metrics.energy_distribution[static_cast<std::size_t>(label)]) row_sum += v;
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Label-4 sample: intensities 4.0 at class 4 and 0.25 at class 0.
    CHECK(metrics.energy_distribution[4][4] == doctest::Approx(4.0 / 4.25).epsilon(1e-12));
    CHECK(metrics.energy_distribution[4][0] == doctest::Approx(0.25 / 4.25).epsilon(1e-12));
    // Empty rows stay zero.
    for (double v : metrics.energy_distribution[0]) CHECK(v == 0.0);
}

TEST_CASE("evaluate is invariant to a global input scale") {
    const Model model = identity_model(12);
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    SplitMix64 rng(11);
    ClassificationData data, scaled;
    for (int s = 0; s < 8; ++s) {
        std::array<cdouble, 9> values{};
        for (auto& v : values) v = cdouble(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        data.crops.push_back(crop3(values));
        for (auto& v : values) v *= 2.0;
        scaled.crops.push_back(crop3(values));
        const int label = static_cast<int>(rng.next() % 10);
        data.labels.push_back(label);
        scaled.labels.push_back(label);
    }
    const Metrics base = evaluate(model, data, spec);
    const Metrics big = evaluate(model, scaled, spec);
    CHECK(base.accuracy == big.accuracy);
    for (int i = 0; i < 10; ++i)
        for (int q = 0; q < 10; ++q) {
            CHECK(base.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)] ==
                  big.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)]);
            CHECK(base.energy_distribution[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)] ==
                  doctest::Approx(
                      big.energy_distribution[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)])
                      .epsilon(1e-12));
        }
}

// ---------------------------------------------------------------------------
// train_classification

TEST_CASE("classification training reduces the loss on a separable toy set") {
    const ClassificationData train = toy_classification(10, 5);
    const ClassificationData test = toy_classification(4, 17);
    Model model = small_classifier(ModelMode::resnet, 3);
    TrainConfig config;
    config.learning_rate = 0.02;
    config.batch_size = 10;
    config.epochs = 6;
    config.seed = 1;
    std::ostringstream progress;
    const Metrics metrics =
        train_classification(config, train, test, model, ReadoutSpec::centered(12), &progress);

    REQUIRE(metrics.train_loss.size() == 6);
    CHECK(metrics.train_loss.back() < metrics.train_loss.front());
    CHECK(metrics.train_acc.back() >= 0.9);
    CHECK(metrics.accuracy >= 0.75);
    CHECK(metrics.accuracy == metrics.test_acc.back());

    // One progress line per epoch, in the documented format.
    std::istringstream lines(progress.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        ++count;
        CHECK(line.rfind("epoch ", 0) == 0);
        CHECK(line.find("train_loss") != std::string::npos);
    }
    CHECK(count == 6);
}

TEST_CASE("classification training works through the ode solver as well") {
    const ClassificationData train = toy_classification(6, 5);
    Model model = small_classifier(ModelMode::onode, 3);
    TrainConfig config;
    config.learning_rate = 0.02;
    config.batch_size = 6;
    config.epochs = 4;
    const Metrics metrics =
        train_classification(config, train, train, model, ReadoutSpec::centered(12), nullptr);
    CHECK(metrics.train_loss.back() < metrics.train_loss.front());
}

TEST_CASE("classification training is deterministic for a fixed seed") {
    const ClassificationData train = toy_classification(5, 9);
    TrainConfig config;
    config.learning_rate = 0.01;
    config.batch_size = 5;
    config.epochs = 2;
    config.seed = 4;

    Model a = small_classifier(ModelMode::resnet, 8);
    Model b = small_classifier(ModelMode::resnet, 8);
    const Metrics ma = train_classification(config, train, train, a, ReadoutSpec::centered(12));
    const Metrics mb = train_classification(config, train, train, b, ReadoutSpec::centered(12));
    std::vector<double> pa, pb;
    a.get_params(pa);
    b.get_params(pb);
    CHECK(params_max_abs_diff(pa, pb) == 0.0);
    CHECK(ma.train_loss == mb.train_loss);
    CHECK(ma.test_acc == mb.test_acc);

    // A different shuffle seed visits batches in a different order.
    Model c = small_classifier(ModelMode::resnet, 8);
    config.seed = 5;
    const Metrics mc = train_classification(config, train, train, c, ReadoutSpec::centered(12));
    CHECK(ma.train_loss != mc.train_loss);
}

TEST_CASE("frozen activation parameters do not move during training") {
    const ClassificationData train = toy_classification(5, 21);
    Model model = small_classifier(ModelMode::resnet, 6);
    REQUIRE_FALSE(model.config.train_activation);

    const auto activation_params = [&model]() {
        std::vector<double> out;
        for (const auto& [name, block] : model.named_blocks())
            if (block->kind() == "eo_activation") {
                std::vector<double> p(3);
                block->get_params(p.data());
                out.insert(out.end(), p.begin(), p.end());
            }
        return out;
    };
    const std::vector<double> before = activation_params();
    REQUIRE(before.size() == 3);

    TrainConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 5;
    config.epochs = 2;
    train_classification(config, train, train, model, ReadoutSpec::centered(12));
    const std::vector<double> after = activation_params();
    CHECK(params_max_abs_diff(before, after) == 0.0);
}

TEST_CASE("train config validation rejects degenerate settings") {
    const ClassificationData train = toy_classification(2, 1);
    Model model = small_classifier(ModelMode::resnet, 2);
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    TrainConfig config;

    config.learning_rate = 0.0;
    CHECK_THROWS_AS(train_classification(config, train, train, model, spec), ConfigError);
    config.learning_rate = 0.01;
    config.batch_size = 0;
    CHECK_THROWS_AS(train_classification(config, train, train, model, spec), ConfigError);
    config.batch_size = 100;
    config.epochs = 0;
    CHECK_THROWS_AS(train_classification(config, train, train, model, spec), ConfigError);
    config.epochs = 1;
    const ClassificationData empty;
    CHECK_THROWS_AS(train_classification(config, empty, train, model, spec), ConfigError);
}

// ---------------------------------------------------------------------------
// trajectory training

TEST_CASE("predict_trajectory with zero dynamics holds the launch point") {
    const TrajectoryTask task = TrajectoryTask::standard();
    Model model;
    model.config.mode = ModelMode::onode;
    model.config.port_count = 9;
    model.dynamics.chain.push_back(std::make_unique<ScaleBlock>(cdouble(0.0, 0.0), 9));

    const auto preds = predict_trajectory(model, task);
    REQUIRE(preds.size() == task.times.size());
    for (const auto& p : preds) {
        CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.3).epsilon(1e-12));
    }

    // The stationary-prediction loss against the spiral is a direct average
    // of squared distances from the launch point.
    double sum = 0.0;
    for (const auto& t : task.targets) {
        const double dx = 0.6 - t[0];
        const double dy = 0.3 - t[1];
        sum += dx * dx + dy * dy;
    }
    const double expected = 0.5 * sum / static_cast<double>(task.targets.size());
    CHECK(trajectory_mse(preds, task.targets).loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("predict_trajectory requires an ode-mode model") {
    const TrajectoryTask task = TrajectoryTask::standard();
    Model model = small_classifier(ModelMode::resnet, 2);
    CHECK_THROWS_AS(predict_trajectory(model, task), ConfigError);
    CHECK_THROWS_AS(train_trajectory(TrainConfig{}, task, model), ConfigError);
}

TEST_CASE("trajectory training drives the mse down on a short horizon") {
    // Four sample points of the standard spiral keep each epoch cheap.
    TrajectoryTask task = TrajectoryTask::standard();
    task.times = {0.5, 1.5, 2.5, 3.5};
    task.targets = spiral_reference(task.x0, task.times);

    ModelConfig config;
    config.mode = ModelMode::onode;
    config.port_count = 9;
    config.layers = 2;
    config.train_activation = true;
    config.activation.alpha = 0.05;
    config.activation.phase_bias = 0.0;
    SplitMix64 rng(1);
    Model model = make_model(config, rng);

    TrainConfig train;
    train.learning_rate = 3e-3;
    train.epochs = 400;
    std::ostringstream progress;
    const TrajectoryHistory history = train_trajectory(train, task, model, &progress);
    REQUIRE(history.mse.size() == 400);
    CHECK(history.final_mse < 0.1 * history.mse.front());
    CHECK(history.final_mse < 2e-3);
    CHECK(history.predictions.size() == task.times.size());
    CHECK(progress.str().rfind("epoch 1/400") == 0);
}

TEST_CASE("trajectory training is deterministic and validates its inputs") {
    TrajectoryTask task = TrajectoryTask::standard();
    task.times = {1.0, 2.0};
    task.targets = spiral_reference(task.x0, task.times);

    ModelConfig config;
    config.mode = ModelMode::onode;
    config.port_count = 9;
    config.layers = 1;
    TrainConfig train;
    train.learning_rate = 1e-3;
    train.epochs = 5;

    SplitMix64 rng_a(7), rng_b(7);
    Model a = make_model(config, rng_a);
    Model b = make_model(config, rng_b);
    const TrajectoryHistory ha = train_trajectory(train, task, a);
    const TrajectoryHistory hb = train_trajectory(train, task, b);
    CHECK(ha.mse == hb.mse);
    CHECK(ha.final_mse == hb.final_mse);

    TrajectoryTask broken = task;
    broken.targets.pop_back();
    Model c = make_model(config, rng_a);
    CHECK_THROWS_AS(train_trajectory(train, broken, c), ShapeError);
}

// ---------------------------------------------------------------------------
// end-to-end gradient spot check against the oracle

TEST_CASE("training gradient of one sample agrees with the fd oracle") {
    const ClassificationData data = toy_classification(1, 2);
    const ReadoutSpec spec = ReadoutSpec::centered(12);
    Model model = small_classifier(ModelMode::onode, 13);

    std::vector<double> params;
    model.get_params(params);
    const OpticalState input = encode_for_model(model, data.crops[0]);

    const Model::ForwardRecord fwd = model.forward_for_training(input);
    const LossResult loss = intensity_cross_entropy(fwd.output, spec, data.labels[0]);
    const GradientResult grad = model.backward_from(fwd, input, loss.state_cotangent);

    const auto loss_at = [&](const std::vector<double>& p) {
        Model probe = model;
        probe.set_params(p);
        const OpticalState out = probe.forward(input);
        return intensity_cross_entropy(out, spec, data.labels[0]).loss;
    };
    const std::vector<double> fd = fd_gradient_oracle(loss_at, params, 1e-5);
    REQUIRE(fd.size() == grad.param_gradient.size());
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(grad.param_gradient[i] == doctest::Approx(fd[i]).epsilon(1e-5).scale(1.0));
}

// ---------------------------------------------------------------------------
// checkpoints

TEST_CASE("checkpoint save/load round-trips bitwise") {
    SplitMix64 rng(42);
    Model model = small_classifier(ModelMode::resnet, 42);
    Checkpoint ck = make_checkpoint(model, R"({"task":"toy","seed":42})", 42, 7);
    ck.has_optimizer = true;
    ck.optimizer = OptimizerState::zeros(static_cast<std::size_t>(model.param_count()));
    ck.optimizer.step = 11;
    for (std::size_t i = 0; i < ck.optimizer.m.size(); ++i) {
        ck.optimizer.m[i] = rng.uniform() - 0.5;
        ck.optimizer.v[i] = rng.uniform();
    }

    const fs::path path = scratch_dir() / "roundtrip.json";
    save_checkpoint(path.string(), ck);
    const Checkpoint back = load_checkpoint(path.string());

    CHECK(back.version == 1);
    CHECK(back.seed == 42);
    CHECK(back.epoch == 7);
    REQUIRE(back.segments.size() == ck.segments.size());
    for (std::size_t s = 0; s < ck.segments.size(); ++s) {
        CHECK(back.segments[s].name == ck.segments[s].name);
        CHECK(back.segments[s].shape == ck.segments[s].shape);
        REQUIRE(back.segments[s].values.size() == ck.segments[s].values.size());
        CHECK(params_max_abs_diff(back.segments[s].values, ck.segments[s].values) == 0.0);
    }
    REQUIRE(back.has_optimizer);
    CHECK(back.optimizer.step == 11);
    CHECK(params_max_abs_diff(back.optimizer.m, ck.optimizer.m) == 0.0);
    CHECK(params_max_abs_diff(back.optimizer.v, ck.optimizer.v) == 0.0);

    // Applying the checkpoint restores the exact parameter vector.
    std::vector<double> original;
    model.get_params(original);
    Model other = small_classifier(ModelMode::resnet, 99);
    apply_checkpoint(back, other);
    std::vector<double> restored;
    other.get_params(restored);
    CHECK(params_max_abs_diff(original, restored) == 0.0);
}

TEST_CASE("checkpoint segment names and shapes are validated on apply") {
    Model model = small_classifier(ModelMode::resnet, 1);
    Checkpoint ck = make_checkpoint(model, "{}", 1, 0);

    Checkpoint renamed = ck;
    renamed.segments[0].name = "layer0/0/other";
    CHECK_THROWS_WITH_AS(apply_checkpoint(renamed, model),
                         doctest::Contains("layer0/0/other"), ShapeError);

    Checkpoint resized = ck;
    resized.segments[0].values.pop_back();
    resized.segments[0].shape = {static_cast<int>(resized.segments[0].values.size())};
    CHECK_THROWS_AS(apply_checkpoint(resized, model), ShapeError);

    Checkpoint fewer = ck;
    fewer.segments.pop_back();
    CHECK_THROWS_AS(apply_checkpoint(fewer, model), ShapeError);
}

TEST_CASE("checkpoint loader rejects malformed files") {
    const fs::path dir = scratch_dir();

    const fs::path not_json = dir / "corrupt.json";
    std::ofstream(not_json) << "{ definitely not json";
    CHECK_THROWS_AS(load_checkpoint(not_json.string()), ParseError);

    const fs::path missing_field = dir / "missing.json";
    std::ofstream(missing_field) << R"({"version":1,"config":{},"segments":[],"epoch":0})";
    CHECK_THROWS_AS(load_checkpoint(missing_field.string()), ParseError);

    const fs::path bad_version = dir / "version.json";
    std::ofstream(bad_version)
        << R"({"version":2,"config":{},"segments":[],"seed":0,"epoch":0})";
    CHECK_THROWS_AS(load_checkpoint(bad_version.string()), ConfigError);

    const fs::path bad_shape = dir / "shape.json";
    std::ofstream(bad_shape)
        << R"({"version":1,"config":{},"segments":[{"name":"a","shape":[3],"values":[1.0,2.0]}],"seed":0,"epoch":0})";
    CHECK_THROWS_AS(load_checkpoint(bad_shape.string()), ShapeError);

    CHECK_THROWS_AS(load_checkpoint((dir / "does_not_exist.json").string()), IoError);
}

// ---------------------------------------------------------------------------
// CSV export

TEST_CASE("metrics csv files carry stable headers and one row per entry") {
    Metrics metrics;
    metrics.train_loss = {2.5, 1.25};
    metrics.train_acc = {0.25, 0.75};
    metrics.test_acc = {0.3, 0.8};
    metrics.confusion[0][0] = 5;
    metrics.confusion[3][7] = 2;
    for (int q = 0; q < 10; ++q) metrics.energy_distribution[1][static_cast<std::size_t>(q)] = 0.1;

    const fs::path dir = scratch_dir();
    write_metrics_csv((dir / "metrics.csv").string(), metrics);
    write_confusion_csv((dir / "confusion.csv").string(), metrics);
    write_energy_csv((dir / "energy.csv").string(), metrics);

    const auto read_lines = [](const fs::path& p) {
        std::ifstream in(p);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        return lines;
    };

    const auto metrics_lines = read_lines(dir / "metrics.csv");
    REQUIRE(metrics_lines.size() == 3);
    CHECK(metrics_lines[0] == "epoch,train_loss,train_acc,test_acc");
    CHECK(metrics_lines[1] == "1,2.5,0.25,0.3");
    CHECK(metrics_lines[2] == "2,1.25,0.75,0.8");

    const auto confusion_lines = read_lines(dir / "confusion.csv");
    REQUIRE(confusion_lines.size() == 11);
    CHECK(confusion_lines[0].rfind("pred_0,pred_1", 0) == 0);
    CHECK(confusion_lines[1].rfind("5,0,", 0) == 0);

    const auto energy_lines = read_lines(dir / "energy.csv");
    REQUIRE(energy_lines.size() == 11);
    CHECK(energy_lines[0].rfind("port_0,port_1", 0) == 0);
    CHECK(energy_lines[2].rfind("0.1,0.1,", 0) == 0);
}
