#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "onode/field.hpp"

namespace onode {

struct ImageDataset {
    int rows = 0;
    int cols = 0;
    // Item-major pixel values in [0, 1] (rows*cols per image).
    std::vector<double> pixels;
    std::vector<int> labels;
    std::string split; // "train" | "test"

    std::size_t size() const { return labels.size(); }
    const double* image(std::size_t index) const {
        return pixels.data() + index * static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
};

// Parses the IDX pair (big-endian; image magic 0x00000803, label magic
// 0x00000801).  Pixel bytes are scaled by 1/255.
ImageDataset load_mnist(const std::string& images_path, const std::string& labels_path,
                        std::string split = "");

// 2D DFT of a 28x28 image, zero frequency shifted to the grid center, central
// k x k window (start floor((28-k)/2)).  No scaling: see FourierPreprocessor.
ComplexGrid fourier_crop(const std::vector<double>& image, int k);

struct PreprocessConfig {
    int crop_size = 6;
    bool magnitude_only = false;
};

// Applies fourier_crop with a dataset-level scale frozen from the training
// split so that the train-mean total crop energy is 1.
struct FourierPreprocessor {
    PreprocessConfig config;
    double scale = 1.0;

    static FourierPreprocessor fit(const ImageDataset& train, const PreprocessConfig& config);
    ComplexGrid apply(const std::vector<double>& image) const;
    ComplexGrid apply(const ImageDataset& dataset, std::size_t index) const;
};

// 4x4 crop -> flatten row-major (16) -> center-pad with zeros to 50 (17 each
// side) -> nearest-neighbor upsample x8 -> 400 samples.
cvec dpu_input_pipeline(const ComplexGrid& crop);

// Deterministic shuffle (SplitMix64 stream) then consecutive batches; the
// final short batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t item_count, std::size_t batch_size,
                                                   std::uint64_t seed);

// Closed-form Eq. 4 solution x(t) = e^{-0.1 t} R(t) x0.
std::vector<std::array<double, 2>> spiral_reference(const std::array<double, 2>& x0,
                                                    const std::vector<double>& times);

struct TrajectoryTask {
    std::array<std::array<double, 2>, 2> dynamics_matrix{{{-0.1, -1.0}, {1.0, -0.1}}};
    std::array<double, 2> x0{0.6, 0.3};
    std::vector<double> times;
    std::vector<std::array<double, 2>> targets;

    // 200 uniform samples over one revolution, t in [0, 2*pi].
    static TrajectoryTask standard();
};

} // namespace onode
