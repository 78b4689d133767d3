#include "onode/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <utility>

#include "onode/dft.hpp"
#include "onode/errors.hpp"
#include "onode/rng.hpp"

namespace onode {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path);
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const char* field,
                   const std::string& path) {
    if (off + 4 > b.size())
        throw ParseError(path + ": truncated before " + field);
    return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

} // namespace

ImageDataset load_mnist(const std::string& images_path, const std::string& labels_path,
                        std::string split) {
    const std::vector<unsigned char> img = read_file(images_path);
    const std::vector<unsigned char> lab = read_file(labels_path);

    const std::uint32_t img_magic = be32(img, 0, "image magic", images_path);
    if (img_magic != 0x00000803u)
        throw ParseError(images_path + ": image magic is " + hex32(img_magic) +
                         ", expected 0x00000803");
    const std::uint32_t lab_magic = be32(lab, 0, "label magic", labels_path);
    if (lab_magic != 0x00000801u)
        throw ParseError(labels_path + ": label magic is " + hex32(lab_magic) +
                         ", expected 0x00000801");

    const std::uint32_t img_count = be32(img, 4, "image count", images_path);
    const std::uint32_t rows = be32(img, 8, "row count", images_path);
    const std::uint32_t cols = be32(img, 12, "column count", images_path);
    const std::uint32_t lab_count = be32(lab, 4, "label count", labels_path);
    if (img_count != lab_count)
        throw ParseError("item count mismatch: " + images_path + " has " +
                         std::to_string(img_count) + " images, " + labels_path + " has " +
                         std::to_string(lab_count) + " labels");

    const std::size_t pixel_bytes =
        static_cast<std::size_t>(img_count) * rows * cols;
    if (img.size() != 16 + pixel_bytes)
        throw ParseError(images_path + ": truncated pixel data (" +
                         std::to_string(img.size() - 16) + " of " + std::to_string(pixel_bytes) +
                         " bytes)");
    if (lab.size() != 8 + static_cast<std::size_t>(lab_count))
        throw ParseError(labels_path + ": truncated label data (" + std::to_string(lab.size() - 8) +
                         " of " + std::to_string(lab_count) + " bytes)");

    ImageDataset out;
    out.rows = static_cast<int>(rows);
    out.cols = static_cast<int>(cols);
    out.split = std::move(split);
    out.pixels.resize(pixel_bytes);
    for (std::size_t i = 0; i < pixel_bytes; ++i)
        out.pixels[i] = static_cast<double>(img[16 + i]) / 255.0;
    out.labels.resize(lab_count);
    for (std::size_t i = 0; i < lab_count; ++i) out.labels[i] = static_cast<int>(lab[8 + i]);
    return out;
}

ComplexGrid fourier_crop(const std::vector<double>& image, int k) {
    if (image.size() != 28 * 28)
        throw ShapeError("fourier_crop: expected a 28x28 image, got " +
                         std::to_string(image.size()) + " pixels");
    if (k < 1 || k > 28) throw ConfigError("fourier_crop: k must lie in [1, 28]");

    cvec freq;
    dft2_forward(image, 28, 28, freq);

    // Zero frequency to the grid center, then the central k x k window.
    const int start = (28 - k) / 2;
    ComplexGrid crop;
    crop.rows = k;
    crop.cols = k;
    crop.values.resize(static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r) {
        // Shifted row index -> unshifted DFT index (shift moves bin 0 to 14).
        const int sr = (start + r + 14) % 28;
        for (int c = 0; c < k; ++c) {
            const int sc = (start + c + 14) % 28;
            crop.values[static_cast<std::size_t>(r) * k + c] =
                freq[static_cast<std::size_t>(sr) * 28 + sc];
        }
    }
    return crop;
}

FourierPreprocessor FourierPreprocessor::fit(const ImageDataset& train,
                                             const PreprocessConfig& config) {
    if (train.size() == 0) throw ConfigError("FourierPreprocessor::fit: empty training split");
    FourierPreprocessor pre;
    pre.config = config;
    std::vector<double> image(28 * 28);
    double energy_sum = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double* px = train.image(i);
        image.assign(px, px + 28 * 28);
        const ComplexGrid crop = fourier_crop(image, config.crop_size);
        double e = 0.0;
        for (const cdouble& v : crop.values) e += std::norm(v);
        energy_sum += e;
    }
    const double mean = energy_sum / static_cast<double>(train.size());
    if (!(mean > 0.0))
        throw NumericError("FourierPreprocessor::fit: training split has zero crop energy");
    pre.scale = 1.0 / std::sqrt(mean);
    return pre;
}

ComplexGrid FourierPreprocessor::apply(const std::vector<double>& image) const {
    ComplexGrid crop = fourier_crop(image, config.crop_size);
    for (cdouble& v : crop.values) {
        v *= scale;
        if (config.magnitude_only) v = cdouble(std::abs(v), 0.0);
    }
    return crop;
}

ComplexGrid FourierPreprocessor::apply(const ImageDataset& dataset, std::size_t index) const {
    const double* px = dataset.image(index);
    return apply(std::vector<double>(px, px + 28 * 28));
}

cvec dpu_input_pipeline(const ComplexGrid& crop) {
    if (crop.rows != 4 || crop.cols != 4)
        throw ShapeError("dpu_input_pipeline: expected a 4x4 crop, got " +
                          std::to_string(crop.rows) + "x" + std::to_string(crop.cols));
    cvec mid(50, cdouble(0.0, 0.0));
    for (int i = 0; i < 16; ++i) mid[static_cast<std::size_t>(17 + i)] = crop.values[static_cast<std::size_t>(i)];
    cvec out(400);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mid[i / 8];
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t item_count, std::size_t batch_size,
                                                   std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(item_count);
    for (std::size_t i = 0; i < item_count; ++i) order[i] = i;
    SplitMix64 rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    batches.reserve((item_count + batch_size - 1) / batch_size);
    for (std::size_t at = 0; at < item_count; at += batch_size) {
        const std::size_t end = std::min(item_count, at + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

std::vector<std::array<double, 2>> spiral_reference(const std::array<double, 2>& x0,
                                                    const std::vector<double>& times) {
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw ConfigError("spiral_reference: times must be ascending");
    std::vector<std::array<double, 2>> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double decay = std::exp(-0.1 * t);
        const double c = std::cos(t);
        const double s = std::sin(t);
        out[i] = {decay * (c * x0[0] - s * x0[1]), decay * (s * x0[0] + c * x0[1])};
    }
    return out;
}

TrajectoryTask TrajectoryTask::standard() {
    TrajectoryTask task;
    task.times.resize(200);
    // One full revolution of the Eq. 4 spiral.  The sampling window also
    // bounds how far unstable modes of a partially trained flow can grow
    // during the forward solve, so it is kept to a single period.
    const double horizon = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < task.times.size(); ++i)
        task.times[i] = horizon * static_cast<double>(i) / 199.0;
    task.targets = spiral_reference(task.x0, task.times);
    return task;
}

} // namespace onode
