#include "onode/field.hpp"

#include <cmath>
#include <string>

#include "onode/errors.hpp"

namespace onode {

bool all_finite(const cvec& v) {
    for (const cdouble& a : v) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) return false;
    }
    return true;
}

double vec_energy(const cvec& v) {
    double e = 0.0;
    for (const cdouble& a : v) e += a.real() * a.real() + a.imag() * a.imag();
    return e;
}

OpticalState::OpticalState(cvec amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.empty()) throw ShapeError("OpticalState: port count must be positive");
    if (!all_finite(amps_)) throw NumericError("OpticalState: non-finite amplitude");
}

OpticalState OpticalState::zeros(int port_count) {
    if (port_count <= 0) throw ShapeError("OpticalState: port count must be positive");
    return OpticalState(cvec(static_cast<std::size_t>(port_count)));
}

ReadoutSpec::ReadoutSpec(const std::array<int, 10>& class_ports, int port_count)
    : ports_(class_ports), port_count_(port_count) {
    for (std::size_t i = 0; i < ports_.size(); ++i) {
        int p = ports_[i];
        if (p < 0 || p >= port_count)
            throw ConfigError("ReadoutSpec: class port " + std::to_string(p) +
                              " out of range [0, " + std::to_string(port_count) + ")");
        for (std::size_t j = 0; j < i; ++j) {
            if (ports_[j] == p)
                throw ConfigError("ReadoutSpec: duplicate class port " + std::to_string(p));
        }
    }
}

ReadoutSpec ReadoutSpec::centered(int port_count) {
    if (port_count < 10)
        throw ConfigError("ReadoutSpec: need at least 10 ports, got " + std::to_string(port_count));
    int start = (port_count - 10) / 2;
    std::array<int, 10> ports{};
    for (int i = 0; i < 10; ++i) ports[static_cast<std::size_t>(i)] = start + i;
    return ReadoutSpec(ports, port_count);
}

double total_energy(const OpticalState& state) {
    return vec_energy(state.amplitudes());
}

std::array<double, 10> read_intensities(const OpticalState& state, const ReadoutSpec& spec) {
    if (spec.port_count() != state.port_count())
        throw ShapeError("read_intensities: spec is for " + std::to_string(spec.port_count()) +
                         " ports, state has " + std::to_string(state.port_count()));
    std::array<double, 10> out{};
    for (std::size_t i = 0; i < 10; ++i) {
        const cdouble& a = state[spec.class_ports()[i]];
        out[i] = a.real() * a.real() + a.imag() * a.imag();
    }
    return out;
}

OpticalState encode_classification_input(const ComplexGrid& crop, int port_count) {
    const std::size_t k2 = crop.values.size();
    if (crop.rows != crop.cols || k2 != static_cast<std::size_t>(crop.rows) * crop.cols)
        throw ShapeError("encode_classification_input: crop must be square");
    if (port_count <= 0 || k2 > static_cast<std::size_t>(port_count))
        throw ConfigError("encode_classification_input: crop size " + std::to_string(k2) +
                          " exceeds port count " + std::to_string(port_count));
    cvec amps(static_cast<std::size_t>(port_count));
    const std::size_t start = (static_cast<std::size_t>(port_count) - k2) / 2;
    for (std::size_t i = 0; i < k2; ++i) amps[start + i] = crop.values[i];
    return OpticalState(std::move(amps));
}

OpticalState encode_trajectory_input(double x, double y, int port_count) {
    if (port_count < 1) throw ShapeError("encode_trajectory_input: port count must be >= 1");
    return OpticalState(cvec(static_cast<std::size_t>(port_count), cdouble(x, y)));
}

std::pair<double, double> decode_trajectory_output(const OpticalState& state) {
    double re = 0.0, im = 0.0;
    for (const cdouble& a : state.amplitudes()) {
        re += a.real();
        im += a.imag();
    }
    const double n = static_cast<double>(state.port_count());
    return {re / n, im / n};
}

} // namespace onode
