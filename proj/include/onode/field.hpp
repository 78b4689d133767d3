#pragma once

#include <array>
#include <complex>
#include <utility>
#include <vector>

namespace onode {

using cdouble = std::complex<double>;
using cvec = std::vector<cdouble>;

bool all_finite(const cvec& v);
double vec_energy(const cvec& v); // sum of |a|^2

// Complex amplitude vector over waveguide ports; the state h(t) the
// dynamics evolve. Construction rejects non-finite amplitudes, so
// downstream operations never have to re-validate.
class OpticalState {
public:
    explicit OpticalState(cvec amplitudes);
    static OpticalState zeros(int port_count);

    int port_count() const { return static_cast<int>(amps_.size()); }
    const cvec& amplitudes() const { return amps_; }
    const cdouble& operator[](int i) const { return amps_[static_cast<std::size_t>(i)]; }

private:
    cvec amps_;
};

// The ten output ports representing the ten digit classes.
class ReadoutSpec {
public:
    ReadoutSpec(const std::array<int, 10>& class_ports, int port_count);

    // Ports floor((N-10)/2) .. floor((N-10)/2)+9, mirroring the centered
    // input placement.
    static ReadoutSpec centered(int port_count);

    const std::array<int, 10>& class_ports() const { return ports_; }
    int port_count() const { return port_count_; }

private:
    std::array<int, 10> ports_;
    int port_count_;
};

// Row-major complex grid (Fourier crops).
struct ComplexGrid {
    int rows = 0;
    int cols = 0;
    cvec values; // rows*cols, row-major

    ComplexGrid() = default;
    ComplexGrid(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c) {}
    cdouble& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    const cdouble& at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

double total_energy(const OpticalState& state);
std::array<double, 10> read_intensities(const OpticalState& state, const ReadoutSpec& spec);

// Flattens a k x k crop row-major into k^2 contiguous ports starting at
// floor((port_count - k^2)/2); all other ports zero.
OpticalState encode_classification_input(const ComplexGrid& crop, int port_count);

// Duplicates the 2D point x + iy onto every port.
OpticalState encode_trajectory_input(double x, double y, int port_count);

// Mean of real parts, mean of imaginary parts.
std::pair<double, double> decode_trajectory_output(const OpticalState& state);

} // namespace onode
