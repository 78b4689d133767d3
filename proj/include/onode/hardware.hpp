#pragma once

#include <ostream>
#include <string>

#include "onode/model.hpp"

namespace onode {

// Read-only constants quoted from the source hardware description.
struct HardwareConstants {
    double mzi_width_um = 0.28;
    double mzi_length_um = 1.0;
    double metaline_width_um = 0.3;
    double feedback_waveguide_height_um = 0.22;
    double feedback_waveguide_width_um = 0.45;
    double ring_radius_um = 47.5;
    double delay_line_pitch_um = 48.0;
    double step_time_dpu_ps = 1.0; // upper bound: "less than 1 ps"
    double step_time_mzi_ps = 120.0;
};

struct HardwareReport {
    HardwareConstants constants;
    Backend backend = Backend::mzi;
    int port_count = 0;
    // Physical weight layers in this configuration (chain depth for the ODE
    // cell, residual blocks for the ResNet).
    int weight_layers = 0;
    // Hidden-layer replicas: 1 for the ODE cell (reused each step), L for an
    // L-layer ResNet.
    int replicas = 0;
    long mzi_per_mesh = 0;
    double unit_area_um2 = 0.0;
    double layer_area_um2 = 0.0; // one weight layer
    double total_area_um2 = 0.0; // all weight layers
    double step_time_ps = 0.0;
    // Comparison baseline: an L-layer ResNet of the same width.
    int resnet_baseline_layers = 2;
    double area_ratio_vs_resnet = 0.0;
    // dpu geometry (metaline length = samples * pitch is a derived convention).
    int metalines_per_layer = 0;
    double metaline_length_um = 0.0;
};

HardwareReport hardware_report(const ModelConfig& config, int resnet_baseline_layers);
std::string hardware_report_json(const HardwareReport& report);
void print_hardware_report(const HardwareReport& report, std::ostream& out);

} // namespace onode
