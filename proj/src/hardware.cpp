#include "onode/hardware.hpp"

#include <iomanip>

#include "jsonio.hpp"
#include "onode/errors.hpp"

namespace onode {

HardwareReport hardware_report(const ModelConfig& config, int resnet_baseline_layers) {
    config.validate();
    if (resnet_baseline_layers < 1)
        throw ConfigError("hardware_report: resnet baseline layer count must be >= 1");

    HardwareReport r;
    r.backend = config.backend;
    r.port_count = config.port_count;
    r.weight_layers = config.layers;
    r.replicas = config.mode == ModelMode::resnet ? config.layers : 1;
    r.resnet_baseline_layers = resnet_baseline_layers;

    const long n = config.port_count;
    if (config.backend == Backend::mzi) {
        r.mzi_per_mesh = n * (n - 1) / 2;
        r.unit_area_um2 = r.constants.mzi_width_um * r.constants.mzi_length_um;
        r.layer_area_um2 = static_cast<double>(r.mzi_per_mesh) * r.unit_area_um2;
        r.step_time_ps = r.constants.step_time_mzi_ps;
    } else {
        r.metalines_per_layer = config.dpu_metalines;
        r.metaline_length_um = static_cast<double>(n) * config.propagation.pitch * 1e6;
        r.unit_area_um2 = r.constants.metaline_width_um * r.metaline_length_um;
        r.layer_area_um2 = static_cast<double>(r.metalines_per_layer) * r.unit_area_um2;
        r.step_time_ps = r.constants.step_time_dpu_ps;
    }
    r.total_area_um2 = static_cast<double>(r.weight_layers) * r.layer_area_um2;
    // Same-width comparison: this architecture's weight layers vs an L-layer
    // ResNet holding L physical copies.
    r.area_ratio_vs_resnet = static_cast<double>(r.weight_layers) /
                             static_cast<double>(resnet_baseline_layers);
    return r;
}

std::string hardware_report_json(const HardwareReport& r) {
    nlohmann::json j;
    j["constants"]["mzi_footprint_um"] = {r.constants.mzi_width_um, r.constants.mzi_length_um};
    j["constants"]["metaline_width_um"] = r.constants.metaline_width_um;
    j["constants"]["feedback_waveguide_um"] = {r.constants.feedback_waveguide_height_um,
                                               r.constants.feedback_waveguide_width_um};
    j["constants"]["ring_radius_um"] = r.constants.ring_radius_um;
    j["constants"]["delay_line_pitch_um"] = r.constants.delay_line_pitch_um;
    j["constants"]["step_time_dpu_ps_upper_bound"] = r.constants.step_time_dpu_ps;
    j["constants"]["step_time_mzi_ps"] = r.constants.step_time_mzi_ps;
    j["backend"] = r.backend == Backend::mzi ? "mzi" : "dpu";
    j["port_count"] = r.port_count;
    j["weight_layers"] = r.weight_layers;
    j["replicas"] = r.replicas;
    if (r.backend == Backend::mzi) {
        j["mzi_per_mesh"] = r.mzi_per_mesh;
    } else {
        j["metalines_per_layer"] = r.metalines_per_layer;
        j["metaline_length_um"] = r.metaline_length_um;
    }
    j["unit_area_um2"] = r.unit_area_um2;
    j["layer_area_um2"] = r.layer_area_um2;
    j["total_area_um2"] = r.total_area_um2;
    j["step_time_ps"] = r.step_time_ps;
    j["resnet_baseline_layers"] = r.resnet_baseline_layers;
    j["area_ratio_vs_resnet"] = r.area_ratio_vs_resnet;
    return dump_json_17(j);
}

void print_hardware_report(const HardwareReport& r, std::ostream& out) {
    out << "backend: " << (r.backend == Backend::mzi ? "mzi" : "dpu") << ", ports " << r.port_count
        << ", weight layers " << r.weight_layers << ", replicas " << r.replicas << '\n';
    if (r.backend == Backend::mzi) {
        out << "MZI count per mesh: " << r.mzi_per_mesh << " (footprint "
            << r.constants.mzi_width_um << " um x " << r.constants.mzi_length_um << " um)\n";
    } else {
        out << "metalines per layer: " << r.metalines_per_layer << " (width "
            << r.constants.metaline_width_um << " um, length " << r.metaline_length_um << " um)\n";
    }
    out << std::setprecision(10) << "layer area: " << r.layer_area_um2
        << " um^2, total area: " << r.total_area_um2 << " um^2\n"
        << "per-step latency: " << r.step_time_ps << " ps\n"
        << "area ratio vs " << r.resnet_baseline_layers
        << "-layer ResNet of equal width: " << r.area_ratio_vs_resnet << '\n';
}

} // namespace onode
