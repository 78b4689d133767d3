#include "onode/blocks.hpp"

#include <cmath>
#include <string>

#include "onode/dft.hpp"
#include "onode/errors.hpp"
#include "onode/rng.hpp"

namespace onode {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}
} // namespace

// ---------------------------------------------------------------------------
// Parameter records

MZIMeshParams MZIMeshParams::rectangular(int port_count) {
    if (port_count < 1) throw ConfigError("MZIMeshParams: port count must be >= 1");
    MZIMeshParams p;
    p.port_count = port_count;
    p.units.reserve(static_cast<std::size_t>(port_count) * (port_count - 1) / 2);
    for (int col = 0; col < port_count; ++col) {
        for (int top = col % 2; top + 1 < port_count; top += 2) {
            p.units.push_back(MZIUnit{top, 0.0, 0.0});
        }
    }
    p.output_phases.assign(static_cast<std::size_t>(port_count), 0.0);
    return p;
}

void MZIMeshParams::validate() const {
    if (port_count < 1) throw ConfigError("MZIMeshParams: port count must be >= 1");
    if (output_phases.size() != static_cast<std::size_t>(port_count))
        throw ConfigError("MZIMeshParams: output_phases size mismatch");
    for (const MZIUnit& u : units) {
        if (u.top_port < 0 || u.top_port + 1 >= port_count)
            throw ConfigError("MZIMeshParams: unit couples ports (" + std::to_string(u.top_port) +
                              ", " + std::to_string(u.top_port + 1) + ") outside [0, " +
                              std::to_string(port_count) + ")");
        check_finite(u.theta, "MZI theta");
        check_finite(u.phi, "MZI phi");
    }
    for (double p : output_phases) check_finite(p, "output phase");
}

void ActivationParams::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw ConfigError("ActivationParams: alpha must lie in [0, 1)");
    check_finite(gain, "activation gain");
    check_finite(phase_bias, "activation phase bias");
}

void PropagationSpec::validate() const {
    if (!(wavelength > 0.0)) throw ConfigError("PropagationSpec: wavelength must be > 0");
    if (!(effective_index > 0.0)) throw ConfigError("PropagationSpec: effective index must be > 0");
    if (!(pitch > 0.0)) throw ConfigError("PropagationSpec: pitch must be > 0");
    if (!(layer_distance >= 0.0)) throw ConfigError("PropagationSpec: layer distance must be >= 0");
}

DiffractiveStackParams DiffractiveStackParams::zeros(int sample_count, int layer_count,
                                                     const PropagationSpec& prop) {
    DiffractiveStackParams p;
    p.sample_count = sample_count;
    p.layer_count = layer_count;
    p.phases.assign(static_cast<std::size_t>(layer_count),
                    std::vector<double>(static_cast<std::size_t>(sample_count), 0.0));
    p.propagation = prop;
    p.validate();
    return p;
}

void DiffractiveStackParams::validate() const {
    if (sample_count < 1) throw ConfigError("DiffractiveStackParams: sample count must be >= 1");
    if (layer_count < 1) throw ConfigError("DiffractiveStackParams: layer count must be >= 1");
    if (phases.size() != static_cast<std::size_t>(layer_count))
        throw ConfigError("DiffractiveStackParams: expected one phase vector per layer");
    for (const auto& layer : phases) {
        if (layer.size() != static_cast<std::size_t>(sample_count))
            throw ConfigError("DiffractiveStackParams: phase vector size mismatch");
        for (double v : layer) check_finite(v, "metaline phase");
    }
    propagation.validate();
}

Mat2 mzi_transfer(double theta, double phi) {
    const double s = std::sin(theta / 2.0);
    const double c = std::cos(theta / 2.0);
    const cdouble lead = cdouble(0.0, 1.0) * std::exp(cdouble(0.0, theta / 2.0));
    const cdouble eip = std::exp(cdouble(0.0, phi));
    return Mat2{lead * eip * s, lead * c, lead * eip * c, -lead * s};
}

// ---------------------------------------------------------------------------
// MZI mesh block

MZIMeshBlock::MZIMeshBlock(MZIMeshParams params) : params_(std::move(params)) {
    params_.validate();
    rebuild_cache();
}

void MZIMeshBlock::rebuild_cache() {
    cache_.resize(params_.units.size());
    for (std::size_t i = 0; i < params_.units.size(); ++i) {
        const MZIUnit& u = params_.units[i];
        const double s = std::sin(u.theta / 2.0);
        const double c = std::cos(u.theta / 2.0);
        const cdouble lead = cdouble(0.0, 1.0) * std::exp(cdouble(0.0, u.theta / 2.0));
        const cdouble eip = std::exp(cdouble(0.0, u.phi));
        UnitCache& e = cache_[i];
        e.t00 = lead * eip * s;
        e.t01 = lead * c;
        e.t10 = lead * eip * c;
        e.t11 = -lead * s;
        // d/dtheta of each entry; the common factor 1/2 folds into is/ic.
        const cdouble is_c = cdouble(0.0, 0.5) * s + 0.5 * c; // (i s + c)/2
        const cdouble ic_s = cdouble(0.0, 0.5) * c - 0.5 * s; // (i c - s)/2
        e.dth00 = lead * eip * is_c;
        e.dth01 = lead * ic_s;
        e.dth10 = lead * eip * ic_s;
        e.dth11 = -lead * is_c;
    }
    screen_.resize(params_.output_phases.size());
    for (std::size_t k = 0; k < screen_.size(); ++k)
        screen_[k] = std::exp(cdouble(0.0, params_.output_phases[k]));
}

void MZIMeshBlock::get_params(double* out) const {
    std::size_t j = 0;
    for (const MZIUnit& u : params_.units) {
        out[j++] = u.theta;
        out[j++] = u.phi;
    }
    for (double p : params_.output_phases) out[j++] = p;
}

void MZIMeshBlock::set_params(const double* in) {
    std::size_t j = 0;
    for (MZIUnit& u : params_.units) {
        u.theta = in[j++];
        u.phi = in[j++];
    }
    for (double& p : params_.output_phases) p = in[j++];
    rebuild_cache();
}

void MZIMeshBlock::init_params(SplitMix64& rng) {
    for (MZIUnit& u : params_.units) {
        u.theta = rng.uniform(0.0, kTwoPi);
        u.phi = rng.uniform(0.0, kTwoPi);
    }
    for (double& p : params_.output_phases) p = rng.uniform(0.0, kTwoPi);
    rebuild_cache();
}

void MZIMeshBlock::forward(const cvec& in, cvec& out) const {
    if (in.size() != static_cast<std::size_t>(params_.port_count))
        throw ShapeError("MZIMeshBlock: state has " + std::to_string(in.size()) +
                         " ports, mesh expects " + std::to_string(params_.port_count));
    out = in;
    for (std::size_t i = 0; i < params_.units.size(); ++i) {
        const UnitCache& e = cache_[i];
        const int p = params_.units[i].top_port;
        const cdouble a = out[static_cast<std::size_t>(p)];
        const cdouble b = out[static_cast<std::size_t>(p) + 1];
        out[static_cast<std::size_t>(p)] = e.t00 * a + e.t01 * b;
        out[static_cast<std::size_t>(p) + 1] = e.t10 * a + e.t11 * b;
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= screen_[k];
}

void MZIMeshBlock::vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
                       cvec* fwd_out) const {
    const std::size_t n = static_cast<std::size_t>(params_.port_count);
    if (in.size() != n || upstream.size() != n)
        throw ShapeError("MZIMeshBlock::vjp: shape mismatch");

    // Replay, stashing each unit's input pair for the parameter gradients.
    thread_local cvec stash;
    thread_local cvec state;
    stash.resize(2 * params_.units.size());
    state = in;
    for (std::size_t i = 0; i < params_.units.size(); ++i) {
        const UnitCache& e = cache_[i];
        const std::size_t p = static_cast<std::size_t>(params_.units[i].top_port);
        const cdouble a = state[p];
        const cdouble b = state[p + 1];
        stash[2 * i] = a;
        stash[2 * i + 1] = b;
        state[p] = e.t00 * a + e.t01 * b;
        state[p + 1] = e.t10 * a + e.t11 * b;
    }
    // state now holds the pre-screen vector.
    if (fwd_out) {
        fwd_out->resize(n);
        for (std::size_t k = 0; k < n; ++k) (*fwd_out)[k] = state[k] * screen_[k];
    }

    in_cotangent = upstream;
    cvec& c = in_cotangent;
    const std::size_t nu = params_.units.size();
    // Output phase screen: y_k = e^{i psi_k} x_k.
    for (std::size_t k = 0; k < n; ++k) {
        const cdouble dy = cdouble(0.0, 1.0) * screen_[k] * state[k];
        pg[2 * nu + k] += c[k].real() * dy.real() + c[k].imag() * dy.imag();
        c[k] *= std::conj(screen_[k]);
    }
    // Units in reverse: parameter grads from the stashed inputs, then
    // conjugate-transpose transport.
    for (std::size_t i = nu; i-- > 0;) {
        const UnitCache& e = cache_[i];
        const std::size_t p = static_cast<std::size_t>(params_.units[i].top_port);
        const cdouble a = stash[2 * i];
        const cdouble b = stash[2 * i + 1];
        const cdouble c0 = c[p];
        const cdouble c1 = c[p + 1];
        const cdouble dth = std::conj(c0) * (e.dth00 * a + e.dth01 * b) +
                            std::conj(c1) * (e.dth10 * a + e.dth11 * b);
        const cdouble dph =
            std::conj(c0) * (cdouble(0.0, 1.0) * e.t00 * a) +
            std::conj(c1) * (cdouble(0.0, 1.0) * e.t10 * a);
        pg[2 * i] += dth.real();
        pg[2 * i + 1] += dph.real();
        c[p] = std::conj(e.t00) * c0 + std::conj(e.t10) * c1;
        c[p + 1] = std::conj(e.t01) * c0 + std::conj(e.t11) * c1;
    }
}

// ---------------------------------------------------------------------------
// Electro-optic activation block

EOActivationBlock::EOActivationBlock(ActivationParams params, int port_count)
    : params_(params), port_count_(port_count) {
    params_.validate();
    if (port_count_ < 1) throw ConfigError("EOActivationBlock: port count must be >= 1");
}

void EOActivationBlock::get_params(double* out) const {
    out[0] = params_.alpha;
    out[1] = params_.gain;
    out[2] = params_.phase_bias;
}

void EOActivationBlock::set_params(const double* in) {
    params_.alpha = in[0];
    params_.gain = in[1];
    params_.phase_bias = in[2];
    params_.validate();
}

void EOActivationBlock::forward(const cvec& in, cvec& out) const {
    if (in.size() != static_cast<std::size_t>(port_count_))
        throw ShapeError("EOActivationBlock: port count mismatch");
    const double root = std::sqrt(1.0 - params_.alpha);
    const double ga = params_.gain * params_.alpha;
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const cdouble z = in[i];
        const double power = z.real() * z.real() + z.imag() * z.imag();
        const double half = 0.5 * (ga * power + params_.phase_bias);
        const double ch = std::cos(half);
        const double sh = std::sin(half);
        // G = i sqrt(1-a) e^{-i d/2} cos(d/2) = sqrt(1-a) * ch * (sh + i ch)
        out[i] = root * ch * cdouble(sh, ch) * z;
    }
}

void EOActivationBlock::vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
                            cvec* fwd_out) const {
    const std::size_t n = static_cast<std::size_t>(port_count_);
    if (in.size() != n || upstream.size() != n)
        throw ShapeError("EOActivationBlock::vjp: shape mismatch");
    const double root = std::sqrt(1.0 - params_.alpha);
    const double ga = params_.gain * params_.alpha;
    in_cotangent.resize(n);
    if (fwd_out) fwd_out->resize(n);
    double d_alpha = 0.0, d_gain = 0.0, d_bias = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const cdouble z = in[i];
        const cdouble cu = upstream[i];
        const double power = z.real() * z.real() + z.imag() * z.imag();
        const double half = 0.5 * (ga * power + params_.phase_bias);
        const double ch = std::cos(half);
        const double sh = std::sin(half);
        const cdouble w(sh, ch);             // i * e^{-i d/2}
        const cdouble g = root * ch * w;     // G(d)
        const cdouble gp = -0.5 * root * w * w; // dG/dd
        if (fwd_out) (*fwd_out)[i] = g * z;

        // r = Re(conj(c) * G' * z) drives every phase-argument derivative.
        const cdouble cgz = std::conj(cu) * gp * z;
        const double r = cgz.real();
        // Input cotangent: conj(G) c + 2 g a r z  (d depends on |z|^2).
        in_cotangent[i] = std::conj(g) * cu + (2.0 * ga * r) * z;

        d_bias += r;
        d_gain += r * params_.alpha * power;
        const cdouble dfa = (-0.5 / (1.0 - params_.alpha)) * g * z + gp * (params_.gain * power) * z;
        d_alpha += (std::conj(cu) * dfa).real();
    }
    pg[0] += d_alpha;
    pg[1] += d_gain;
    pg[2] += d_bias;
}

// ---------------------------------------------------------------------------
// Diffractive stack block

void propagation_kernel(const PropagationSpec& spec, double distance, int sample_count,
                        cvec& kernel) {
    spec.validate();
    if (distance < 0.0) throw ConfigError("propagation distance must be >= 0");
    const int m = sample_count;
    kernel.resize(static_cast<std::size_t>(m));
    const double k0 = kTwoPi * spec.effective_index / spec.wavelength;
    const double k2 = k0 * k0;
    for (int q = 0; q < m; ++q) {
        // Standard DFT frequency layout, pitch-scaled.
        const int f = (q < (m + 1) / 2) ? q : q - m;
        const double kx = kTwoPi * static_cast<double>(f) / (static_cast<double>(m) * spec.pitch);
        const double kx2 = kx * kx;
        if (kx2 <= k2) {
            kernel[static_cast<std::size_t>(q)] =
                std::exp(cdouble(0.0, distance * std::sqrt(k2 - kx2)));
        } else {
            // Evanescent band: smooth exponential decay.
            kernel[static_cast<std::size_t>(q)] =
                cdouble(std::exp(-distance * std::sqrt(kx2 - k2)), 0.0);
        }
    }
}

namespace {

void propagate_with_kernel(const cvec& kernel, cvec& state, cvec& freq) {
    dft_forward(state, freq);
    for (std::size_t q = 0; q < freq.size(); ++q) freq[q] *= kernel[q];
    dft_inverse(freq, state);
}

void propagate_transposed(const cvec& kernel, cvec& cot, cvec& freq) {
    // Adjoint of IDFT . diag(H) . DFT is the same sandwich with conj(H).
    dft_forward(cot, freq);
    for (std::size_t q = 0; q < freq.size(); ++q) freq[q] *= std::conj(kernel[q]);
    dft_inverse(freq, cot);
}

} // namespace

DiffractiveStackBlock::DiffractiveStackBlock(DiffractiveStackParams params)
    : params_(std::move(params)) {
    params_.validate();
    rebuild_cache();
}

void DiffractiveStackBlock::rebuild_cache() {
    modulation_.resize(params_.phases.size());
    for (std::size_t l = 0; l < params_.phases.size(); ++l) {
        modulation_[l].resize(params_.phases[l].size());
        for (std::size_t m = 0; m < params_.phases[l].size(); ++m)
            modulation_[l][m] = std::exp(cdouble(0.0, params_.phases[l][m]));
    }
    propagation_kernel(params_.propagation, params_.propagation.layer_distance,
                       params_.sample_count, kernel_);
}

void DiffractiveStackBlock::get_params(double* out) const {
    std::size_t j = 0;
    for (const auto& layer : params_.phases)
        for (double v : layer) out[j++] = v;
}

void DiffractiveStackBlock::set_params(const double* in) {
    std::size_t j = 0;
    for (auto& layer : params_.phases)
        for (double& v : layer) v = in[j++];
    rebuild_cache();
}

void DiffractiveStackBlock::init_params(SplitMix64& rng) {
    for (auto& layer : params_.phases)
        for (double& v : layer) v = rng.uniform(0.0, kTwoPi);
    rebuild_cache();
}

void DiffractiveStackBlock::forward(const cvec& in, cvec& out) const {
    if (in.size() != static_cast<std::size_t>(params_.sample_count))
        throw ShapeError("DiffractiveStackBlock: state has " + std::to_string(in.size()) +
                         " samples, stack expects " + std::to_string(params_.sample_count));
    thread_local cvec freq;
    out = in;
    for (std::size_t l = 0; l < modulation_.size(); ++l) {
        propagate_with_kernel(kernel_, out, freq);
        const cvec& mod = modulation_[l];
        for (std::size_t m = 0; m < out.size(); ++m) out[m] *= mod[m];
    }
    propagate_with_kernel(kernel_, out, freq);
}

void DiffractiveStackBlock::vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent,
                                double* pg, cvec* fwd_out) const {
    const std::size_t n = static_cast<std::size_t>(params_.sample_count);
    if (in.size() != n || upstream.size() != n)
        throw ShapeError("DiffractiveStackBlock::vjp: shape mismatch");
    const std::size_t layers = modulation_.size();

    // Replay, stashing each metaline's input field.
    thread_local std::vector<cvec> stash;
    thread_local cvec freq;
    thread_local cvec state;
    stash.resize(layers);
    state = in;
    for (std::size_t l = 0; l < layers; ++l) {
        propagate_with_kernel(kernel_, state, freq);
        stash[l] = state;
        const cvec& mod = modulation_[l];
        for (std::size_t m = 0; m < n; ++m) state[m] *= mod[m];
    }
    propagate_with_kernel(kernel_, state, freq);
    if (fwd_out) *fwd_out = state;

    in_cotangent = upstream;
    cvec& c = in_cotangent;
    propagate_transposed(kernel_, c, freq);
    for (std::size_t l = layers; l-- > 0;) {
        const cvec& mod = modulation_[l];
        const cvec& x = stash[l];
        double* layer_pg = pg + l * n;
        for (std::size_t m = 0; m < n; ++m) {
            const cdouble dy = cdouble(0.0, 1.0) * mod[m] * x[m];
            layer_pg[m] += c[m].real() * dy.real() + c[m].imag() * dy.imag();
            c[m] *= std::conj(mod[m]);
        }
        propagate_transposed(kernel_, c, freq);
    }
}

// ---------------------------------------------------------------------------
// Scale block

void ScaleBlock::forward(const cvec& in, cvec& out) const {
    if (in.size() != static_cast<std::size_t>(port_count_))
        throw ShapeError("ScaleBlock: port count mismatch");
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = gain_ * in[i];
}

void ScaleBlock::vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double*,
                     cvec* fwd_out) const {
    if (in.size() != static_cast<std::size_t>(port_count_) || upstream.size() != in.size())
        throw ShapeError("ScaleBlock::vjp: shape mismatch");
    in_cotangent.resize(in.size());
    const cdouble cg = std::conj(gain_);
    for (std::size_t i = 0; i < in.size(); ++i) in_cotangent[i] = cg * upstream[i];
    if (fwd_out) {
        fwd_out->resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) (*fwd_out)[i] = gain_ * in[i];
    }
}

// ---------------------------------------------------------------------------
// Spec-surface free operations

OpticalState mesh_forward(const MZIMeshParams& params, const OpticalState& state) {
    MZIMeshBlock block(params);
    cvec out;
    block.forward(state.amplitudes(), out);
    return OpticalState(std::move(out));
}

OpticalState eo_activation(const ActivationParams& params, const OpticalState& state) {
    EOActivationBlock block(params, state.port_count());
    cvec out;
    block.forward(state.amplitudes(), out);
    return OpticalState(std::move(out));
}

OpticalState metaline_modulate(const std::vector<double>& phases, const OpticalState& state) {
    if (phases.size() != state.amplitudes().size())
        throw ShapeError("metaline_modulate: " + std::to_string(phases.size()) + " phases vs " +
                         std::to_string(state.port_count()) + " samples");
    cvec out(state.amplitudes());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] *= std::exp(cdouble(0.0, phases[m]));
    return OpticalState(std::move(out));
}

OpticalState angular_spectrum_propagate(const PropagationSpec& spec, double distance,
                                        const OpticalState& state) {
    cvec kernel, freq, out(state.amplitudes());
    propagation_kernel(spec, distance, state.port_count(), kernel);
    propagate_with_kernel(kernel, out, freq);
    return OpticalState(std::move(out));
}

OpticalState dpu_forward(const DiffractiveStackParams& params, const OpticalState& state) {
    DiffractiveStackBlock block(params);
    cvec out;
    block.forward(state.amplitudes(), out);
    return OpticalState(std::move(out));
}

Cotangents block_vjp(const Block& block, const OpticalState& input, const cvec& upstream) {
    if (upstream.size() != input.amplitudes().size())
        throw ShapeError("block_vjp: upstream cotangent shape mismatch");
    Cotangents out;
    out.param_gradient.assign(static_cast<std::size_t>(block.param_count()), 0.0);
    block.vjp(input.amplitudes(), upstream, out.state_cotangent, out.param_gradient.data(),
              nullptr);
    return out;
}

} // namespace onode
