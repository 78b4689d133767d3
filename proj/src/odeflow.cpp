#include "onode/odeflow.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>

#include "onode/errors.hpp"
#include "onode/rng.hpp"

namespace onode {

// ---------------------------------------------------------------------------
// DynamicsSpec

DynamicsSpec::DynamicsSpec(const DynamicsSpec& other)
    : time_policy(other.time_policy), omega0(other.omega0) {
    chain.reserve(other.chain.size());
    for (const auto& b : other.chain) chain.push_back(b->clone());
}

DynamicsSpec& DynamicsSpec::operator=(const DynamicsSpec& other) {
    if (this == &other) return *this;
    DynamicsSpec tmp(other);
    *this = std::move(tmp);
    return *this;
}

void DynamicsSpec::validate() const {
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (chain[i]->port_count() != chain[i - 1]->port_count())
            throw ShapeError("DynamicsSpec: chain blocks " + std::to_string(i - 1) + " and " +
                             std::to_string(i) + " have incompatible port counts (" +
                             std::to_string(chain[i - 1]->port_count()) + " vs " +
                             std::to_string(chain[i]->port_count()) + ")");
    }
    if (!std::isfinite(omega0)) throw ConfigError("DynamicsSpec: omega0 must be finite");
}

int DynamicsSpec::param_count() const {
    int total = 0;
    for (const auto& b : chain) total += b->param_count();
    return total;
}

std::vector<int> DynamicsSpec::param_offsets() const {
    std::vector<int> offsets(chain.size() + 1, 0);
    for (std::size_t i = 0; i < chain.size(); ++i)
        offsets[i + 1] = offsets[i] + chain[i]->param_count();
    return offsets;
}

void DynamicsSpec::get_params(std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(param_count()));
    std::size_t j = 0;
    for (const auto& b : chain) {
        b->get_params(out.data() + j);
        j += static_cast<std::size_t>(b->param_count());
    }
}

void DynamicsSpec::set_params(const std::vector<double>& in) {
    if (in.size() != static_cast<std::size_t>(param_count()))
        throw ShapeError("DynamicsSpec::set_params: expected " + std::to_string(param_count()) +
                         " parameters, got " + std::to_string(in.size()));
    std::size_t j = 0;
    for (auto& b : chain) {
        b->set_params(in.data() + j);
        j += static_cast<std::size_t>(b->param_count());
    }
}

void DynamicsSpec::init_params(SplitMix64& rng) {
    for (auto& b : chain) b->init_params(rng);
}

void DynamicsSpec::eval(double t, const cvec& in, cvec& out) const {
    thread_local cvec scratch;
    const cvec* src = &in;
    if (time_policy == TimePolicy::time_injected) {
        const cdouble rot = std::exp(cdouble(0.0, omega0 * t));
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = rot * in[i];
        src = &out;
    }
    if (chain.empty()) {
        if (src != &out) out = *src;
        return;
    }
    for (const auto& block : chain) {
        cvec* dst = (src == &out) ? &scratch : &out;
        block->forward(*src, *dst);
        src = dst;
    }
    if (src != &out) out.swap(scratch);
}

void DynamicsSpec::vjp(double t, const cvec& in, const cvec& upstream, cvec& in_cotangent,
                       double* pg, cvec* f_out) const {
    thread_local std::vector<cvec> stash;
    thread_local cvec flip;
    const std::size_t n = chain.size();
    stash.resize(n + 1);

    if (time_policy == TimePolicy::time_injected) {
        const cdouble rot = std::exp(cdouble(0.0, omega0 * t));
        stash[0].resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) stash[0][i] = rot * in[i];
    } else {
        stash[0] = in;
    }
    for (std::size_t i = 0; i < n; ++i) chain[i]->forward(stash[i], stash[i + 1]);
    if (f_out) *f_out = stash[n];

    in_cotangent = upstream;
    const std::vector<int> offsets = param_offsets();
    for (std::size_t i = n; i-- > 0;) {
        chain[i]->vjp(stash[i], in_cotangent, flip, pg + offsets[i], nullptr);
        in_cotangent.swap(flip);
    }
    if (time_policy == TimePolicy::time_injected) {
        const cdouble back = std::exp(cdouble(0.0, -omega0 * t));
        for (cdouble& c : in_cotangent) c *= back;
    }
}

OpticalState eval_rhs(const DynamicsSpec& dynamics, const OpticalState& state, double t) {
    dynamics.validate();
    cvec out;
    dynamics.eval(t, state.amplitudes(), out);
    return OpticalState(std::move(out));
}

// ---------------------------------------------------------------------------
// Solver core

int stage_count(SolverMethod method) {
    switch (method) {
        case SolverMethod::euler: return 1;
        case SolverMethod::midpoint: return 2;
        case SolverMethod::rk4: return 4;
    }
    throw ConfigError("unknown solver method");
}

void ODESolveConfig::validate() const {
    if (!(t1 > t0)) throw ConfigError("ODESolveConfig: t1 must exceed t0");
    if (steps < 1) throw ConfigError("ODESolveConfig: steps must be >= 1");
    stage_count(method);
}

GradientMode ODESolveConfig::resolved_gradient_mode() const {
    if (gradient_mode != GradientMode::automatic) return gradient_mode;
    return steps <= 8 ? GradientMode::discretize : GradientMode::adjoint;
}

namespace {

// All three methods share a chain tableau: stage s evaluates f at
// y_s = h + dt*a[s]*k_{s-1}, and the update is h += dt * sum_s b[s]*k_s.
struct Tableau {
    int stages;
    double a[4];
    double b[4];
    double c[4];
};

const Tableau& tableau(SolverMethod method) {
    static const Tableau euler{1, {0.0}, {1.0}, {0.0}};
    static const Tableau midpoint{2, {0.0, 0.5}, {0.0, 1.0}, {0.0, 0.5}};
    static const Tableau rk4{4,
                             {0.0, 0.5, 0.5, 1.0},
                             {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
                             {0.0, 0.5, 0.5, 1.0}};
    switch (method) {
        case SolverMethod::euler: return euler;
        case SolverMethod::midpoint: return midpoint;
        case SolverMethod::rk4: return rk4;
    }
    throw ConfigError("unknown solver method");
}

double renormalize_in_place(cvec& h) {
    const double r = std::sqrt(vec_energy(h));
    if (r > 0.0) {
        for (cdouble& v : h) v /= r;
    }
    return r;
}

// VJP of h -> h/||h||: c_pre = c/r - (Re<pre, c>/r^3) * pre.
void renormalize_vjp(const cvec& pre, cvec& c) {
    const double r = std::sqrt(vec_energy(pre));
    if (r <= 0.0) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i)
        dot += pre[i].real() * c[i].real() + pre[i].imag() * c[i].imag();
    const double coef = dot / (r * r * r);
    for (std::size_t i = 0; i < pre.size(); ++i) c[i] = c[i] / r - coef * pre[i];
}

// Integrates h from ta to tb in `steps` fixed steps, optionally saving stage
// inputs (and pre-renormalization results) for an exact replay.
void integrate(const DynamicsSpec& dyn, cvec& h, double ta, double tb, int steps,
               SolverMethod method, bool renorm, std::vector<cvec>* save_stages,
               std::vector<cvec>* save_prenorm, long& evaluations) {
    const Tableau& tab = tableau(method);
    const double dt = (tb - ta) / static_cast<double>(steps);
    const std::size_t n = h.size();
    thread_local cvec y, k, acc;
    y.resize(n);
    acc.resize(n);
    for (int step = 0; step < steps; ++step) {
        const double t = ta + dt * static_cast<double>(step);
        if (tab.stages == 1) {
            if (save_stages) save_stages->push_back(h);
            dyn.eval(t, h, k);
            ++evaluations;
            for (std::size_t i = 0; i < n; ++i) h[i] = h[i] + dt * k[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) acc[i] = cdouble(0.0, 0.0);
            for (int s = 0; s < tab.stages; ++s) {
                if (s == 0) {
                    y = h;
                } else {
                    const double w = dt * tab.a[s];
                    for (std::size_t i = 0; i < n; ++i) y[i] = h[i] + w * k[i];
                }
                if (save_stages) save_stages->push_back(y);
                dyn.eval(t + tab.c[s] * dt, y, k);
                ++evaluations;
                const double b = tab.b[s];
                if (b != 0.0)
                    for (std::size_t i = 0; i < n; ++i) acc[i] += b * k[i];
            }
            for (std::size_t i = 0; i < n; ++i) h[i] = h[i] + dt * acc[i];
        }
        if (renorm) {
            if (save_prenorm) save_prenorm->push_back(h);
            renormalize_in_place(h);
        }
    }
}

// Exact reverse of one integrate() step given its saved stage inputs. c enters
// as dL/dh_{k+1} and leaves as dL/dh_k; pg accumulates parameter gradients.
void reverse_step(const DynamicsSpec& dyn, const cvec* stage_inputs, double t, double dt,
                  const Tableau& tab, cvec& c, double* pg, long& evaluations) {
    const std::size_t n = c.size();
    thread_local cvec u, cy, cy_next, csum;
    u.resize(n);
    csum = c;
    for (int s = tab.stages - 1; s >= 0; --s) {
        const double bw = dt * tab.b[s];
        if (s + 1 < tab.stages) {
            const double aw = dt * tab.a[s + 1];
            for (std::size_t i = 0; i < n; ++i) u[i] = bw * c[i] + aw * cy_next[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) u[i] = bw * c[i];
        }
        dyn.vjp(t + tab.c[s] * dt, stage_inputs[s], u, cy, pg, nullptr);
        ++evaluations;
        for (std::size_t i = 0; i < n; ++i) csum[i] += cy[i];
        cy_next.swap(cy);
    }
    c.swap(csum);
}

} // namespace

SolveRecord solve_ivp(const DynamicsSpec& dynamics, const OpticalState& h0,
                      const ODESolveConfig& config, bool save_states) {
    dynamics.validate();
    config.validate();
    cvec h = h0.amplitudes();
    std::vector<cvec> saved, prenorm;
    long evaluations = 0;
    if (save_states) {
        saved.reserve(static_cast<std::size_t>(config.steps) *
                      static_cast<std::size_t>(stage_count(config.method)));
        if (config.renormalize) prenorm.reserve(static_cast<std::size_t>(config.steps));
    }
    integrate(dynamics, h, config.t0, config.t1, config.steps, config.method, config.renormalize,
              save_states ? &saved : nullptr, save_states ? &prenorm : nullptr, evaluations);
    return SolveRecord{OpticalState(std::move(h)), std::move(saved), std::move(prenorm),
                       evaluations, save_states};
}

std::vector<OpticalState> sample_trajectory(const DynamicsSpec& dynamics, const OpticalState& h0,
                                            const std::vector<double>& times,
                                            const ODESolveConfig& config) {
    dynamics.validate();
    config.validate();
    if (!times.empty() && times.front() < config.t0)
        throw ConfigError("sample_trajectory: times[0] precedes t0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw ConfigError("sample_trajectory: times must be ascending");

    std::vector<OpticalState> out;
    out.reserve(times.size());
    cvec h = h0.amplitudes();
    double t = config.t0;
    long evaluations = 0;
    for (double target : times) {
        if (target > t) {
            integrate(dynamics, h, t, target, config.steps, config.method, config.renormalize,
                      nullptr, nullptr, evaluations);
            t = target;
        }
        out.emplace_back(h);
    }
    return out;
}

OpticalState residual_forward(const std::vector<DynamicsSpec>& layers, const OpticalState& h0) {
    cvec h = h0.amplitudes();
    cvec f;
    for (std::size_t layer = 0; layer < layers.size(); ++layer) {
        layers[layer].validate();
        layers[layer].eval(static_cast<double>(layer), h, f);
        if (f.size() != h.size())
            throw ShapeError("residual_forward: layer output shape mismatch");
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + f[i];
    }
    return OpticalState(std::move(h));
}

// ---------------------------------------------------------------------------
// Gradients

GradientResult discretize_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                    const ODESolveConfig& config, const cvec& loss_cotangent) {
    SolveRecord record = solve_ivp(dynamics, h0, config, /*save_states=*/true);
    GradientResult result = discretize_gradients(dynamics, record, config, loss_cotangent);
    result.rhs_evaluations += record.evaluations;
    return result;
}

GradientResult discretize_gradients(const DynamicsSpec& dynamics, const SolveRecord& record,
                                    const ODESolveConfig& config, const cvec& loss_cotangent) {
    dynamics.validate();
    config.validate();
    const Tableau& tab = tableau(config.method);
    const std::size_t need =
        static_cast<std::size_t>(config.steps) * static_cast<std::size_t>(tab.stages);
    if (!record.saved || record.saved_states.size() != need)
        throw StateError("discretize_gradients: record lacks the saved states for this config");
    if (config.renormalize &&
        record.saved_prenorm.size() != static_cast<std::size_t>(config.steps))
        throw StateError("discretize_gradients: record lacks pre-renormalization states");
    const std::size_t n = loss_cotangent.size();
    if (n != record.final_state.amplitudes().size())
        throw ShapeError("discretize_gradients: cotangent shape mismatch");

    GradientResult result;
    result.param_gradient.assign(static_cast<std::size_t>(dynamics.param_count()), 0.0);
    result.h0_cotangent = loss_cotangent;
    const double dt = (config.t1 - config.t0) / static_cast<double>(config.steps);
    for (int step = config.steps - 1; step >= 0; --step) {
        if (config.renormalize)
            renormalize_vjp(record.saved_prenorm[static_cast<std::size_t>(step)],
                            result.h0_cotangent);
        const double t = config.t0 + dt * static_cast<double>(step);
        reverse_step(dynamics, record.saved_states.data() +
                                   static_cast<std::size_t>(step) * static_cast<std::size_t>(tab.stages),
                     t, dt, tab, result.h0_cotangent, result.param_gradient.data(),
                     result.rhs_evaluations);
    }
    result.workspace_doubles =
        2 * n * (record.saved_states.size() + record.saved_prenorm.size() + 4) +
        result.param_gradient.size();
    return result;
}

namespace {

// Augmented backward state: solution h, adjoint a, parameter accumulator g.
struct AugVec {
    cvec h, a;
    std::vector<double> g;

    void assign_zero(std::size_t n, std::size_t p) {
        h.assign(n, cdouble(0.0, 0.0));
        a.assign(n, cdouble(0.0, 0.0));
        g.assign(p, 0.0);
    }
    std::size_t doubles() const { return 4 * h.size() + g.size(); }
};

void aug_axpy(AugVec& y, double s, const AugVec& x) {
    for (std::size_t i = 0; i < y.h.size(); ++i) y.h[i] += s * x.h[i];
    for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += s * x.a[i];
    for (std::size_t i = 0; i < y.g.size(); ++i) y.g[i] += s * x.g[i];
}

void aug_set_sum(AugVec& y, const AugVec& base, double s, const AugVec& x) {
    y.h.resize(base.h.size());
    y.a.resize(base.a.size());
    y.g.resize(base.g.size());
    for (std::size_t i = 0; i < y.h.size(); ++i) y.h[i] = base.h[i] + s * x.h[i];
    for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] = base.a[i] + s * x.a[i];
    for (std::size_t i = 0; i < y.g.size(); ++i) y.g[i] = base.g[i] + s * x.g[i];
}

// F(h, a, .) = (f(h, t), -(df/dh)^T a, -(df/dtheta)^T a).
void aug_rhs(const DynamicsSpec& dyn, double t, const AugVec& y, AugVec& f, long& evaluations) {
    f.g.assign(y.g.size(), 0.0);
    dyn.vjp(t, y.h, y.a, f.a, f.g.data(), &f.h);
    ++evaluations;
    for (cdouble& v : f.a) v = -v;
    for (double& v : f.g) v = -v;
}

// One fixed-step pass of the augmented system from ta to tb (ta > tb here).
void aug_integrate(const DynamicsSpec& dyn, AugVec& y, double ta, double tb, int steps,
                   const Tableau& tab, long& evaluations, std::size_t& workspace_doubles) {
    const double dt = (tb - ta) / static_cast<double>(steps);
    AugVec ys, f, acc;
    for (int step = 0; step < steps; ++step) {
        const double t = ta + dt * static_cast<double>(step);
        acc.assign_zero(y.h.size(), y.g.size());
        for (int s = 0; s < tab.stages; ++s) {
            if (s == 0) {
                aug_rhs(dyn, t, y, f, evaluations);
            } else {
                aug_set_sum(ys, y, dt * tab.a[s], f);
                aug_rhs(dyn, t + tab.c[s] * dt, ys, f, evaluations);
            }
            if (tab.b[s] != 0.0) aug_axpy(acc, tab.b[s], f);
        }
        aug_axpy(y, dt, acc);
    }
    workspace_doubles = y.doubles() + ys.doubles() + f.doubles() + acc.doubles();
}

} // namespace

GradientResult adjoint_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                 const ODESolveConfig& config, const cvec& loss_cotangent) {
    dynamics.validate();
    config.validate();
    if (config.renormalize)
        throw ConfigError("adjoint_gradients: per-step renormalization requires discretize mode");
    if (loss_cotangent.size() != h0.amplitudes().size())
        throw ShapeError("adjoint_gradients: cotangent shape mismatch");

    GradientResult result;
    long evaluations = 0;
    cvec h1 = h0.amplitudes();
    integrate(dynamics, h1, config.t0, config.t1, config.steps, config.method, false, nullptr,
              nullptr, evaluations);

    AugVec y;
    y.h = std::move(h1);
    y.a = loss_cotangent;
    y.g.assign(static_cast<std::size_t>(dynamics.param_count()), 0.0);
    std::size_t workspace = 0;
    aug_integrate(dynamics, y, config.t1, config.t0, config.steps, tableau(config.method),
                  evaluations, workspace);

    result.h0_cotangent = std::move(y.a);
    result.param_gradient = std::move(y.g);
    result.rhs_evaluations = evaluations;
    result.workspace_doubles = workspace;
    return result;
}

GradientResult trajectory_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                    const std::vector<double>& times,
                                    const std::vector<cvec>& sample_cotangents,
                                    const ODESolveConfig& config) {
    dynamics.validate();
    config.validate();
    if (sample_cotangents.size() != times.size())
        throw ShapeError("trajectory_gradients: one cotangent per sample time required");
    for (const cvec& c : sample_cotangents)
        if (c.size() != h0.amplitudes().size())
            throw ShapeError("trajectory_gradients: cotangent width must match the state");
    if (!times.empty() && times.front() < config.t0)
        throw ConfigError("trajectory_gradients: times[0] precedes t0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1])
            throw ConfigError("trajectory_gradients: times must be ascending");

    const std::size_t n = h0.amplitudes().size();
    const std::size_t count = times.size();
    GradientResult result;
    result.param_gradient.assign(static_cast<std::size_t>(dynamics.param_count()), 0.0);
    result.h0_cotangent.assign(n, cdouble(0.0, 0.0));
    if (count == 0) return result;

    const GradientMode mode = config.resolved_gradient_mode();
    const Tableau& tab = tableau(config.method);
    const double t_first = config.t0;

    if (mode == GradientMode::discretize) {
        // Forward sweep saving every segment's stage inputs.
        std::vector<std::vector<cvec>> seg_stages(count);
        std::vector<std::vector<cvec>> seg_prenorm(count);
        cvec h = h0.amplitudes();
        double t = t_first;
        std::size_t saved_doubles = 0;
        for (std::size_t k = 0; k < count; ++k) {
            if (times[k] > t) {
                integrate(dynamics, h, t, times[k], config.steps, config.method,
                          config.renormalize, &seg_stages[k],
                          config.renormalize ? &seg_prenorm[k] : nullptr,
                          result.rhs_evaluations);
                t = times[k];
            }
            saved_doubles += 2 * n * (seg_stages[k].size() + seg_prenorm[k].size());
        }
        // Backward sweep.
        cvec& c = result.h0_cotangent;
        for (std::size_t k = count; k-- > 0;) {
            for (std::size_t i = 0; i < n; ++i) c[i] += sample_cotangents[k][i];
            if (seg_stages[k].empty()) continue;
            const double ta = (k == 0) ? t_first : times[k - 1];
            const double dt = (times[k] - ta) / static_cast<double>(config.steps);
            for (int step = config.steps - 1; step >= 0; --step) {
                if (config.renormalize)
                    renormalize_vjp(seg_prenorm[k][static_cast<std::size_t>(step)], c);
                reverse_step(dynamics,
                             seg_stages[k].data() +
                                 static_cast<std::size_t>(step) * static_cast<std::size_t>(tab.stages),
                             ta + dt * static_cast<double>(step), dt, tab, c,
                             result.param_gradient.data(), result.rhs_evaluations);
            }
        }
        result.workspace_doubles = saved_doubles + 8 * n + result.param_gradient.size();
        return result;
    }

    if (config.renormalize)
        throw ConfigError("trajectory_gradients: per-step renormalization requires discretize mode");

    // Adjoint mode: store only the sampled states from the forward sweep and
    // re-integrate each inter-sample segment backward, resetting h at every
    // stored sample.
    std::vector<cvec> samples(count);
    {
        cvec h = h0.amplitudes();
        double t = t_first;
        for (std::size_t k = 0; k < count; ++k) {
            if (times[k] > t) {
                integrate(dynamics, h, t, times[k], config.steps, config.method, false, nullptr,
                          nullptr, result.rhs_evaluations);
                t = times[k];
            }
            samples[k] = h;
        }
    }
    AugVec y;
    y.h = samples[count - 1];
    y.a = sample_cotangents[count - 1];
    y.g.assign(static_cast<std::size_t>(dynamics.param_count()), 0.0);
    std::size_t workspace = 0;
    for (std::size_t k = count; k-- > 0;) {
        if (k + 1 < count) {
            y.h = samples[k];
            for (std::size_t i = 0; i < n; ++i) y.a[i] += sample_cotangents[k][i];
        }
        const double ta = (k == 0) ? t_first : times[k - 1];
        if (times[k] > ta)
            aug_integrate(dynamics, y, times[k], ta, config.steps, tab, result.rhs_evaluations,
                          workspace);
    }
    result.h0_cotangent = std::move(y.a);
    result.param_gradient = std::move(y.g);
    result.workspace_doubles = workspace + 2 * n * count;
    return result;
}

GradientResult residual_gradients(const std::vector<DynamicsSpec>& layers, const OpticalState& h0,
                                  const cvec& loss_cotangent) {
    const std::size_t n = h0.amplitudes().size();
    if (loss_cotangent.size() != n)
        throw ShapeError("residual_gradients: cotangent shape mismatch");
    std::vector<int> offsets(layers.size() + 1, 0);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].validate();
        offsets[l + 1] = offsets[l] + layers[l].param_count();
    }

    GradientResult result;
    result.param_gradient.assign(static_cast<std::size_t>(offsets.back()), 0.0);

    // Forward, stashing each layer's input.
    std::vector<cvec> inputs(layers.size());
    cvec h = h0.amplitudes();
    cvec f;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        inputs[l] = h;
        layers[l].eval(static_cast<double>(l), h, f);
        if (f.size() != n) throw ShapeError("residual_gradients: layer output shape mismatch");
        for (std::size_t i = 0; i < n; ++i) h[i] = h[i] + f[i];
        ++result.rhs_evaluations;
    }

    result.h0_cotangent = loss_cotangent;
    cvec cy;
    for (std::size_t l = layers.size(); l-- > 0;) {
        layers[l].vjp(static_cast<double>(l), inputs[l], result.h0_cotangent, cy,
                      result.param_gradient.data() + offsets[l], nullptr);
        ++result.rhs_evaluations;
        for (std::size_t i = 0; i < n; ++i) result.h0_cotangent[i] += cy[i];
    }
    result.workspace_doubles =
        2 * n * (layers.size() + 2) + result.param_gradient.size();
    return result;
}

} // namespace onode
