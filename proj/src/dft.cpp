#include "onode/dft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "onode/errors.hpp"

namespace onode {
namespace {

// One plan pair per length, executed on aligned scratch buffers so the
// planner can pick SIMD kernels; callers pass ordinary vectors and we copy
// through the scratch. Plan creation is serialized; FFTW_ESTIMATE keeps
// the chosen algorithm deterministic across runs.
struct PlanSet {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    int n = 0;

    explicit PlanSet(int len) : n(len) {
        in = fftw_alloc_complex(static_cast<std::size_t>(n));
        out = fftw_alloc_complex(static_cast<std::size_t>(n));
        fwd = fftw_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(n, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~PlanSet() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(in);
        fftw_free(out);
    }
    PlanSet(const PlanSet&) = delete;
    PlanSet& operator=(const PlanSet&) = delete;
};

std::mutex plan_mutex;

PlanSet& plans_for(int n) {
    static std::map<int, PlanSet*> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, new PlanSet(n)).first;
    return *it->second;
}

void run_1d(const cvec& in, cvec& out, bool forward) {
    const int n = static_cast<int>(in.size());
    if (n == 0) throw ShapeError("dft: empty input");
    PlanSet& p = plans_for(n);
    std::lock_guard<std::mutex> lock(plan_mutex);
    for (int i = 0; i < n; ++i) {
        p.in[i][0] = in[static_cast<std::size_t>(i)].real();
        p.in[i][1] = in[static_cast<std::size_t>(i)].imag();
    }
    fftw_execute(forward ? p.fwd : p.bwd);
    out.resize(static_cast<std::size_t>(n));
    if (forward) {
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = cdouble(p.out[i][0], p.out[i][1]);
    } else {
        const double inv = 1.0 / n;
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = cdouble(p.out[i][0] * inv, p.out[i][1] * inv);
    }
}

} // namespace

void dft_forward(const cvec& in, cvec& out) { run_1d(in, out, true); }
void dft_inverse(const cvec& in, cvec& out) { run_1d(in, out, false); }

void dft2_forward(const std::vector<double>& grid, int rows, int cols, cvec& out) {
    if (grid.size() != static_cast<std::size_t>(rows) * cols)
        throw ShapeError("dft2_forward: grid size mismatch");

    struct Plan2D {
        fftw_plan plan;
        fftw_complex* in;
        fftw_complex* out;
    };
    static std::map<std::pair<int, int>, Plan2D> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(rows, cols);
    auto it = cache.find(key);
    if (it == cache.end()) {
        Plan2D p;
        p.in = fftw_alloc_complex(grid.size());
        p.out = fftw_alloc_complex(grid.size());
        p.plan = fftw_plan_dft_2d(rows, cols, p.in, p.out, FFTW_FORWARD, FFTW_ESTIMATE);
        it = cache.emplace(key, p).first;
    }
    Plan2D& p = it->second;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        p.in[i][0] = grid[i];
        p.in[i][1] = 0.0;
    }
    fftw_execute(p.plan);
    out.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = cdouble(p.out[i][0], p.out[i][1]);
}

} // namespace onode
