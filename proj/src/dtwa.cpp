#include "kcs/dtwa.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kcs/errors.hpp"
#include "kcs/kernels.hpp"
#include "kcs/rng.hpp"
#include "trajectory_reduce.hpp"

namespace kcs {

namespace {

constexpr std::uint64_t kPilotStream = 1ull << 40;
constexpr int kMaxHalvings = 12;

// Halo-padded real array: data + 2 is site 0, indices -2..n+1 readable.
struct Halo {
    std::vector<double> buf;
    double* p = nullptr;

    explicit Halo(int n) : buf(static_cast<std::size_t>(n) + 4, 0.0), p(buf.data() + 2) {}
};

void wrap(int n, double* p) {
    p[-1] = p[(n - 1) % n];
    p[-2] = p[((n - 2) % n + n) % n];
    p[n] = p[0];
    p[n + 1] = p[1 % n];
}

struct DtwaEngine {
    const DtwaParams prm;
    int n;
    double dt;
    const kernels::Backend* B;
    Halo x, y, z, px, py, pz;
    std::vector<double> dx1, dy1, dz1, dx2, dy2, dz2;

    DtwaEngine(const DtwaParams& p, double step)
        : prm(p), n(p.n_sites), dt(step), B(&kernels::active()), x(n), y(n), z(n), px(n), py(n),
          pz(n), dx1(n), dy1(n), dz1(n), dx2(n), dy2(n), dz2(n) {}

    cplx drift(const double* sx, const double* sy, const double* sz, cplx a, double* dsx,
               double* dsy, double* dsz) const {
        double fr = 0.0, fi = 0.0;
        B->dtwa_drift(n, sx, sy, sz, prm.g, a.real(), a.imag(), prm.p0, prm.alpha, prm.beta,
                      prm.gamma, dsx, dsy, dsz, &fr, &fi);
        return cplx(0.0, -prm.delta) * a - cplx(0.0, prm.g) * cplx(fr, fi) - 0.5 * prm.kappa * a;
    }

    void step(cplx& a, CounterRng& rng, double h) {
        wrap(n, x.p);
        wrap(n, y.p);
        wrap(n, z.p);
        const cplx da1 = drift(x.p, y.p, z.p, a, dx1.data(), dy1.data(), dz1.data());

        std::copy_n(x.p, n, px.p);
        std::copy_n(y.p, n, py.p);
        std::copy_n(z.p, n, pz.p);
        B->raxpy(n, h, dx1.data(), px.p);
        B->raxpy(n, h, dy1.data(), py.p);
        B->raxpy(n, h, dz1.data(), pz.p);
        const cplx ap = a + h * da1;

        wrap(n, px.p);
        wrap(n, py.p);
        wrap(n, pz.p);
        const cplx da2 = drift(px.p, py.p, pz.p, ap, dx2.data(), dy2.data(), dz2.data());

        B->raxpy(n, h / 2, dx1.data(), x.p);
        B->raxpy(n, h / 2, dx2.data(), x.p);
        B->raxpy(n, h / 2, dy1.data(), y.p);
        B->raxpy(n, h / 2, dy2.data(), y.p);
        B->raxpy(n, h / 2, dz1.data(), z.p);
        B->raxpy(n, h / 2, dz2.data(), z.p);
        a += (h / 2) * (da1 + da2);

        if (prm.kappa > 0.0) a += 0.5 * std::sqrt(prm.kappa * h) * rng.normal_complex();
    }

    void load(const PhasePoint& pt) {
        std::copy(pt.sx.begin(), pt.sx.end(), x.p);
        std::copy(pt.sy.begin(), pt.sy.end(), y.p);
        std::copy(pt.sz.begin(), pt.sz.end(), z.p);
    }

    // {n, Sz, Sperp2, Nadj, photons}
    void observe(cplx a, double* out) {
        const double szsum = B->rsum(n, z.p);
        const double sxsum = B->rsum(n, x.p);
        const double sysum = B->rsum(n, y.p);
        wrap(n, z.p);
        double nadj = 0.0;
        for (int j = 0; j < n; ++j) nadj += 0.25 * (1.0 + z.p[j]) * (1.0 + z.p[j + 1]);
        out[0] = 0.5 + szsum / (2.0 * n);
        out[1] = 0.5 * szsum;
        out[2] = 0.25 * (sxsum * sxsum + sysum * sysum);
        out[3] = nadj;
        out[4] = std::norm(a) - 0.5;
    }

    bool in_range(cplx a, double bound) const {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || std::abs(a) > bound)
            return false;
        for (int j = 0; j < n; ++j)
            if (!std::isfinite(z.p[j]) || std::abs(z.p[j]) > bound) return false;
        return true;
    }
};

// Initial sample and per-step noise share one substream, in this draw order.
PhasePoint sample_point(CounterRng& rng, int n, cplx alpha0) {
    PhasePoint pt;
    pt.sx.resize(n);
    pt.sy.resize(n);
    pt.sz.assign(n, 1.0);
    for (int j = 0; j < n; ++j) pt.sx[j] = rng.uniform() <= 0.5 ? 1.0 : -1.0;
    for (int j = 0; j < n; ++j) pt.sy[j] = rng.uniform() <= 0.5 ? 1.0 : -1.0;
    pt.a = alpha0 + 0.5 * rng.normal_complex();
    return pt;
}

// Runs one trajectory; sink(k) is called at every grid point with the state
// loaded in the engine and the current cavity amplitude.
template <typename Sink>
void run_one(DtwaEngine& eng, const std::vector<double>& times, std::uint64_t stream_base,
             int traj, Sink&& sink) {
    CounterRng rng(eng.prm.seed, stream_base + static_cast<std::uint64_t>(traj));
    const PhasePoint pt = sample_point(rng, eng.n, eng.prm.alpha0);
    eng.load(pt);
    cplx a = pt.a;
    sink(0, a);
    double t = times[0];
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        while (t < target) {
            const double h = std::min(eng.dt, target - t);
            if (!(h > 0.0)) break;
            eng.step(a, rng, h);
            t += h;
        }
        t = target;
        sink(k, a);
    }
}

double default_step(const DtwaParams& p, const TimeGrid& grid) {
    const double scale = std::max(p.kappa, p.g * p.n_sites);
    const double dt = scale > 0.0 ? 0.002 / scale : grid.dt();
    return std::min(dt, grid.dt());
}

struct PilotAbort {};

bool pilot_stable(const DtwaParams& p, const TimeGrid& grid, double dt) {
    DtwaEngine eng(p, dt);
    const std::vector<double> times = grid.times();
    try {
        run_one(eng, times, kPilotStream, 0, [&](int, cplx a) {
            if (!eng.in_range(a, 1e6)) throw PilotAbort{};
        });
    } catch (const PilotAbort&) {
        return false;
    }
    return true;
}

double resolve_step(const DtwaParams& p, const TimeGrid& grid) {
    const double base = p.dt > 0.0 ? std::min(p.dt, grid.dt()) : default_step(p, grid);
    double dt = base;
    for (int i = 0; i <= kMaxHalvings; ++i, dt /= 2) {
        if (!pilot_stable(p, grid, dt)) continue;
        if (dt == base) return dt;
        if (p.dt > 0.0)
            throw NumericError("dtwa step " + std::to_string(p.dt) +
                               " is unstable; largest stable pilot step is about " +
                               std::to_string(dt));
        return dt;
    }
    throw NumericError("no stable dtwa step found down to " + std::to_string(dt * 2));
}

} // namespace

DtwaParams DtwaParams::for_rule(const ConstraintRule& rule) {
    if (rule.boundary != Boundary::periodic)
        throw ConfigError("the semiclassical solver assumes a periodic chain");
    DtwaParams p;
    switch (rule.kind) {
    case RuleKind::dicke:
        p.p0 = 1.0;
        break;
    case RuleKind::east:
        p.alpha = 1.0;
        break;
    case RuleKind::and_rule:
        p.gamma = 1.0;
        break;
    case RuleKind::or_rule:
        p.alpha = 1.0;
        p.beta = 1.0;
        p.gamma = -1.0;
        break;
    default:
        throw ConfigError("no phase-space projector form for rule " + rule.name());
    }
    return p;
}

void DtwaParams::validate() const {
    if (n_sites < 1) throw ConfigError("need at least one site");
    for (double v : {p0, alpha, beta, gamma, delta})
        if (!std::isfinite(v)) throw ConfigError("projector and detuning parameters must be finite");
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("g must be nonnegative");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be nonnegative");
    if (!std::isfinite(alpha0.real()) || !std::isfinite(alpha0.imag()))
        throw ConfigError("alpha0 must be finite");
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be nonnegative");
    if (n_traj < 2) throw ConfigError("need at least two trajectories for error bars");
}

PhasePoint sample_initial(const DtwaParams& p, int traj) {
    p.validate();
    CounterRng rng(p.seed, static_cast<std::uint64_t>(traj));
    return sample_point(rng, p.n_sites, p.alpha0);
}

TrajectoryResult run_dtwa(const DtwaParams& p, const TimeGrid& grid) {
    p.validate();
    grid.validate();

    const double dt = resolve_step(p, grid);
    DtwaEngine eng(p, dt);
    const std::vector<double> times = grid.times();
    const int P = grid.n_points;

    const std::vector<const char*> names{"n", "Sz", "Sperp2", "Nadj", "photons"};
    std::vector<std::vector<double>> vals(names.size(),
                                          std::vector<double>(static_cast<std::size_t>(p.n_traj) * P));

    TrajectoryResult out;
    out.grid = grid;
    out.n_traj = p.n_traj;
    out.master_seed = p.seed;

    for (int traj = 0; traj < p.n_traj; ++traj) {
        run_one(eng, times, 0, traj, [&](int k, cplx a) {
            double row[5];
            eng.observe(a, row);
            for (int o = 0; o < 5; ++o) {
                if (!std::isfinite(row[o]))
                    throw NumericError("dtwa trajectory " + std::to_string(traj) +
                                       " diverged by t = " + std::to_string(times[k]) +
                                       "; reduce dt");
                vals[o][static_cast<std::size_t>(traj) * P + k] = row[o];
            }
        });
    }
    detail::reduce_observables(out, vals, names, p.n_traj, P);
    return out;
}

} // namespace kcs
