#include "kcs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kcs/errors.hpp"
#include "kcs/kernels.hpp"
#include "kcs/rng.hpp"
#include "trajectory_reduce.hpp"

namespace kcs {

namespace {

constexpr double kJumpTimeRelTol = 1e-9;
constexpr int kMaxBisect = 80;
constexpr int kSpinSiteCap = 14;
constexpr std::uint32_t kJointDimCap = 1u << 16;
constexpr std::uint64_t kPilotStreamBase = 1ull << 40;

void check_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + " must be finite");
}

void check_rate(double x, const char* what) {
    check_finite(x, what);
    if (x < 0.0) throw ConfigError(std::string(what) + " must be nonnegative");
}

// All nonzero amplitudes in one magnetization sector. F, the site loss and
// both dephasing channels keep such states sector-pure, and on them
// D[S^z] rho vanishes identically (S^z acts as a scalar), so the common
// dephasing channel can be dropped from the unraveling without changing the
// law of any trajectory.
bool sector_pure(const PureState& psi) {
    int m = -1;
    for (std::uint32_t c = 0; c < psi.dim(); ++c) {
        if (psi.amp[c] == cplx(0.0, 0.0)) continue;
        const int pc = __builtin_popcount(c);
        if (m < 0)
            m = pc;
        else if (pc != m)
            return false;
    }
    return true;
}

void normalize_vec(const kernels::Backend& B, std::vector<cplx>& v) {
    const double nn = B.cnorm2(v.size(), v.data());
    if (nn > 0.0) B.cscale(v.size(), cplx(1.0 / std::sqrt(nn), 0.0), v.data());
}

// Channel classes of the effective model, in declaration order: collective
// decay, per-site loss, per-site dephasing, common-mode dephasing. Each class
// owns an exponential clock fed by its integrated rate; the product of the
// per-class survival probabilities equals the squared norm of the
// non-Hermitian evolution, so this samples the standard wait-time unraveling
// while keeping the classes' random draws independent of one another.
struct SpinEngine {
    static constexpr int kChannels = 4;

    int n = 0;
    std::uint32_t dim = 0;
    const kernels::Backend* B = nullptr;
    ConstraintRule rule;
    FTransitions trans;
    cplx ff{};                // multiplier of F^dag F psi in dpsi/dt
    std::vector<cplx> hdiag;  // diagonal multiplier in dpsi/dt
    double gamma = 0.0, gamma_loss = 0.0, gamma_ind = 0.0, gamma_com = 0.0;
    double dt = 0.0;
    std::vector<double> pop, sz2;
    std::vector<double> d_nmean, d_sz, d_nadj, d_ntri;
    std::vector<cplx> f1, k1, k2, k3, k4, stage;

    void rhs(const cplx* psi, cplx* dpsi, double* dlam) {
        std::fill(f1.begin(), f1.end(), cplx(0.0, 0.0));
        for (std::size_t e = 0; e < trans.from.size(); ++e) f1[trans.to[e]] += psi[trans.from[e]];
        double nn2 = 0.0, acc_pop = 0.0, acc_sz2 = 0.0;
        for (std::uint32_t c = 0; c < dim; ++c) {
            const double w = std::norm(psi[c]);
            nn2 += w;
            acc_pop += pop[c] * w;
            acc_sz2 += sz2[c] * w;
            dpsi[c] = hdiag[c] * psi[c];
        }
        for (std::size_t e = 0; e < trans.from.size(); ++e)
            dpsi[trans.from[e]] += ff * f1[trans.to[e]];
        const double inv = nn2 > 0.0 ? 1.0 / nn2 : 0.0;
        dlam[0] = gamma > 0.0 ? gamma * B->cnorm2(dim, f1.data()) * inv : 0.0;
        dlam[1] = gamma_loss > 0.0 ? gamma_loss * acc_pop * inv : 0.0;
        dlam[2] = gamma_ind > 0.0 ? gamma_ind * n : 0.0;
        dlam[3] = gamma_com > 0.0 ? gamma_com * acc_sz2 * inv : 0.0;
    }

    void rk4(cplx* psi, double* lam, double h) {
        double kl1[4], kl2[4], kl3[4], kl4[4];
        rhs(psi, k1.data(), kl1);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h / 2, k1.data(), stage.data());
        rhs(stage.data(), k2.data(), kl2);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h / 2, k2.data(), stage.data());
        rhs(stage.data(), k3.data(), kl3);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h, k3.data(), stage.data());
        rhs(stage.data(), k4.data(), kl4);
        B->caxpy(dim, h / 6, k1.data(), psi);
        B->caxpy(dim, h / 3, k2.data(), psi);
        B->caxpy(dim, h / 3, k3.data(), psi);
        B->caxpy(dim, h / 6, k4.data(), psi);
        for (int c = 0; c < 4; ++c)
            lam[c] += h / 6 * (kl1[c] + 2 * kl2[c] + 2 * kl3[c] + kl4[c]);
    }

    double expect_ff(const cplx* psi) {
        std::fill(f1.begin(), f1.end(), cplx(0.0, 0.0));
        for (std::size_t e = 0; e < trans.from.size(); ++e) f1[trans.to[e]] += psi[trans.from[e]];
        return B->cnorm2(dim, f1.data());
    }

    // psi is normalized on entry; a channel whose instantaneous rate has
    // vanished leaves the state untouched (its clock is rearmed by the
    // caller either way).
    void apply_jump(std::vector<cplx>& psi, int ch, CounterRng& rng) {
        switch (ch) {
        case 0: {
            std::fill(f1.begin(), f1.end(), cplx(0.0, 0.0));
            for (std::size_t e = 0; e < trans.from.size(); ++e)
                f1[trans.to[e]] += psi[trans.from[e]];
            const double nn = B->cnorm2(dim, f1.data());
            if (nn <= 0.0) return;
            const double s = 1.0 / std::sqrt(nn);
            for (std::uint32_t c = 0; c < dim; ++c) psi[c] = s * f1[c];
            return;
        }
        case 1: {
            std::vector<double> w(n, 0.0);
            for (std::uint32_t c = 0; c < dim; ++c) {
                const double p = std::norm(psi[c]);
                for (int j = 0; j < n; ++j)
                    if ((c >> j) & 1u) w[j] += p;
            }
            double tot = 0.0;
            for (double x : w) tot += x;
            if (tot <= 0.0) return;
            const double u = rng.uniform() * tot;
            int site = n - 1;
            double run = 0.0;
            for (int j = 0; j < n; ++j) {
                run += w[j];
                if (u <= run) {
                    site = j;
                    break;
                }
            }
            const std::uint32_t bit = 1u << site;
            std::fill(f1.begin(), f1.end(), cplx(0.0, 0.0));
            for (std::uint32_t c = 0; c < dim; ++c)
                if (c & bit) f1[c ^ bit] = psi[c];
            const double nn = B->cnorm2(dim, f1.data());
            if (nn <= 0.0) return;
            const double s = 1.0 / std::sqrt(nn);
            for (std::uint32_t c = 0; c < dim; ++c) psi[c] = s * f1[c];
            return;
        }
        case 2: {
            int site = static_cast<int>(rng.uniform() * n);
            if (site >= n) site = n - 1;
            const std::uint32_t bit = 1u << site;
            for (std::uint32_t c = 0; c < dim; ++c)
                if (!(c & bit)) psi[c] = -psi[c];
            return;
        }
        default: {
            const double half = n / 2.0;
            for (std::uint32_t c = 0; c < dim; ++c) f1[c] = (__builtin_popcount(c) - half) * psi[c];
            const double nn = B->cnorm2(dim, f1.data());
            if (nn <= 0.0) return;
            const double s = 1.0 / std::sqrt(nn);
            for (std::uint32_t c = 0; c < dim; ++c) psi[c] = s * f1[c];
            return;
        }
        }
    }
};

SpinEngine make_spin_engine(const EffectiveModel& model, int n, bool drop_common, double dt_user,
                            double grid_dt) {
    SpinEngine e;
    e.n = n;
    e.dim = 1u << n;
    e.B = &kernels::active();
    e.rule = model.rule;
    e.trans = build_transitions(model.rule, n);
    e.gamma = model.gamma;
    e.gamma_loss = model.gamma_loss;
    e.gamma_ind = model.gamma_deph_ind;
    e.gamma_com = drop_common ? 0.0 : model.gamma_deph_common;
    e.ff = cplx(-model.gamma / 2.0, -model.chi);

    const std::vector<double> nnn = diag_nnn(n, model.rule.boundary);
    e.hdiag.resize(e.dim);
    e.pop.resize(e.dim);
    e.sz2.resize(e.dim);
    for (std::uint32_t c = 0; c < e.dim; ++c) {
        const int pc = __builtin_popcount(c);
        const double m = pc - n / 2.0;
        e.pop[c] = pc;
        e.sz2[c] = m * m;
        const double damp =
            0.5 * (e.gamma_loss * pc + e.gamma_ind * n + e.gamma_com * m * m);
        e.hdiag[c] = cplx(-damp, -model.v_nnn * nnn[c]);
    }
    e.d_nmean = diag_nmean(n);
    e.d_sz = diag_sz(n);
    e.d_nadj = diag_nadj(n, model.rule.boundary);
    e.d_ntri = diag_ntri(n, model.rule.boundary);

    const double rate_scale = e.gamma + e.gamma_loss + e.gamma_ind + e.gamma_com +
                              std::abs(model.chi) + std::abs(model.v_nnn);
    double dt = dt_user > 0.0 ? dt_user : (rate_scale > 0.0 ? 0.01 / (rate_scale * n) : grid_dt);
    e.dt = std::min(dt, grid_dt);

    e.f1.resize(e.dim);
    e.k1.resize(e.dim);
    e.k2.resize(e.dim);
    e.k3.resize(e.dim);
    e.k4.resize(e.dim);
    e.stage.resize(e.dim);
    return e;
}

// One trajectory of the wait-time unraveling: integrate the non-Hermitian
// flow together with the per-class integrated rates, bisect the first clock
// crossing inside a step, fire that channel, rearm its clock. sink(k, psi) is
// invoked with the normalized state at every grid point.
template <typename Engine, typename Sink>
void run_trajectory(Engine& e, const std::vector<cplx>& init, const std::vector<double>& times,
                    std::uint64_t seed, std::uint64_t stream_base, int traj, Sink&& sink) {
    constexpr int C = Engine::kChannels;
    std::vector<cplx> psi(init);
    normalize_vec(*e.B, psi);

    std::vector<CounterRng> rngs;
    rngs.reserve(C);
    for (int c = 0; c < C; ++c)
        rngs.emplace_back(seed, stream_base + static_cast<std::uint64_t>(traj) * 4 + c);

    double lam[Engine::kChannels], thr[Engine::kChannels];
    double lsave[Engine::kChannels];
    for (int c = 0; c < C; ++c) {
        lam[c] = 0.0;
        thr[c] = -std::log(rngs[c].uniform());
    }
    std::vector<cplx> save(psi.size());

    sink(0, psi);
    double t = times[0];
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        while (t < target) {
            const double h = std::min(e.dt, target - t);
            if (!(h > 0.0)) break;
            std::copy(psi.begin(), psi.end(), save.begin());
            for (int c = 0; c < C; ++c) lsave[c] = lam[c];
            e.rk4(psi.data(), lam, h);
            bool crossed = false;
            for (int c = 0; c < C; ++c) crossed = crossed || lam[c] >= thr[c];
            if (!crossed) {
                t += h;
                continue;
            }
            double lo = 0.0, hi = h;
            for (int it = 0; it < kMaxBisect && hi - lo > kJumpTimeRelTol * h; ++it) {
                const double mid = 0.5 * (lo + hi);
                std::copy(save.begin(), save.end(), psi.begin());
                for (int c = 0; c < C; ++c) lam[c] = lsave[c];
                e.rk4(psi.data(), lam, mid);
                bool mid_crossed = false;
                for (int c = 0; c < C; ++c) mid_crossed = mid_crossed || lam[c] >= thr[c];
                if (mid_crossed)
                    hi = mid;
                else
                    lo = mid;
            }
            std::copy(save.begin(), save.end(), psi.begin());
            for (int c = 0; c < C; ++c) lam[c] = lsave[c];
            e.rk4(psi.data(), lam, hi);
            t += hi;
            int ch = -1;
            double best = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) {
                const double over = lam[c] - thr[c];
                if (over >= 0.0 && over > best) {
                    best = over;
                    ch = c;
                }
            }
            normalize_vec(*e.B, psi);
            if (ch >= 0) {
                e.apply_jump(psi, ch, rngs[ch]);
                lam[ch] = 0.0;
                thr[ch] = -std::log(rngs[ch].uniform());
            }
        }
        t = target;
        normalize_vec(*e.B, psi);
        sink(k, psi);
    }
}

void check_common_entry(const TimeGrid& grid, int n_traj) {
    grid.validate();
    if (n_traj < 1) throw ConfigError("need at least one trajectory");
}

void check_spin_init(const PureState& init) {
    if (init.n_sites < 1) throw ConfigError("initial state is empty");
    if (init.n_sites > kSpinSiteCap)
        throw ResourceError("dense trajectory engine is capped at " +
                            std::to_string(kSpinSiteCap) + " sites");
    if (std::abs(init.norm2() - 1.0) > 1e-9)
        throw ConfigError("initial state must be normalized");
}

struct SpinObs {
    static constexpr int kCount = 6;
    static const char* name(int o) {
        static const char* names[kCount] = {"n", "Sz", "Sperp2", "Nadj", "Ntri", "FdagF"};
        return names[o];
    }
};

void fill_spin_obs(SpinEngine& e, const std::vector<cplx>& psi, double* out) {
    PureState snap;
    snap.n_sites = e.n;
    snap.amp = psi;
    out[0] = expect_diag(e.d_nmean, snap);
    out[1] = expect_diag(e.d_sz, snap);
    out[2] = expect_sperp2(snap);
    out[3] = expect_diag(e.d_nadj, snap);
    out[4] = expect_diag(e.d_ntri, snap);
    out[5] = e.expect_ff(psi.data());
}

using detail::reduce_observables;

} // namespace

void EffectiveModel::validate() const {
    check_rate(gamma, "gamma");
    check_rate(gamma_loss, "gamma_loss");
    check_rate(gamma_deph_ind, "gamma_deph_ind");
    check_rate(gamma_deph_common, "gamma_deph_common");
    check_finite(chi, "chi");
    check_finite(v_nnn, "v_nnn");
}

void FullCavityModel::validate() const {
    check_rate(g, "g");
    check_rate(kappa, "kappa");
    check_finite(delta, "delta");
    if (n_max < 0) throw ConfigError("n_max must be positive, or 0 for automatic selection");
}

void TimeGrid::validate() const {
    check_finite(t_start, "t_start");
    check_finite(t_end, "t_end");
    if (!(t_end > t_start)) throw ConfigError("time grid must be increasing");
    if (n_points < 2) throw ConfigError("time grid needs at least two points");
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> t(n_points);
    const double h = dt();
    for (int i = 0; i < n_points; ++i) t[i] = t_start + i * h;
    t.back() = t_end;
    return t;
}

TrajectoryResult run_quantum_jumps(const EffectiveModel& model, const PureState& init,
                                   const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                   const JumpOptions& opt) {
    model.validate();
    check_common_entry(grid, n_traj);
    check_spin_init(init);

    const bool drop_common = model.gamma_deph_common > 0.0 && sector_pure(init);
    SpinEngine eng = make_spin_engine(model, init.n_sites, drop_common, opt.dt, grid.dt());
    const std::vector<double> times = grid.times();
    const int P = grid.n_points;

    std::vector<const char*> names(SpinObs::kCount);
    for (int o = 0; o < SpinObs::kCount; ++o) names[o] = SpinObs::name(o);
    std::vector<std::vector<double>> vals(SpinObs::kCount,
                                          std::vector<double>(static_cast<std::size_t>(n_traj) * P));

    TrajectoryResult out;
    out.grid = grid;
    out.n_traj = n_traj;
    out.master_seed = seed;
    if (opt.record_states) out.snapshots.assign(n_traj, std::vector<PureState>(P));

    for (int traj = 0; traj < n_traj; ++traj) {
        run_trajectory(eng, init.amp, times, seed, 0, traj, [&](int k, const std::vector<cplx>& psi) {
            double row[SpinObs::kCount];
            fill_spin_obs(eng, psi, row);
            for (int o = 0; o < SpinObs::kCount; ++o)
                vals[o][static_cast<std::size_t>(traj) * P + k] = row[o];
            if (opt.record_states) {
                PureState& snap = out.snapshots[traj][k];
                snap.n_sites = eng.n;
                snap.amp = psi;
            }
        });
    }
    reduce_observables(out, vals, names, n_traj, P);
    return out;
}

DensitySeries run_quantum_jumps_density(const EffectiveModel& model, const PureState& init,
                                        const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                        const std::vector<int>& grid_indices, int n_batches,
                                        const JumpOptions& opt) {
    model.validate();
    check_common_entry(grid, n_traj);
    check_spin_init(init);
    if (n_batches < 1) throw ConfigError("need at least one trajectory batch");
    if (n_traj % n_batches != 0)
        throw ConfigError("trajectory count must divide evenly into batches");

    std::vector<int> idx = grid_indices;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.empty()) throw ConfigError("no grid points selected");
    if (idx.front() < 0 || idx.back() >= grid.n_points)
        throw ConfigError("sampled grid index out of range");

    std::vector<int> slot(grid.n_points, -1);
    for (std::size_t s = 0; s < idx.size(); ++s) slot[idx[s]] = static_cast<int>(s);

    const bool drop_common = model.gamma_deph_common > 0.0 && sector_pure(init);
    SpinEngine eng = make_spin_engine(model, init.n_sites, drop_common, opt.dt, grid.dt());
    const std::vector<double> times = grid.times();
    const int block = n_traj / n_batches;

    DensitySeries out;
    out.grid = grid;
    out.grid_indices = idx;
    out.n_traj = n_traj;
    out.batches.resize(n_batches);
    for (auto& row : out.batches) {
        row.reserve(idx.size());
        for (std::size_t s = 0; s < idx.size(); ++s) row.push_back(DensityMatrix::zero(eng.n));
    }

    for (int traj = 0; traj < n_traj; ++traj) {
        const int b = traj / block;
        run_trajectory(eng, init.amp, times, seed, 0, traj, [&](int k, const std::vector<cplx>& psi) {
            const int s = slot[k];
            if (s < 0) return;
            Eigen::Map<const Eigen::VectorXcd> v(psi.data(), static_cast<Eigen::Index>(psi.size()));
            out.batches[b][s].rho.noalias() += v * v.adjoint();
        });
    }
    for (auto& row : out.batches)
        for (auto& dm : row) {
            dm.rho /= static_cast<double>(block);
            dm.rho = (0.5 * (dm.rho + dm.rho.adjoint())).eval();
            dm.validate(false);
        }
    return out;
}

DensityMatrix DensitySeries::combined(int sample) const {
    if (batches.empty() || sample < 0 || sample >= static_cast<int>(batches.front().size()))
        throw ConfigError("sample index out of range");
    DensityMatrix out = DensityMatrix::zero(batches.front()[sample].n_sites);
    for (const auto& row : batches) out.rho += row[sample].rho;
    out.rho /= static_cast<double>(batches.size());
    out.validate(false);
    return out;
}

PureState propagate_nh(const EffectiveModel& model, const PureState& init, double t, double dt) {
    model.validate();
    check_finite(t, "propagation time");
    if (t < 0.0) throw ConfigError("propagation time must be nonnegative");
    if (init.n_sites < 1) throw ConfigError("initial state is empty");
    if (init.n_sites > kSpinSiteCap)
        throw ResourceError("dense trajectory engine is capped at " +
                            std::to_string(kSpinSiteCap) + " sites");

    const double fallback = t > 0.0 ? t : 1.0;
    SpinEngine eng = make_spin_engine(model, init.n_sites, false, dt, fallback);
    std::vector<cplx> psi(init.amp);
    double lam[4] = {0.0, 0.0, 0.0, 0.0};
    double cur = 0.0;
    while (cur < t) {
        const double h = std::min(eng.dt, t - cur);
        if (!(h > 0.0)) break;
        eng.rk4(psi.data(), lam, h);
        cur += h;
    }
    PureState out;
    out.n_sites = init.n_sites;
    out.amp = std::move(psi);
    return out;
}

namespace {

struct MasterOps {
    Eigen::MatrixXcd h_eff;
    std::vector<Eigen::MatrixXcd> ls;
};

MasterOps build_master_ops(const EffectiveModel& model, int n) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    const FTransitions tr = build_transitions(model.rule, n);
    Eigen::MatrixXcd fmat = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t e = 0; e < tr.from.size(); ++e) fmat(tr.to[e], tr.from[e]) += 1.0;
    const Eigen::MatrixXcd ffm = fmat.adjoint() * fmat;

    Eigen::MatrixXcd ham = model.chi * ffm;
    const std::vector<double> nnn = diag_nnn(n, model.rule.boundary);
    for (Eigen::Index c = 0; c < dim; ++c) ham(c, c) += model.v_nnn * nnn[c];

    MasterOps ops;
    Eigen::MatrixXcd sum_ldl = model.gamma * ffm;
    if (model.gamma > 0.0) ops.ls.push_back(std::sqrt(model.gamma) * fmat);
    if (model.gamma_loss > 0.0) {
        for (int j = 0; j < n; ++j) {
            Eigen::MatrixXcd lower = Eigen::MatrixXcd::Zero(dim, dim);
            const Eigen::Index bit = Eigen::Index(1) << j;
            for (Eigen::Index c = 0; c < dim; ++c)
                if (c & bit) lower(c ^ bit, c) = 1.0;
            sum_ldl += model.gamma_loss * (lower.adjoint() * lower);
            ops.ls.push_back(std::sqrt(model.gamma_loss) * lower);
        }
    }
    if (model.gamma_deph_ind > 0.0) {
        for (int j = 0; j < n; ++j) {
            Eigen::MatrixXcd zop = Eigen::MatrixXcd::Zero(dim, dim);
            const Eigen::Index bit = Eigen::Index(1) << j;
            for (Eigen::Index c = 0; c < dim; ++c) zop(c, c) = (c & bit) ? 1.0 : -1.0;
            sum_ldl += model.gamma_deph_ind * Eigen::MatrixXcd::Identity(dim, dim);
            ops.ls.push_back(std::sqrt(model.gamma_deph_ind) * zop);
        }
    }
    if (model.gamma_deph_common > 0.0) {
        Eigen::MatrixXcd szop = Eigen::MatrixXcd::Zero(dim, dim);
        for (Eigen::Index c = 0; c < dim; ++c)
            szop(c, c) = __builtin_popcount(static_cast<std::uint32_t>(c)) - n / 2.0;
        sum_ldl += model.gamma_deph_common * (szop * szop);
        ops.ls.push_back(std::sqrt(model.gamma_deph_common) * szop);
    }
    ops.h_eff = ham - cplx(0.0, 0.5) * sum_ldl;
    return ops;
}

Eigen::MatrixXcd master_rhs_ops(const MasterOps& ops, const Eigen::MatrixXcd& rho) {
    Eigen::MatrixXcd out = cplx(0.0, -1.0) * (ops.h_eff * rho - rho * ops.h_eff.adjoint());
    for (const auto& l : ops.ls) out += l * rho * l.adjoint();
    return out;
}

Eigen::MatrixXcd master_rk4(const MasterOps& ops, const Eigen::MatrixXcd& rho, double h) {
    const Eigen::MatrixXcd r1 = master_rhs_ops(ops, rho);
    const Eigen::MatrixXcd r2 = master_rhs_ops(ops, rho + (h / 2) * r1);
    const Eigen::MatrixXcd r3 = master_rhs_ops(ops, rho + (h / 2) * r2);
    const Eigen::MatrixXcd r4 = master_rhs_ops(ops, rho + h * r3);
    return rho + (h / 6) * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
}

// Step-doubling RK4 with Richardson extrapolation, as in the rate-equation
// integrator.
void master_advance(const MasterOps& ops, Eigen::MatrixXcd& rho, double t0, double t1, double& h) {
    double t = t0;
    while (t < t1) {
        const double step = std::min(h, t1 - t);
        if (!(step > 0.0)) break;
        const Eigen::MatrixXcd full = master_rk4(ops, rho, step);
        const Eigen::MatrixXcd half = master_rk4(ops, rho, step / 2);
        const Eigen::MatrixXcd two = master_rk4(ops, half, step / 2);
        const double err = (two - full).cwiseAbs().maxCoeff();
        const double tol = 1e-12 + 1e-11 * two.cwiseAbs().maxCoeff();
        if (err <= tol || step <= 1e-13 * std::max(1.0, std::abs(t))) {
            rho = two + (two - full) / 15.0;
            t += step;
            const double grow = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
            h = step * std::clamp(grow, 0.2, 5.0);
        } else {
            h = step * std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 0.9);
        }
    }
}

} // namespace

std::vector<DensityMatrix> evolve_master_exact(const EffectiveModel& model,
                                               const DensityMatrix& rho0, const TimeGrid& grid) {
    model.validate();
    grid.validate();
    if (rho0.n_sites > 8) throw ResourceError("dense master oracle is capped at 8 sites");
    rho0.validate(false);

    const MasterOps ops = build_master_ops(model, rho0.n_sites);
    const std::vector<double> times = grid.times();

    std::vector<DensityMatrix> series;
    series.reserve(times.size());
    series.push_back(rho0);

    Eigen::MatrixXcd rho = rho0.rho;
    double h = grid.dt();
    for (std::size_t k = 1; k < times.size(); ++k) {
        master_advance(ops, rho, times[k - 1], times[k], h);
        DensityMatrix dm;
        dm.n_sites = rho0.n_sites;
        dm.rho = 0.5 * (rho + rho.adjoint());
        series.push_back(std::move(dm));
    }
    return series;
}

Eigen::MatrixXcd master_rhs(const EffectiveModel& model, const Eigen::MatrixXcd& rho) {
    model.validate();
    const Eigen::Index dim = rho.rows();
    if (dim != rho.cols() || dim < 2 || (dim & (dim - 1)) != 0)
        throw ConfigError("master_rhs: matrix must be square with power-of-two size");
    int n = 0;
    while ((Eigen::Index(1) << n) < dim) ++n;
    if (n > 8) throw ResourceError("dense master oracle is capped at 8 sites");
    return master_rhs_ops(build_master_ops(model, n), rho);
}

namespace {

struct CavityEngine {
    static constexpr int kChannels = 1;

    int n = 0, nmax = 0;
    std::uint32_t sdim = 0, dim = 0;
    const kernels::Backend* B = nullptr;
    double g = 0.0, kappa = 0.0, delta = 0.0;
    bool rwa = true;
    FTransitions trans;
    std::vector<double> sq;
    double dt = 0.0;
    std::vector<double> d_nmean, d_sz, d_nadj, d_ntri;
    std::vector<cplx> f1, k1, k2, k3, k4, stage, fblock;

    void rhs(const cplx* psi, cplx* dpsi, double* dlam) {
        double nn2 = 0.0, acc_ph = 0.0;
        for (int ph = 0; ph <= nmax; ++ph) {
            const std::size_t off = static_cast<std::size_t>(ph) * sdim;
            const double bn = B->cnorm2(sdim, psi + off);
            nn2 += bn;
            acc_ph += ph * bn;
            const cplx coef(-kappa * ph / 2.0, -delta * ph);
            for (std::uint32_t s = 0; s < sdim; ++s) dpsi[off + s] = coef * psi[off + s];
        }
        for (int ph = 0; ph < nmax; ++ph) {
            const std::size_t off = static_cast<std::size_t>(ph) * sdim;
            const std::size_t off1 = off + sdim;
            const cplx mic(0.0, -g * sq[ph]);
            for (std::size_t e = 0; e < trans.from.size(); ++e) {
                dpsi[off + trans.from[e]] += mic * psi[off1 + trans.to[e]];
                dpsi[off1 + trans.to[e]] += mic * psi[off + trans.from[e]];
            }
            if (!rwa) {
                for (std::size_t e = 0; e < trans.from.size(); ++e) {
                    dpsi[off + trans.to[e]] += mic * psi[off1 + trans.from[e]];
                    dpsi[off1 + trans.from[e]] += mic * psi[off + trans.to[e]];
                }
            }
        }
        dlam[0] = (kappa > 0.0 && nn2 > 0.0) ? kappa * acc_ph / nn2 : 0.0;
    }

    void rk4(cplx* psi, double* lam, double h) {
        double kl1[1], kl2[1], kl3[1], kl4[1];
        rhs(psi, k1.data(), kl1);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h / 2, k1.data(), stage.data());
        rhs(stage.data(), k2.data(), kl2);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h / 2, k2.data(), stage.data());
        rhs(stage.data(), k3.data(), kl3);
        std::copy_n(psi, dim, stage.data());
        B->caxpy(dim, h, k3.data(), stage.data());
        rhs(stage.data(), k4.data(), kl4);
        B->caxpy(dim, h / 6, k1.data(), psi);
        B->caxpy(dim, h / 3, k2.data(), psi);
        B->caxpy(dim, h / 3, k3.data(), psi);
        B->caxpy(dim, h / 6, k4.data(), psi);
        lam[0] += h / 6 * (kl1[0] + 2 * kl2[0] + 2 * kl3[0] + kl4[0]);
    }

    void apply_jump(std::vector<cplx>& psi, int, CounterRng&) {
        std::fill(f1.begin(), f1.end(), cplx(0.0, 0.0));
        for (int ph = 0; ph < nmax; ++ph) {
            const std::size_t off = static_cast<std::size_t>(ph) * sdim;
            for (std::uint32_t s = 0; s < sdim; ++s) f1[off + s] = sq[ph] * psi[off + sdim + s];
        }
        const double nn = B->cnorm2(dim, f1.data());
        if (nn <= 0.0) return;
        const double s = 1.0 / std::sqrt(nn);
        for (std::uint32_t i = 0; i < dim; ++i) psi[i] = s * f1[i];
    }

    double top_population(const std::vector<cplx>& psi) const {
        const std::size_t off = static_cast<std::size_t>(nmax) * sdim;
        const double total = B->cnorm2(dim, psi.data());
        if (total <= 0.0) return 0.0;
        return B->cnorm2(sdim, psi.data() + off) / total;
    }
};

CavityEngine make_cavity_engine(const FullCavityModel& model, int n, int nmax, double dt_user,
                                double grid_dt) {
    CavityEngine e;
    e.n = n;
    e.nmax = nmax;
    e.sdim = 1u << n;
    e.dim = e.sdim * static_cast<std::uint32_t>(nmax + 1);
    e.B = &kernels::active();
    e.g = model.g;
    e.kappa = model.kappa;
    e.delta = model.delta;
    e.rwa = model.rwa;
    e.trans = build_transitions(model.rule, n);
    e.sq.resize(nmax);
    for (int ph = 0; ph < nmax; ++ph) e.sq[ph] = std::sqrt(ph + 1.0);
    e.d_nmean = diag_nmean(n);
    e.d_sz = diag_sz(n);
    e.d_nadj = diag_nadj(n, model.rule.boundary);
    e.d_ntri = diag_ntri(n, model.rule.boundary);

    const double scale =
        e.kappa + std::abs(e.delta) + e.g * n * std::sqrt(static_cast<double>(nmax + 1));
    double dt = dt_user > 0.0 ? dt_user : (scale > 0.0 ? 0.01 / scale : grid_dt);
    e.dt = std::min(dt, grid_dt);

    e.f1.resize(e.dim);
    e.k1.resize(e.dim);
    e.k2.resize(e.dim);
    e.k3.resize(e.dim);
    e.k4.resize(e.dim);
    e.stage.resize(e.dim);
    e.fblock.resize(e.sdim);
    return e;
}

std::vector<cplx> cavity_init(const CavityEngine& e) {
    std::vector<cplx> psi(e.dim, cplx(0.0, 0.0));
    psi[e.sdim - 1] = 1.0;  // fully-up spins, cavity vacuum
    return psi;
}

struct CavityObsRow {
    static constexpr int kCount = 7;
    static const char* name(int o) {
        static const char* names[kCount] = {"n", "Sz", "Sperp2", "Nadj", "Ntri", "FdagF", "photons"};
        return names[o];
    }
};

void fill_cavity_obs(CavityEngine& e, const std::vector<cplx>& psi, double* out) {
    for (int o = 0; o < CavityObsRow::kCount; ++o) out[o] = 0.0;
    PureState block;
    block.n_sites = e.n;
    block.amp.resize(e.sdim);
    for (int ph = 0; ph <= e.nmax; ++ph) {
        const std::size_t off = static_cast<std::size_t>(ph) * e.sdim;
        std::copy_n(psi.data() + off, e.sdim, block.amp.begin());
        out[0] += expect_diag(e.d_nmean, block);
        out[1] += expect_diag(e.d_sz, block);
        out[2] += expect_sperp2(block);
        out[3] += expect_diag(e.d_nadj, block);
        out[4] += expect_diag(e.d_ntri, block);
        std::fill(e.fblock.begin(), e.fblock.end(), cplx(0.0, 0.0));
        for (std::size_t t = 0; t < e.trans.from.size(); ++t)
            e.fblock[e.trans.to[t]] += block.amp[e.trans.from[t]];
        out[5] += e.B->cnorm2(e.sdim, e.fblock.data());
        out[6] += ph * e.B->cnorm2(e.sdim, block.amp.data());
    }
}

int resolve_fock_levels(const FullCavityModel& model, int n, const TimeGrid& grid, int n_traj,
                        std::uint64_t seed, double dt_user) {
    if (model.n_max >= 1) return model.n_max;
    const std::vector<double> times = grid.times();
    for (int nm = 4;; nm *= 2) {
        if ((static_cast<std::uint32_t>(nm) + 1) * (1u << n) > kJointDimCap)
            throw ResourceError("automatic Fock truncation exceeded the dense ceiling");
        CavityEngine eng = make_cavity_engine(model, n, nm, dt_user, grid.dt());
        const std::vector<cplx> init = cavity_init(eng);
        double worst = 0.0;
        const int pilots = std::min(4, n_traj);
        for (int traj = 0; traj < pilots; ++traj) {
            run_trajectory(eng, init, times, seed, kPilotStreamBase, traj,
                           [&](int, const std::vector<cplx>& psi) {
                               worst = std::max(worst, eng.top_population(psi));
                           });
        }
        if (worst < 1e-6) return nm;
    }
}

} // namespace

TrajectoryResult run_full_cavity(const FullCavityModel& model, int n_sites, const TimeGrid& grid,
                                 int n_traj, std::uint64_t seed, const JumpOptions& opt) {
    model.validate();
    check_common_entry(grid, n_traj);
    if (n_sites < 1) throw ConfigError("need at least one site");
    if (n_sites > kSpinSiteCap)
        throw ResourceError("dense trajectory engine is capped at " +
                            std::to_string(kSpinSiteCap) + " sites");
    if (model.n_max >= 1 &&
        (static_cast<std::uint32_t>(model.n_max) + 1) * (1u << n_sites) > kJointDimCap)
        throw ResourceError("joint spin-cavity space exceeds the dense ceiling");

    const int nmax = resolve_fock_levels(model, n_sites, grid, n_traj, seed, opt.dt);
    CavityEngine eng = make_cavity_engine(model, n_sites, nmax, opt.dt, grid.dt());
    const std::vector<cplx> init = cavity_init(eng);
    const std::vector<double> times = grid.times();
    const int P = grid.n_points;

    std::vector<const char*> names(CavityObsRow::kCount);
    for (int o = 0; o < CavityObsRow::kCount; ++o) names[o] = CavityObsRow::name(o);
    std::vector<std::vector<double>> vals(
        CavityObsRow::kCount, std::vector<double>(static_cast<std::size_t>(n_traj) * P));

    TrajectoryResult out;
    out.grid = grid;
    out.n_traj = n_traj;
    out.master_seed = seed;
    out.n_max_used = nmax;

    for (int traj = 0; traj < n_traj; ++traj) {
        run_trajectory(eng, init, times, seed, 0, traj, [&](int k, const std::vector<cplx>& psi) {
            const double top = eng.top_population(psi);
            if (top > 1e-4)
                throw ConfigError("top Fock level holds population " + std::to_string(top) +
                                  "; raise n_max");
            double row[CavityObsRow::kCount];
            fill_cavity_obs(eng, psi, row);
            for (int o = 0; o < CavityObsRow::kCount; ++o)
                vals[o][static_cast<std::size_t>(traj) * P + k] = row[o];
        });
    }
    reduce_observables(out, vals, names, n_traj, P);
    return out;
}

DensityMatrix reconstruct_density(const std::vector<PureState>& snapshots) {
    if (snapshots.empty()) throw ConfigError("reconstruction needs at least one state");
    const int n = snapshots.front().n_sites;
    if (n > 12) throw ResourceError("density reconstruction is capped at 12 sites");
    DensityMatrix out = DensityMatrix::zero(n);
    for (const auto& snap : snapshots) {
        if (snap.n_sites != n) throw ConfigError("snapshot site counts disagree");
        const double nn = snap.norm2();
        if (nn <= 0.0) throw ConfigError("snapshot has zero norm");
        Eigen::Map<const Eigen::VectorXcd> v(snap.amp.data(),
                                             static_cast<Eigen::Index>(snap.amp.size()));
        out.rho.noalias() += (v * v.adjoint()) / nn;
    }
    out.rho /= static_cast<double>(snapshots.size());
    out.rho = (0.5 * (out.rho + out.rho.adjoint())).eval();
    out.validate(true);
    return out;
}

std::optional<double> prep_time(const std::vector<double>& t, const std::vector<double>& y,
                                double stationary_value, double fraction) {
    if (t.size() != y.size() || t.empty())
        throw ConfigError("prep_time: time and value series must match and be nonempty");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ConfigError("prep_time: fraction must lie in (0, 1]");
    check_finite(stationary_value, "stationary value");

    const double target = y.front() + fraction * (stationary_value - y.front());
    const double dir = (stationary_value >= y.front()) ? 1.0 : -1.0;
    if (dir * (y.front() - target) >= 0.0) return t.front();
    for (std::size_t i = 1; i < y.size(); ++i) {
        if (dir * (y[i] - target) >= 0.0) {
            const double dy = y[i] - y[i - 1];
            if (dir * dy <= 0.0) return t[i];
            return t[i - 1] + (target - y[i - 1]) / dy * (t[i] - t[i - 1]);
        }
    }
    return std::nullopt;
}

} // namespace kcs
