// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line with the measured numbers. Exits nonzero
// if any selected criterion fails. Run with no arguments for the full gate,
// or pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "kcs/click_limit.hpp"
#include "kcs/dark_manifold.hpp"
#include "kcs/density_matrix.hpp"
#include "kcs/dtwa.hpp"
#include "kcs/dynamics.hpp"
#include "kcs/entanglement.hpp"
#include "kcs/model_reduction.hpp"
#include "kcs/rng.hpp"
#include "kcs/spin_algebra.hpp"

using namespace kcs;

namespace {

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXcd dense_F(const ConstraintRule& rule, int n) {
    const auto trans = build_transitions(rule, n);
    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t i = 0; i < trans.from.size(); ++i)
        F(trans.to[i], trans.from[i]) += 1.0;
    return F;
}

double series_max(const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end());
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= static_cast<double>(x.size());
    ym /= static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - xm) * (y[i] - ym);
        den += (x[i] - xm) * (x[i] - xm);
    }
    return num / den;
}

// 1. Constrained pair-placement cascade: layer norms against the counting
//    closed form log[(k!)^2 * placements].
Outcome crit_and_counting() {
    double worst = 0.0;
    for (int n = 6; n <= 20; ++n) {
        const int k_max = n / 2;
        const auto sp = layer_spectrum(ConstraintRule::and_rule(), n, k_max);
        for (int k = 0; k <= k_max; ++k) {
            const double expect =
                2.0 * std::lgamma(k + 1.0) + std::log(static_cast<double>(and_count(n, k)));
            const double dev =
                std::abs(sp.log_norms[k] - expect) / std::max(1.0, std::abs(expect));
            worst = std::max(worst, dev);
        }
    }
    return {worst <= 1e-9, strf("max relative deviation %.3g (tol 1e-9)", worst)};
}

// 2. Universal intensity floor (k+1)[N-(2w+1)k] for the named window-1 rules
//    up to N=16 and for 50 seeded random boolean tables with w in {1,2}.
Outcome crit_intensity_floor() {
    double min_margin = 1e300;
    int layers = 0;
    for (int n = 6; n <= 16; n += 2)
        for (const auto& rule : {ConstraintRule::east(), ConstraintRule::and_rule(),
                                 ConstraintRule::or_rule()}) {
            const auto rep = verify_bound(rule, n);
            min_margin = std::min(min_margin, rep.min_margin);
            layers += static_cast<int>(rep.k.size());
        }
    CounterRng rng(20240601, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 1 + static_cast<int>(rng.next_u32() & 1u);
        const int n = 8 + static_cast<int>(rng.next_u32() % 5u);
        std::vector<std::uint8_t> table(std::size_t{1} << (2 * w));
        for (auto& e : table) e = static_cast<std::uint8_t>(rng.next_u32() & 1u);
        table.back() = 1;
        const auto rep = verify_bound(ConstraintRule::custom(w, std::move(table)), n);
        min_margin = std::min(min_margin, rep.min_margin);
        layers += static_cast<int>(rep.k.size());
    }
    return {min_margin >= -1e-9,
            strf("%d layers checked, min margin %.3g (violation below -1e-9)", layers, min_margin)};
}

// 3. Unconstrained collective ladder: intensities equal (k+1)(N-k).
Outcome crit_dicke_ladder() {
    double worst = 0.0;
    for (int n = 2; n <= 20; ++n) {
        const auto sp = layer_spectrum(ConstraintRule::dicke(), n, n);
        for (int k = 0; k < n; ++k) {
            const double expect = (k + 1.0) * (n - k);
            worst = std::max(worst, std::abs(sp.intensities[k] - expect) / expect);
        }
    }
    return {worst <= 1e-9, strf("max relative deviation %.3g (tol 1e-9)", worst)};
}

// 4. Quarter-filling intensity of the pair cascade approaches N^2/12.
Outcome crit_scaling_function() {
    double worst_excess = -1e300;
    std::string detail;
    bool pass = true;
    for (int n : {40, 80, 160, 400}) {
        const double val = and_intensity(n, n / 4) / (static_cast<double>(n) * n);
        const double dev = std::abs(val - 1.0 / 12.0);
        const double tol = 2.0 / n;
        pass = pass && dev <= tol;
        worst_excess = std::max(worst_excess, dev - tol);
        detail += strf("%sN=%d dev %.2e/tol %.2e", detail.empty() ? "" : ", ", n, dev, tol);
    }
    return {pass, detail};
}

// 5. Time to drain the first 1/N of the density grows by ln 10 per decade.
Outcome crit_entry_time() {
    const double n_star = g_and_maximizer();
    const double t2 = quadrature_time(n_star, 1.0 - 1e-2);
    const double t3 = quadrature_time(n_star, 1.0 - 1e-3);
    const double t4 = quadrature_time(n_star, 1.0 - 1e-4);
    const double ln10 = std::log(10.0);
    const double d1 = t3 - t2, d2 = t4 - t3;
    const bool pass = std::abs(d1 - ln10) <= 0.05 * ln10 && std::abs(d2 - ln10) <= 0.05 * ln10;
    return {pass, strf("decade steps %.4f, %.4f vs ln10 = %.4f (tol 5%%)", d1, d2, ln10)};
}

// 6. Generator identity d<Sz>/dt = -gamma <FdagF> on the dense master flow.
Outcome crit_population_identity() {
    const int n = 6;
    EffectiveModel m;
    m.rule = ConstraintRule::east();
    m.gamma = 1.0;
    const TimeGrid grid{0.0, 6.0, 61};
    const auto rhos = evolve_master_exact(m, DensityMatrix::pure(PureState::all_up(n)), grid);
    const auto F = dense_F(m.rule, n);
    const Eigen::MatrixXcd FdF = F.adjoint() * F;
    const auto sz = diag_sz(n);
    double worst = 0.0;
    for (const auto& rho : rhos) {
        const Eigen::MatrixXcd rhs = master_rhs(m, rho.rho);
        double dsz = 0.0;
        for (Eigen::Index c = 0; c < rhs.rows(); ++c) dsz += sz[c] * rhs(c, c).real();
        const double fdagf = (rho.rho * FdF).trace().real();
        worst = std::max(worst, std::abs(dsz + m.gamma * fdagf));
    }
    return {worst < 1e-6, strf("max |d<Sz>/dt + gamma<FdagF>| = %.3g (tol 1e-6)", worst)};
}

// 7. Joint spin-cavity trajectories against the eliminated model, strongly
//    damped cavity, automatic Fock truncation.
Outcome crit_elimination_consistency() {
    const int n = 4;
    FullCavityModel fc;
    fc.rule = ConstraintRule::east();
    fc.g = 1.0;
    fc.kappa = 40.0;
    fc.delta = 0.0;
    fc.n_max = 0;
    const TimeGrid grid{0.0, 40.0, 21};
    const auto full = run_full_cavity(fc, n, grid, 400, 101);

    CavityParams cp;
    cp.g = fc.g;
    cp.kappa = fc.kappa;
    cp.delta = fc.delta;
    cp.n_atoms = n;
    const auto rates = eliminate_cavity(cp);
    EffectiveModel em;
    em.rule = fc.rule;
    em.gamma = rates.gamma;
    em.chi = rates.chi;
    const auto eff = run_quantum_jumps(em, PureState::all_up(n), grid, 400, 202);

    const auto& nf = full.observables.at("n").mean;
    const auto& ne = eff.observables.at("n").mean;
    double worst = 0.0;
    for (std::size_t i = 0; i < nf.size(); ++i) worst = std::max(worst, std::abs(nf[i] - ne[i]));
    return {worst < 0.05, strf("max |<n>_full - <n>_eff| = %.4f (tol 0.05), Fock cut %d", worst,
                               full.n_max_used)};
}

// 8. Two-atom closed forms: unconstrained pair cascade mean, and the steered
//    facilitated pair landing on a maximally entangled state.
Outcome crit_two_atom() {
    EffectiveModel dicke2;
    dicke2.rule = ConstraintRule::dicke();
    dicke2.gamma = 1.0;
    // Two decades of decay; past t ~ 2.5 fewer than ~40 of the 1000
    // trajectories survive and the sample SEM is no longer a sound gate.
    const TimeGrid g1{0.0, 2.5, 21};
    const auto r = run_quantum_jumps(dicke2, PureState::all_up(2), g1, 1000, 303);
    const auto times = g1.times();
    const auto& nm = r.observables.at("n").mean;
    const auto& ns = r.observables.at("n").sem;
    double worst_pull = 0.0;
    bool pass = true;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double analytic = std::exp(-2.0 * times[i]) * (1.0 + times[i]);
        const double dev = std::abs(nm[i] - analytic);
        if (dev > 3.0 * ns[i] + 1e-12) pass = false;
        if (ns[i] > 0.0) worst_pull = std::max(worst_pull, dev / ns[i]);
    }

    EffectiveModel east2;
    east2.rule = ConstraintRule::east();
    east2.gamma = 1.0;
    const TimeGrid g2{0.0, 25.0, 6};
    const auto ds =
        run_quantum_jumps_density(east2, PureState::all_up(2), g2, 1000, 404, {5}, 1);
    const auto rho = ds.combined(0);
    const double en = log_negativity(rho, Bipartition::half(2));
    const auto nmean = diag_nmean(2);
    double nbar = 0.0;
    for (Eigen::Index c = 0; c < rho.rho.rows(); ++c) nbar += nmean[c] * rho.rho(c, c).real();
    const double ln2 = std::log(2.0);
    pass = pass && std::abs(en - ln2) <= 0.05 && std::abs(nbar - 0.5) <= 0.02;
    return {pass, strf("cascade worst pull %.2f sem; pair E_N = %.4f (ln2 +- 0.05), <n> = %.4f "
                       "(0.5 +- 0.02)",
                       worst_pull, en, nbar)};
}

// 9. Constructed dark packets span the sector-wise nullspace, independent-set
//    counting matches, and the pinned window packets keep their printed form.
Outcome crit_dark_manifold() {
    const auto b = Boundary::periodic;
    const auto rule = ConstraintRule::east(b);
    double worst_res = 0.0;
    for (int n = 4; n <= 10; ++n) {
        const auto basis = kernel_basis(rule, n);
        const auto packets = east_packet_spanning_set(n, b);

        std::map<int, std::vector<const PureState*>> by_sector;
        for (const auto& p : packets) {
            int pop = -1;
            for (std::uint32_t c = 0; c < p.dim(); ++c)
                if (std::abs(p.amp[c]) > 1e-12) {
                    pop = __builtin_popcount(c);
                    break;
                }
            if (pop >= 0) by_sector[pop].push_back(&p);
        }

        for (int m = 0; m <= n; ++m) {
            std::size_t kernel_dim = 0;
            std::vector<const PureState*> kvecs;
            for (std::size_t i = 0; i < basis.size(); ++i)
                if (basis.sector[i] == m) {
                    ++kernel_dim;
                    kvecs.push_back(&basis.vectors[i]);
                }
            std::size_t span_dim = 0;
            const auto it = by_sector.find(m);
            if (it != by_sector.end()) {
                const auto configs = sector_configs(n, m);
                Eigen::MatrixXcd mat(static_cast<Eigen::Index>(configs.size()),
                                     static_cast<Eigen::Index>(it->second.size()));
                for (std::size_t col = 0; col < it->second.size(); ++col) {
                    const auto& p = *it->second[col];
                    const double nrm = std::sqrt(p.norm2());
                    for (std::size_t row = 0; row < configs.size(); ++row)
                        mat(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                            p.amp[configs[row]] / nrm;
                }
                Eigen::BDCSVD<Eigen::MatrixXcd> svd(mat);
                const auto& sv = svd.singularValues();
                for (Eigen::Index i = 0; i < sv.size(); ++i)
                    if (sv(i) > 1e-8 * sv(0)) ++span_dim;

                for (const auto* pp : it->second) {
                    const auto& p = *pp;
                    const double nrm = std::sqrt(p.norm2());
                    std::vector<cplx> rem(p.dim());
                    for (std::uint32_t c = 0; c < p.dim(); ++c) rem[c] = p.amp[c] / nrm;
                    for (const auto* kv : kvecs) {
                        cplx ov = 0.0;
                        for (std::uint32_t c = 0; c < p.dim(); ++c)
                            ov += std::conj(kv->amp[c]) * rem[c];
                        for (std::uint32_t c = 0; c < p.dim(); ++c) rem[c] -= ov * kv->amp[c];
                    }
                    double res2 = 0.0;
                    for (const auto& x : rem) res2 += std::norm(x);
                    worst_res = std::max(worst_res, std::sqrt(res2));
                }
            }
            if (span_dim != kernel_dim)
                return {false, strf("N=%d sector %d: span %zu vs kernel %zu", n, m, span_dim,
                                    kernel_dim)};
        }

        std::size_t n_bit = 0;
        for (const auto lbl : basis.labels)
            if (lbl == DarkClass::bitstring) ++n_bit;
        const auto indep = enumerate_bitstring_dark(n, b).size();
        if (n_bit != indep)
            return {false,
                    strf("N=%d bitstring count %zu vs independent sets %zu", n, n_bit, indep)};
    }
    if (worst_res >= 1e-8) return {false, strf("worst projection residual %.3g", worst_res)};

    // Pinned window packets, fixed up to one global sign.
    const auto w2 = build_omega(2, 5);
    const auto w3 = build_omega(3, 7);
    const auto ref2 = std::map<std::string, double>{{"11010", 1.0}, {"10011", -1.0}};
    const auto ref3 = std::map<std::string, double>{{"1110100", 1.0},
                                                    {"1000111", 1.0},
                                                    {"1100101", -1.0},
                                                    {"1010110", -1.0},
                                                    {"1100110", -1.0}};
    for (const auto& [w, ref] : {std::pair{&w2, &ref2}, std::pair{&w3, &ref3}}) {
        const double a0 = w->amp[SpinConfig::from_string(ref->begin()->first).bits].real();
        const double s = (a0 * ref->begin()->second > 0) ? 1.0 : -1.0;
        double listed = 0.0;
        for (const auto& [cfg, a] : *ref) {
            const auto c = SpinConfig::from_string(cfg).bits;
            if (std::abs(w->amp[c] * s - a) > 1e-10)
                return {false, strf("window packet amplitude at %s is %.6f, want %.0f",
                                    cfg.c_str(), w->amp[c].real() * s, a)};
            listed += std::norm(w->amp[c]);
        }
        double total = 0.0;
        for (const auto& a : w->amp) total += std::norm(a);
        if (std::abs(total - listed) > 1e-9)
            return {false, strf("window packet carries %.3g weight off the printed support",
                                total - listed)};
    }
    return {true, strf("sectors match for N=4..10, worst residual %.3g, window packets pinned",
                       worst_res)};
}

// 10. Adjacency witness: product dark states give exactly zero adjacent
//     pairs, the two-branch packet certifies entanglement.
Outcome crit_witness() {
    const int n = 8;
    const auto rule = ConstraintRule::east();
    const auto nadj = diag_nadj(n, Boundary::periodic);
    CounterRng rng(42, 7);
    const auto rot1 = [n](std::uint32_t s) {
        return ((s << 1) | (s >> (n - 1))) & ((1u << n) - 1u);
    };
    int exact_zero = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::uint32_t support;
        do {
            support = rng.next_u32() & ((1u << n) - 1u);
        } while ((support & rot1(support)) != 0u);
        std::vector<cplx> a(n), bamp(n);
        for (int j = 0; j < n; ++j) {
            if (support & (1u << j)) {
                const cplx av = rng.normal_complex(), bv = rng.normal_complex();
                const double nrm = std::sqrt(std::norm(av) + std::norm(bv));
                a[j] = av / nrm;
                bamp[j] = bv / nrm;
            } else {
                a[j] = 1.0;
                bamp[j] = 0.0;
            }
        }
        PureState psi(n);
        for (std::uint32_t c = 0; c < psi.dim(); ++c) {
            cplx amp = 1.0;
            for (int j = 0; j < n; ++j) amp *= (c & (1u << j)) ? bamp[j] : a[j];
            psi.amp[c] = amp;
        }
        if (expect_diag(nadj, psi) == 0.0) ++exact_zero;
    }

    auto dimer = dimer_packet(SpinConfig::from_string("100100"), 2, 5, Boundary::periodic);
    dimer.normalize();
    const auto rep = witness(DensityMatrix::pure(dimer), ConstraintRule::east());
    const bool dimer_ok = rep.dark_residual < 1e-12 && std::abs(rep.nadj - 1.0) <= 1e-12 &&
                          rep.verdict == WitnessVerdict::entangled;
    return {exact_zero == 1000 && dimer_ok,
            strf("%d/1000 product darks exactly zero; dimer residual %.2g, nadj %.12f, %s",
                 exact_zero, rep.dark_residual, rep.nadj, witness_verdict_name(rep.verdict))};
}

// 11. Reconstructed unconditional state: unconstrained decay stays separable,
//     the facilitated chain builds negativity that grows with size.
Outcome crit_negativity_contrast() {
    const std::vector<int> sizes{4, 6, 8};
    double worst_dicke = 0.0;
    std::vector<double> east_peak, east_stat;
    for (const bool constrained : {false, true}) {
        for (std::size_t is = 0; is < sizes.size(); ++is) {
            const int n = sizes[is];
            EffectiveModel m;
            m.rule = constrained ? ConstraintRule::east() : ConstraintRule::dicke();
            m.gamma = 1.0;
            const TimeGrid grid{0.0, constrained ? 40.0 : 6.0, 11};
            std::vector<int> idx(11);
            for (int i = 0; i < 11; ++i) idx[i] = i;
            const auto ds = run_quantum_jumps_density(m, PureState::all_up(n), grid, 600,
                                                      500 + n + (constrained ? 50 : 0), idx, 1);
            const auto part = Bipartition::half(n);
            double peak = 0.0, last = 0.0;
            for (int s = 0; s < 11; ++s) {
                last = log_negativity(ds.combined(s), part);
                peak = std::max(peak, last);
            }
            if (constrained) {
                east_peak.push_back(peak);
                east_stat.push_back(last);
            } else {
                worst_dicke = std::max(worst_dicke, peak);
            }
        }
    }
    const bool east_ok = *std::min_element(east_peak.begin(), east_peak.end()) > 0.2 &&
                         east_stat[0] < east_stat[1] && east_stat[1] < east_stat[2];
    return {worst_dicke < 0.05 && east_ok,
            strf("unconstrained max E_N %.4f (tol 0.05); constrained stationary E_N %.3f < %.3f "
                 "< %.3f, min peak %.3f (> 0.2)",
                 worst_dicke, east_stat[0], east_stat[1], east_stat[2],
                 *std::min_element(east_peak.begin(), east_peak.end()))};
}

// 12. Phase-space burst peak grows as the square of the chain length.
Outcome crit_burst_scaling() {
    std::vector<double> lx, ly;
    std::string detail = "peaks";
    for (int n : {16, 32, 64}) {
        DtwaParams p = DtwaParams::for_rule(ConstraintRule::east());
        p.n_sites = n;
        p.g = 1.0;
        p.kappa = 40.0;
        p.delta = 0.0;
        p.dt = 1e-3;
        p.n_traj = 2000;
        p.seed = 600 + static_cast<std::uint64_t>(n);
        const TimeGrid grid{0.0, 6.0, 121};
        const auto r = run_dtwa(p, grid);
        const double peak = series_max(r.observables.at("Sperp2").mean);
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(peak));
        detail += strf(" N=%d:%.1f", n, peak);
    }
    const double slope = fit_slope(lx, ly);
    return {std::abs(slope - 2.0) <= 0.2, detail + strf("; exponent %.3f (2.0 +- 0.2)", slope)};
}

// 13. Phase-space solver against exact trajectories at moderate size: mean
//     density everywhere, burst peak height within 15 percent. The stationary
//     adjacency count is a known semiclassical failure and is not compared.
Outcome crit_dtwa_benchmark() {
    const int n = 8;
    CavityParams cp;
    cp.g = 1.0;
    cp.kappa = 30.0;
    cp.delta = 0.0;
    cp.n_atoms = n;
    const auto rates = eliminate_cavity(cp);
    EffectiveModel em;
    em.rule = ConstraintRule::east();
    em.gamma = rates.gamma;
    em.chi = rates.chi;
    const TimeGrid grid{0.0, 12.0, 61};
    const auto qj = run_quantum_jumps(em, PureState::all_up(n), grid, 1000, 701);

    DtwaParams p = DtwaParams::for_rule(ConstraintRule::east());
    p.n_sites = n;
    p.g = cp.g;
    p.kappa = cp.kappa;
    p.delta = cp.delta;
    p.dt = 1e-3;
    p.n_traj = 4000;
    p.seed = 702;
    const auto dt = run_dtwa(p, grid);

    const auto& nq = qj.observables.at("n").mean;
    const auto& nd = dt.observables.at("n").mean;
    double worst = 0.0;
    for (std::size_t i = 0; i < nq.size(); ++i) worst = std::max(worst, std::abs(nq[i] - nd[i]));
    const double pq = series_max(qj.observables.at("Sperp2").mean);
    const double pd = series_max(dt.observables.at("Sperp2").mean);
    const double peak_dev = std::abs(pq - pd) / pq;
    return {worst < 0.05 && peak_dev <= 0.15,
            strf("max |<n>| gap %.4f (tol 0.05); burst peak %.2f vs %.2f, dev %.1f%% (tol 15%%)",
                 worst, pq, pd, 100.0 * peak_dev)};
}

// 14. Collective-mode dephasing: matched-seed negativity curves coincide for
//     gamma_phi / gamma in {0, 10, 100}.
Outcome crit_common_dephasing() {
    const int n = 6;
    const TimeGrid grid{0.0, 20.0, 41};
    std::vector<int> idx;
    for (int i = 0; i <= 40; i += 5) idx.push_back(i);
    const auto part = Bipartition::half(n);

    struct Curve {
        std::vector<double> mean, sem;
    };
    std::vector<Curve> curves;
    for (const double gphi : {0.0, 10.0, 100.0}) {
        EffectiveModel m;
        m.rule = ConstraintRule::east();
        m.gamma = 1.0;
        m.gamma_deph_common = gphi;
        const auto ds =
            run_quantum_jumps_density(m, PureState::all_up(n), grid, 200, 777, idx, 5);
        Curve c;
        for (std::size_t s = 0; s < idx.size(); ++s) {
            std::vector<double> en;
            for (const auto& batch : ds.batches) en.push_back(log_negativity(batch[s], part));
            double mean = 0.0;
            for (const double e : en) mean += e;
            mean /= static_cast<double>(en.size());
            double var = 0.0;
            for (const double e : en) var += (e - mean) * (e - mean);
            var /= static_cast<double>(en.size() - 1) * static_cast<double>(en.size());
            c.mean.push_back(mean);
            c.sem.push_back(std::sqrt(var));
        }
        curves.push_back(std::move(c));
    }
    double worst_gap = 0.0;
    bool pass = true;
    for (std::size_t g = 1; g < curves.size(); ++g)
        for (std::size_t s = 0; s < idx.size(); ++s) {
            const double gap = std::abs(curves[g].mean[s] - curves[0].mean[s]);
            const double tol =
                3.0 * std::sqrt(curves[g].sem[s] * curves[g].sem[s] +
                                curves[0].sem[s] * curves[0].sem[s]);
            worst_gap = std::max(worst_gap, gap);
            if (gap > tol) pass = false;
        }
    return {pass, strf("max |E_N gap| %.3g across gamma_phi in {0,10,100} (tol 3 sem)",
                       worst_gap)};
}

// 15. Preparation-time collapse: N tau / ln N stays within a 25 percent band
//     for the adjacency observable across N = 6..12.
Outcome crit_prep_scaling() {
    const std::vector<int> sizes{6, 8, 10, 12};
    const std::vector<int> traj{400, 400, 300, 200};
    std::vector<double> ratios;
    std::string detail;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const int n = sizes[i];
        EffectiveModel m;
        m.rule = ConstraintRule::east();
        m.gamma = 1.0;
        const TimeGrid grid{0.0, 10.0, 201};
        const auto r = run_quantum_jumps(m, PureState::all_up(n), grid, traj[i],
                                         800 + static_cast<std::uint64_t>(n));
        const auto times = grid.times();
        const auto& series = r.observables.at("Nadj").mean;
        double stat = 0.0;
        for (int k = 0; k < 20; ++k) stat += series[series.size() - 1 - k];
        stat /= 20.0;
        const auto tau = prep_time(times, series, stat, 0.7);
        if (!tau) return {false, strf("N=%d never completes the approach", n)};
        const double ratio = n * *tau / std::log(static_cast<double>(n));
        ratios.push_back(ratio);
        detail += strf("%sN=%d:%.3f", detail.empty() ? "N tau/lnN " : " ", n, ratio);
    }
    const double lo = *std::min_element(ratios.begin(), ratios.end());
    const double hi = *std::max_element(ratios.begin(), ratios.end());
    double mean = 0.0;
    for (const double v : ratios) mean += v;
    mean /= static_cast<double>(ratios.size());
    const double spread = (hi - lo) / mean;
    return {spread < 0.25, detail + strf("; spread %.1f%% (tol 25%%)", 100.0 * spread)};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "pair-cascade layer norms match exact counting", crit_and_counting},
        {2, "intensity floor holds for named and random rules", crit_intensity_floor},
        {3, "unconstrained ladder intensities match the closed form", crit_dicke_ladder},
        {4, "quarter-filling intensity approaches 1/12", crit_scaling_function},
        {5, "cascade entry time grows by ln 10 per decade", crit_entry_time},
        {6, "magnetization drain equals collective emission", crit_population_identity},
        {7, "full-cavity and eliminated dynamics agree", crit_elimination_consistency},
        {8, "two-atom cascade and steered-pair analytics hold", crit_two_atom},
        {9, "constructed dark packets span the kernel", crit_dark_manifold},
        {10, "adjacency witness separates products from packets", crit_witness},
        {11, "negativity contrast between free and facilitated decay", crit_negativity_contrast},
        {12, "transverse burst peak scales as N^2", crit_burst_scaling},
        {13, "phase-space solver tracks the exact burst", crit_dtwa_benchmark},
        {14, "collective dephasing leaves matched-seed curves unchanged", crit_common_dephasing},
        {15, "rescaled preparation times collapse across sizes", crit_prep_scaling},
    };
    return all;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    int failures = 0, ran = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : criteria()) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), c.id) == selected.end())
            continue;
        ++ran;
        const auto c0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = {false, strf("exception: %s", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0)
                                .count();
        std::printf("[%2d] %s  (%6.1fs)  %s | %s\n", c.id, out.pass ? "PASS" : "FAIL", secs,
                    c.title, out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count();
    std::printf("%d/%d criteria passed in %.1fs\n", ran - failures, ran, total);
    return failures == 0 ? 0 : 1;
}
