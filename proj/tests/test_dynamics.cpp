#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kcs/dynamics.hpp"
#include "kcs/entanglement.hpp"
#include "kcs/errors.hpp"
#include "kcs/spin_algebra.hpp"

using namespace kcs;

namespace {

EffectiveModel east_model(int, double gamma = 1.0) {
    EffectiveModel m;
    m.rule = ConstraintRule::east(Boundary::periodic);
    m.gamma = gamma;
    return m;
}

TimeGrid grid_to(double t_end, int n_points) {
    TimeGrid g;
    g.t_end = t_end;
    g.n_points = n_points;
    return g;
}

double trace_obs(const Eigen::MatrixXcd& op, const Eigen::MatrixXcd& rho) {
    return (op * rho).trace().real();
}

Eigen::MatrixXcd dense_f(const ConstraintRule& rule, int n) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(dim, dim);
    const FTransitions tr = build_transitions(rule, n);
    for (std::size_t e = 0; e < tr.from.size(); ++e) f(tr.to[e], tr.from[e]) += 1.0;
    return f;
}

Eigen::MatrixXcd dense_diag(const std::vector<double>& d) {
    const Eigen::Index dim = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index c = 0; c < dim; ++c) m(c, c) = d[c];
    return m;
}

} // namespace

TEST_CASE("time grid basics and validation") {
    TimeGrid g;
    g.t_start = 1.0;
    g.t_end = 3.0;
    g.n_points = 5;
    g.validate();
    CHECK(g.dt() == doctest::Approx(0.5));
    const auto t = g.times();
    REQUIRE(t.size() == 5);
    CHECK(t.front() == 1.0);
    CHECK(t.back() == 3.0);
    CHECK(t[2] == doctest::Approx(2.0));

    g.n_points = 1;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.n_points = 5;
    g.t_end = 1.0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("model parameter validation") {
    EffectiveModel m = east_model(4);
    m.gamma = -0.1;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.gamma = 1.0;
    m.chi = std::nan("");
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.chi = 0.0;
    m.gamma_deph_common = -2.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);

    FullCavityModel c;
    c.rule = ConstraintRule::dicke();
    c.n_max = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.n_max = 0;
    c.kappa = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("preparation time crossing") {
    const std::vector<double> t{0.0, 1.0, 2.0};
    SUBCASE("already above target") {
        const std::vector<double> y{5.0, 5.0, 5.0};
        auto res = prep_time(t, y, 5.0);
        REQUIRE(res.has_value());
        CHECK(*res == 0.0);
    }
    SUBCASE("linear ramp interpolates exactly") {
        std::vector<double> tt(11), yy(11);
        for (int i = 0; i <= 10; ++i) {
            tt[i] = 0.1 * i;
            yy[i] = 0.1 * i;
        }
        auto res = prep_time(tt, yy, 1.0);
        REQUIRE(res.has_value());
        CHECK(*res == doctest::Approx(0.7).epsilon(1e-10));
    }
    SUBCASE("relaxation from above") {
        const std::vector<double> td{0.0, 1.0, 2.0, 3.0};
        const std::vector<double> yd{7.0, 3.0, 1.0, 1.0};
        auto res = prep_time(td, yd, 1.0);
        REQUIRE(res.has_value());
        CHECK(*res == doctest::Approx(1.1).epsilon(1e-10));
    }
    SUBCASE("never reached") {
        const std::vector<double> y{0.0, 0.1, 0.2};
        CHECK_FALSE(prep_time(t, y, 10.0).has_value());
        const std::vector<double> yd{5.0, 4.0, 3.5};
        CHECK_FALSE(prep_time(t, yd, 0.0).has_value());
    }
    SUBCASE("rejects bad input") {
        const std::vector<double> y{0.0, 0.1};
        CHECK_THROWS_AS(prep_time(t, y, 1.0), ConfigError);
        const std::vector<double> y3{0.0, 0.1, 0.2};
        CHECK_THROWS_AS(prep_time(t, y3, 1.0, 0.0), ConfigError);
        CHECK_THROWS_AS(prep_time(t, y3, 1.0, 1.5), ConfigError);
    }
}

TEST_CASE("density reconstruction from snapshots") {
    PureState a = PureState::basis(2, 0b01);
    PureState b = PureState::basis(2, 0b10);

    SUBCASE("single state gives the projector") {
        const DensityMatrix dm = reconstruct_density({a});
        CHECK((dm.rho * dm.rho - dm.rho).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(dm.rho(1, 1).real() == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal pair is half-pure") {
        const DensityMatrix dm = reconstruct_density({a, b});
        CHECK(std::abs(dm.rho.trace() - cplx(1.0, 0.0)) < 1e-14);
        CHECK((dm.rho * dm.rho).trace().real() == doctest::Approx(0.5));
    }
    SUBCASE("norm is divided out") {
        PureState big = a;
        for (auto& z : big.amp) z *= 2.0;
        const DensityMatrix dm = reconstruct_density({big});
        CHECK(dm.rho(1, 1).real() == doctest::Approx(1.0));
    }
    SUBCASE("rejects bad input") {
        CHECK_THROWS_AS(reconstruct_density({}), ConfigError);
        PureState c = PureState::basis(3, 1);
        CHECK_THROWS_AS(reconstruct_density({a, c}), ConfigError);
    }
}

TEST_CASE("master oracle: frozen and closed-form checks") {
    SUBCASE("zero rates freeze the state") {
        EffectiveModel m = east_model(3, 0.0);
        DensityMatrix rho0 = DensityMatrix::pure(PureState::all_up(3));
        const auto series = evolve_master_exact(m, rho0, grid_to(2.0, 5));
        CHECK((series.back().rho - rho0.rho).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("constrained pair decays into its dark state") {
        EffectiveModel m = east_model(2);
        DensityMatrix rho0 = DensityMatrix::pure(PureState::all_up(2));
        const TimeGrid grid = grid_to(4.0, 21);
        const auto series = evolve_master_exact(m, rho0, grid);
        const auto nmean = dense_diag(diag_nmean(2));
        const auto t = grid.times();
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double expected = 0.5 + 0.5 * std::exp(-2.0 * t[k]);
            CHECK(std::abs(trace_obs(nmean, series[k].rho) - expected) < 1e-8);
            CHECK(std::abs(series[k].rho.trace() - cplx(1.0, 0.0)) < 1e-9 * (1.0 + t[k]));
            series[k].validate(true);
        }
    }
    SUBCASE("unconstrained pair follows the superradiant cascade") {
        EffectiveModel m;
        m.rule = ConstraintRule::dicke();
        DensityMatrix rho0 = DensityMatrix::pure(PureState::all_up(2));
        const TimeGrid grid = grid_to(3.0, 16);
        const auto series = evolve_master_exact(m, rho0, grid);
        const auto nmean = dense_diag(diag_nmean(2));
        const auto t = grid.times();
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double expected = std::exp(-2.0 * t[k]) * (1.0 + t[k]);
            CHECK(std::abs(trace_obs(nmean, series[k].rho) - expected) < 1e-8);
        }
    }
    SUBCASE("site count cap") {
        EffectiveModel m = east_model(9);
        DensityMatrix rho0 = DensityMatrix::zero(9);
        rho0.rho(0, 0) = 1.0;
        CHECK_THROWS_AS(evolve_master_exact(m, rho0, grid_to(1.0, 3)), ResourceError);
    }
}

TEST_CASE("master generator ties magnetization loss to the emission rate") {
    EffectiveModel m = east_model(4, 1.3);
    DensityMatrix rho0 = DensityMatrix::pure(PureState::all_up(4));
    const auto series = evolve_master_exact(m, rho0, grid_to(3.0, 7));

    const Eigen::MatrixXcd f = dense_f(m.rule, 4);
    const Eigen::MatrixXcd ffm = f.adjoint() * f;
    const Eigen::MatrixXcd sz = dense_diag(diag_sz(4));
    for (const auto& dm : series) {
        const Eigen::MatrixXcd rhs = master_rhs(m, dm.rho);
        const double dsz = (sz * rhs).trace().real();
        const double rate = (ffm * dm.rho).trace().real();
        CHECK(std::abs(dsz + m.gamma * rate) < 1e-9);
    }
}

TEST_CASE("jump trajectories agree with the dense master equation") {
    EffectiveModel m = east_model(3);
    m.gamma_loss = 0.3;
    const TimeGrid grid = grid_to(6.0, 25);
    const PureState init = PureState::all_up(3);

    const auto qj = run_quantum_jumps(m, init, grid, 400, 42);
    const auto series = evolve_master_exact(m, DensityMatrix::pure(init), grid);
    const auto nmean = dense_diag(diag_nmean(3));

    const auto& n = qj.observables.at("n");
    for (int k = 0; k < grid.n_points; ++k) {
        const double exact = trace_obs(nmean, series[k].rho);
        CHECK(std::abs(n.mean[k] - exact) <= 3.0 * n.sem[k] + 0.02);
    }
}

TEST_CASE("unconstrained pair matches the analytic emission curve") {
    EffectiveModel m;
    m.rule = ConstraintRule::dicke();
    const TimeGrid grid = grid_to(4.0, 21);
    const auto qj = run_quantum_jumps(m, PureState::all_up(2), grid, 1000, 7);

    const auto& n = qj.observables.at("n");
    const auto& ff = qj.observables.at("FdagF");
    CHECK(ff.mean[0] == doctest::Approx(2.0));
    const auto t = grid.times();
    for (int k = 0; k < grid.n_points; ++k) {
        const double expected = std::exp(-2.0 * t[k]) * (1.0 + t[k]);
        CHECK(std::abs(n.mean[k] - expected) <= 3.0 * n.sem[k] + 1e-9);
    }
}

TEST_CASE("constrained pair is steered into an entangled dark state") {
    EffectiveModel m = east_model(2);
    const TimeGrid grid = grid_to(15.0, 31);
    JumpOptions opt;
    opt.record_states = true;
    const auto qj = run_quantum_jumps(m, PureState::all_up(2), grid, 400, 11, opt);

    const auto& n = qj.observables.at("n");
    CHECK(std::abs(n.mean.back() - 0.5) < 0.02);

    REQUIRE(qj.snapshots.size() == 400);
    std::vector<PureState> finals;
    finals.reserve(400);
    for (const auto& traj : qj.snapshots) {
        REQUIRE(static_cast<int>(traj.size()) == grid.n_points);
        CHECK(traj.back().norm2() == doctest::Approx(1.0));
        finals.push_back(traj.back());
    }
    const DensityMatrix dm = reconstruct_density(finals);
    const double en = log_negativity(dm, Bipartition::half(2));
    CHECK(std::abs(en - std::log(2.0)) < 0.05);

    SUBCASE("density accumulator reproduces snapshot reconstruction") {
        const std::vector<int> idx{grid.n_points - 1};
        const auto ds = run_quantum_jumps_density(m, PureState::all_up(2), grid, 400, 11, idx, 4);
        const DensityMatrix from_batches = ds.combined(0);
        CHECK((from_batches.rho - dm.rho).cwiseAbs().maxCoeff() < 1e-12);
        for (const auto& row : ds.batches) REQUIRE(row.size() == 1);
    }
}

TEST_CASE("collective dephasing leaves sector-pure runs unchanged") {
    const TimeGrid grid = grid_to(4.0, 21);
    const PureState init = PureState::all_up(4);

    EffectiveModel plain = east_model(4);
    EffectiveModel dephased = plain;
    dephased.gamma_deph_common = 7.3;

    const auto a = run_quantum_jumps(plain, init, grid, 60, 77);
    const auto b = run_quantum_jumps(dephased, init, grid, 60, 77);
    for (const auto& [name, series] : a.observables) {
        const auto& other = b.observables.at(name);
        for (int k = 0; k < grid.n_points; ++k) {
            CHECK(series.mean[k] == other.mean[k]);
            CHECK(series.sem[k] == other.sem[k]);
        }
    }

    SUBCASE("per-site dephasing does change the evolution") {
        EffectiveModel noisy = plain;
        noisy.gamma_deph_ind = 2.0;
        const auto c = run_quantum_jumps(noisy, init, grid, 60, 77);
        double max_diff = 0.0;
        const auto& na = a.observables.at("n");
        const auto& nc = c.observables.at("n");
        for (int k = 0; k < grid.n_points; ++k)
            max_diff = std::max(max_diff, std::abs(na.mean[k] - nc.mean[k]));
        CHECK(max_diff > 1e-3);
    }
}

TEST_CASE("per-site loss empties the lattice") {
    EffectiveModel m = east_model(3);
    m.gamma_loss = 0.5;
    const auto qj = run_quantum_jumps(m, PureState::all_up(3), grid_to(40.0, 41), 60, 5);
    CHECK(qj.observables.at("n").mean.back() < 1e-3);
}

TEST_CASE("non-Hermitian norm decays monotonically") {
    EffectiveModel m = east_model(4, 0.7);
    m.gamma_loss = 0.2;
    m.gamma_deph_ind = 0.1;
    m.gamma_deph_common = 0.3;
    const PureState init = PureState::all_up(4);

    double prev = 1.0;
    for (double t : {0.5, 1.0, 2.0, 3.0}) {
        const double nn = propagate_nh(m, init, t).norm2();
        CHECK(nn < prev);
        prev = nn;
    }

    SUBCASE("purely coherent evolution preserves the norm") {
        EffectiveModel coh = east_model(4, 0.0);
        coh.chi = 0.4;
        CHECK(std::abs(propagate_nh(coh, init, 2.0).norm2() - 1.0) < 1e-10);
    }
}

TEST_CASE("halving the step leaves observables unchanged") {
    EffectiveModel m = east_model(4);
    const TimeGrid grid = grid_to(5.0, 26);
    const PureState init = PureState::all_up(4);

    JumpOptions coarse, fine;
    coarse.dt = 2.5e-3;
    fine.dt = 1.25e-3;
    const auto a = run_quantum_jumps(m, init, grid, 80, 3, coarse);
    const auto b = run_quantum_jumps(m, init, grid, 80, 3, fine);

    double max_diff = 0.0;
    const auto& na = a.observables.at("n");
    const auto& nb = b.observables.at("n");
    for (int k = 0; k < grid.n_points; ++k)
        max_diff = std::max(max_diff, std::abs(na.mean[k] - nb.mean[k]));
    CHECK(max_diff < 1e-4);
}

TEST_CASE("matched seeds reproduce runs exactly") {
    EffectiveModel m = east_model(3);
    m.chi = 0.2;
    const TimeGrid grid = grid_to(3.0, 16);
    const auto a = run_quantum_jumps(m, PureState::all_up(3), grid, 50, 19);
    const auto b = run_quantum_jumps(m, PureState::all_up(3), grid, 50, 19);
    for (const auto& [name, series] : a.observables) {
        const auto& other = b.observables.at(name);
        for (int k = 0; k < grid.n_points; ++k) CHECK(series.mean[k] == other.mean[k]);
    }

    SUBCASE("single trajectory has zero error bars") {
        const auto solo = run_quantum_jumps(m, PureState::all_up(3), grid, 1, 19);
        for (const auto& [name, series] : solo.observables)
            for (double s : series.sem) CHECK(s == 0.0);
    }
}

TEST_CASE("trajectory input validation") {
    EffectiveModel m = east_model(3);
    const TimeGrid grid = grid_to(1.0, 5);
    PureState init = PureState::all_up(3);

    CHECK_THROWS_AS(run_quantum_jumps(m, init, grid, 0, 1), ConfigError);
    PureState bad = init;
    bad.amp[0] = 0.5;
    CHECK_THROWS_AS(run_quantum_jumps(m, bad, grid, 10, 1), ConfigError);
    PureState huge;
    huge.n_sites = 15;
    huge.amp.assign(1u << 15, cplx(0.0, 0.0));
    huge.amp.back() = 1.0;
    CHECK_THROWS_AS(run_quantum_jumps(m, huge, grid, 10, 1), ResourceError);

    CHECK_THROWS_AS(run_quantum_jumps_density(m, init, grid, 10, 1, {0}, 3), ConfigError);
    CHECK_THROWS_AS(run_quantum_jumps_density(m, init, grid, 10, 1, {9}, 2), ConfigError);
    CHECK_THROWS_AS(run_quantum_jumps_density(m, init, grid, 10, 1, {}, 2), ConfigError);
}

TEST_CASE("cavity: zero coupling freezes the spins") {
    FullCavityModel c;
    c.rule = ConstraintRule::east(Boundary::periodic);
    c.g = 0.0;
    c.kappa = 1.0;
    c.n_max = 2;
    const auto out = run_full_cavity(c, 2, grid_to(2.0, 9), 5, 23);
    for (double v : out.observables.at("n").mean) CHECK(v == doctest::Approx(1.0));
    for (double v : out.observables.at("photons").mean) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("cavity: excitation number is conserved without loss") {
    FullCavityModel c;
    c.rule = ConstraintRule::east(Boundary::periodic);
    c.g = 1.0;
    c.kappa = 0.0;
    c.delta = 0.7;
    c.n_max = 6;
    const auto out = run_full_cavity(c, 2, grid_to(3.0, 31), 1, 2);
    const auto& n = out.observables.at("n");
    const auto& ph = out.observables.at("photons");
    for (int k = 0; k < 31; ++k) CHECK(std::abs(2.0 * n.mean[k] + ph.mean[k] - 2.0) < 1e-6);
}

TEST_CASE("cavity: overfull truncation aborts") {
    FullCavityModel c;
    c.rule = ConstraintRule::dicke();
    c.g = 2.0;
    c.kappa = 0.05;
    c.n_max = 1;
    CHECK_THROWS_AS(run_full_cavity(c, 2, grid_to(3.0, 16), 2, 4), ConfigError);
}

TEST_CASE("cavity: automatic truncation picks a safe level") {
    FullCavityModel c;
    c.rule = ConstraintRule::east(Boundary::periodic);
    c.g = 1.0;
    c.kappa = 10.0;
    c.n_max = 0;
    const auto out = run_full_cavity(c, 2, grid_to(2.0, 11), 10, 31);
    CHECK(out.n_max_used >= 4);
}

TEST_CASE("overdamped cavity follows the eliminated model") {
    FullCavityModel c;
    c.rule = ConstraintRule::east(Boundary::periodic);
    c.g = 1.0;
    c.kappa = 20.0;
    const auto out = run_full_cavity(c, 2, grid_to(12.0, 25), 250, 13);

    // kappa >> g: the eliminated pair obeys <n>(t) = 1/2 + exp(-2 Gamma t)/2
    // with Gamma = 4 g^2 / kappa.
    const double gamma_eff = 4.0 * c.g * c.g / c.kappa;
    const auto t = out.grid.times();
    const auto& n = out.observables.at("n");
    for (int k = 0; k < out.grid.n_points; ++k) {
        const double expected = 0.5 + 0.5 * std::exp(-2.0 * gamma_eff * t[k]);
        CHECK(std::abs(n.mean[k] - expected) <= 3.0 * n.sem[k] + 0.03);
    }
}

TEST_CASE("counter-rotating corrections shrink with coupling") {
    auto deviation = [](double g) {
        FullCavityModel c;
        c.rule = ConstraintRule::east(Boundary::periodic);
        c.g = g;
        c.kappa = 0.0;
        c.delta = 5.0;
        c.n_max = 4;
        const TimeGrid grid = grid_to(2.0, 41);
        c.rwa = true;
        const auto a = run_full_cavity(c, 2, grid, 1, 1);
        c.rwa = false;
        const auto b = run_full_cavity(c, 2, grid, 1, 1);
        double d = 0.0;
        const auto& na = a.observables.at("n");
        const auto& nb = b.observables.at("n");
        for (int k = 0; k < grid.n_points; ++k)
            d = std::max(d, std::abs(na.mean[k] - nb.mean[k]));
        return d;
    };
    const double big = deviation(0.4);
    const double small = deviation(0.1);
    CHECK(big > 1e-6);
    CHECK(small < big / 6.0);
}
