#pragma once

#include <cstdint>
#include <vector>

#include "kcs/dynamics.hpp"
#include "kcs/spin_algebra.hpp"

namespace kcs {

// Semiclassical discrete-Wigner solver for a constrained chain coupled to one
// lossy cavity mode, for burst-scaling studies beyond exact-diagonalization
// sizes. The constraint enters through the phase-space projector
//
//   P_j = p0 + alpha n_{j-1} + beta n_{j+1} + gamma n_{j-1} n_{j+1},
//   n = (1 + s^z) / 2,
//
// on a periodic chain. for_rule() fills the coefficients for the named rules
// (unconstrained -> p0 = 1, east -> alpha = 1, and -> gamma = 1,
// or -> alpha = beta = 1, gamma = -1).
struct DtwaParams {
    int n_sites = 0;
    double p0 = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double g = 1.0;
    double kappa = 1.0;
    double delta = 0.0;
    cplx alpha0{0.0, 0.0};  // initial coherent amplitude of the cavity
    double dt = 0.0;        // integrator step, 0 = auto with pilot stability check
    int n_traj = 2;
    std::uint64_t seed = 0;

    // Projector coefficients for a named rule; rejects custom tables (no
    // local polynomial form) and open boundaries (the solver is periodic).
    static DtwaParams for_rule(const ConstraintRule& rule);
    void validate() const;
};

// One phase-space sample: complex cavity amplitude plus classical spin
// components. At t = 0, sx and sy are independent +-1, sz = 1, and
// a = alpha0 + (eta_R + i eta_I)/2 with standard normal eta.
struct PhasePoint {
    cplx a{0.0, 0.0};
    std::vector<double> sx, sy, sz;
};

PhasePoint sample_initial(const DtwaParams& p, int traj);

// Trajectory-averaged observables n, Sz, Sperp2, Nadj, photons on the grid,
// with the symmetric-ordering photon correction mean|a|^2 - 1/2. Heun
// predictor-corrector for the drift plus additive Ito cavity noise; spin
// lengths are not renormalized. A diverging trajectory (step too large)
// raises NumericError quoting the largest stable pilot step.
TrajectoryResult run_dtwa(const DtwaParams& p, const TimeGrid& grid);

} // namespace kcs
