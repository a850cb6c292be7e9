#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcs/density_matrix.hpp"
#include "kcs/spin_algebra.hpp"

namespace kcs {

// Cavity-eliminated spin model: coherent part chi F^dag F plus a
// next-nearest-neighbor density tail, collective decay sqrt(gamma) F, and
// optional robustness channels (per-site loss, per-site sigma^z dephasing,
// collective S^z dephasing).
struct EffectiveModel {
    ConstraintRule rule;
    double gamma = 1.0;
    double chi = 0.0;
    double gamma_loss = 0.0;
    double gamma_deph_ind = 0.0;
    double gamma_deph_common = 0.0;
    double v_nnn = 0.0;

    void validate() const;
};

// Spins coupled to one lossy cavity mode. n_max = 0 selects the Fock
// truncation automatically (pilot run, doubling from 4 until the top level
// stays below 1e-6). rwa=false adds the counter-rotating g(F a + F^dag a^dag)
// coupling.
struct FullCavityModel {
    ConstraintRule rule;
    double g = 1.0;
    double kappa = 1.0;
    double delta = 0.0;
    int n_max = 0;
    bool rwa = true;

    void validate() const;
};

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    int n_points = 2;

    void validate() const;
    double dt() const { return (t_end - t_start) / (n_points - 1); }
    std::vector<double> times() const;
};

struct ObservableSeries {
    std::vector<double> mean;
    std::vector<double> sem;
};

struct TrajectoryResult {
    TimeGrid grid;
    std::map<std::string, ObservableSeries> observables;
    int n_traj = 0;
    std::uint64_t master_seed = 0;
    int n_max_used = 0;  // Fock truncation actually run (cavity engine only)
    // snapshots[traj][grid_point], normalized; filled when record_states set.
    std::vector<std::vector<PureState>> snapshots;
};

struct JumpOptions {
    double dt = 0.0;  // integrator step, 0 = auto
    bool record_states = false;
};

// Wait-time unraveling of the effective model. Each trajectory draws an
// independent exponential clock per channel class (collective F, site loss,
// site dephasing, common S^z) from its own counter substream; the product of
// the per-channel survivals equals the squared norm of the non-Hermitian
// evolution, so this samples the standard unraveling while keeping channel
// draws independent across classes. Deterministic for fixed (seed, n_traj).
TrajectoryResult run_quantum_jumps(const EffectiveModel& model, const PureState& init,
                                   const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                   const JumpOptions& opt = {});

// Trajectory-averaged density matrices at selected grid points, accumulated
// on the fly instead of storing per-trajectory snapshots. Trajectories are
// split into n_batches contiguous equal blocks so batch scatter can serve as
// an error bar; matched seeds reproduce run_quantum_jumps trajectories.
struct DensitySeries {
    TimeGrid grid;
    std::vector<int> grid_indices;
    int n_traj = 0;
    std::vector<std::vector<DensityMatrix>> batches;  // [batch][sample]

    DensityMatrix combined(int sample) const;
};

DensitySeries run_quantum_jumps_density(const EffectiveModel& model, const PureState& init,
                                        const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                        const std::vector<int>& grid_indices, int n_batches = 1,
                                        const JumpOptions& opt = {});

// Non-Hermitian half of the unraveling without jumps; returns the
// unnormalized state after time t. Exposed for integrator checks.
PureState propagate_nh(const EffectiveModel& model, const PureState& init, double t,
                       double dt = 0.0);

// Dense Lindblad oracle, adaptive step-doubling RK4. N <= 8.
std::vector<DensityMatrix> evolve_master_exact(const EffectiveModel& model,
                                               const DensityMatrix& rho0, const TimeGrid& grid);

// d rho/dt of the dense master equation, for generator-level identities.
Eigen::MatrixXcd master_rhs(const EffectiveModel& model, const Eigen::MatrixXcd& rho);

// Joint spin-cavity trajectories from fully-up spins and cavity vacuum, with
// the single jump channel sqrt(kappa) a. Aborts when the top Fock level
// carries more than 1e-4 population.
TrajectoryResult run_full_cavity(const FullCavityModel& model, int n_sites, const TimeGrid& grid,
                                 int n_traj, std::uint64_t seed, const JumpOptions& opt = {});

// Equal-weight mixture of the given pure states.
DensityMatrix reconstruct_density(const std::vector<PureState>& snapshots);

// First time the series completes `fraction` of its approach from the initial
// value toward stationary_value, linearly interpolated between grid points;
// empty when it never gets that far. For a series starting at zero this is the
// usual crossing of fraction * stationary_value.
std::optional<double> prep_time(const std::vector<double>& t, const std::vector<double>& y,
                                double stationary_value, double fraction = 0.7);

} // namespace kcs
