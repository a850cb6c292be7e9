#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kcs/spin_algebra.hpp"

namespace kcs {

// Norms and intensities of the click-resolved cascade: psi_k = F^k |all up>,
// B_k = |psi_k|^2, intensity_k = B_{k+1}/B_k.
struct LayerSpectrum {
    ConstraintRule rule;
    int n_sites = 0;
    int k_max = 0;
    // log B_k for k = 0..k_max; -inf once the cascade dies.
    std::vector<double> log_norms;
    // B_{k+1}/B_k for k = 0..k_max-1; 0 once the next layer is empty.
    std::vector<double> intensities;
};

struct DensityTrajectory {
    std::vector<double> tau; // rescaled time
    std::vector<double> n;   // excitation density
    std::string rule_tag;
};

struct BoundReport {
    int range = 0;
    int n_sites = 0;
    std::vector<int> k;
    std::vector<double> intensity;
    std::vector<double> bound;
    std::vector<double> margin;
    double min_margin = 0.0;
    int insertion_samples = 0;
};

LayerSpectrum layer_spectrum(const ConstraintRule& rule, int n, int k_max);

// Number of k-site independent (pairwise non-adjacent) placements on an
// N-ring: N/(N-k) * C(N-k, k). Zero outside 0 <= k <= N/2.
std::uint64_t and_count(int n, int k);

// Closed-form layer intensity of the nearest-neighbor AND cascade.
double and_intensity(int n, int k);

// Thermodynamic rate function of the AND cascade; zero outside [1/2, 1].
double g_and(double n);

// Location of the maximum of g_and on [1/2, 1], found by bracketing.
double g_and_maximizer();

// Universal intensity floor (k+1)[N-(2w+1)k] while N-(2w+1)k > 0, else 0.
double boolean_lower_bound(int w, int n, int k);

// |G_w(S)|: sites farther than w from every decayed site (ring metric),
// themselves not decayed. S holds the decayed sites; empty S gives N.
int isolated_zone_size(SpinConfig decayed, int w);

// Checks every layer intensity in the positive window against the floor and
// spot-checks the insertion count on reachable configurations. Violations
// throw NumericError.
BoundReport verify_bound(const ConstraintRule& rule, int n);

DensityTrajectory ode_density(const std::function<double(double)>& g, double n0,
                              const std::vector<double>& tau_grid,
                              const std::string& rule_tag = "custom");
DensityTrajectory ode_density_and(double n0, const std::vector<double>& tau_grid);

// Rescaled time to flow from n0 down to n_target under dn/dtau = -g_and(n).
// The integrable endpoint at n = 1 is split off analytically; the smooth
// remainder is integrated numerically.
double quadrature_time(double n_target, double n0);

} // namespace kcs
