#pragma once

#include <complex>

#include "kcs/errors.hpp"

namespace kcs {

struct CavityParams {
    double g = 1.0;      // atom-cavity coupling
    double kappa = 1.0;  // cavity linewidth
    double delta = 0.0;  // cavity-spin detuning
    int n_atoms = 1;     // enters validity diagnostics only
};

struct EffectiveRates {
    double gamma = 0.0; // collective decay rate
    double chi = 0.0;   // dispersive interaction rate
};

struct RamanParams {
    double g = 0.0;       // bare cavity coupling
    double omega = 0.0;   // drive Rabi frequency
    double delta_e = 0.0; // intermediate-state detuning
    double gamma_e = 0.0; // intermediate-state linewidth
    double kappa = 0.0;
};

struct RamanRates {
    double g_eff = 0.0;
    double gamma_eff = 0.0;
    double cooperativity = 0.0;
    double loss_ratio = 0.0;   // spontaneous loss relative to collective emission
    double light_shift = 0.0;  // g^2/Delta_e magnitude estimate, diagnostic only
};

// Bad-cavity reduction: Gamma = 2 Re alpha, chi = Im alpha with
// alpha = g^2 / (kappa/2 + i delta).
EffectiveRates eliminate_cavity(const CavityParams& p);

// (delta^2 + kappa^2) / (g^2 N); the effective description needs this large.
// Returns +inf for g = 0. warn is set when the margin is below 10.
double validity_margin(const CavityParams& p, bool* warn = nullptr);

RamanRates raman_reduce(const RamanParams& r);

} // namespace kcs
