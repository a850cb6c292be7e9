#include "kcs/model_reduction.hpp"

#include <cmath>
#include <limits>

namespace kcs {

EffectiveRates eliminate_cavity(const CavityParams& p) {
    if (p.kappa <= 0.0) throw ConfigError("cavity linewidth must be positive");
    const std::complex<double> alpha =
        p.g * p.g / std::complex<double>(0.5 * p.kappa, p.delta);
    return {2.0 * alpha.real(), alpha.imag()};
}

double validity_margin(const CavityParams& p, bool* warn) {
    if (p.n_atoms < 1) throw ConfigError("validity margin needs at least one atom");
    if (p.g == 0.0) {
        if (warn) *warn = false;
        return std::numeric_limits<double>::infinity();
    }
    const double m = (p.delta * p.delta + p.kappa * p.kappa) / (p.g * p.g * p.n_atoms);
    if (warn) *warn = m < 10.0;
    return m;
}

RamanRates raman_reduce(const RamanParams& r) {
    if (r.delta_e == 0.0) throw ConfigError("raman reduction needs a nonzero detuning");
    const double ratio = r.omega / r.delta_e;
    RamanRates out;
    out.g_eff = r.g * ratio;
    out.gamma_eff = r.gamma_e * ratio * ratio;
    out.cooperativity = r.g * r.g / (r.gamma_e * r.kappa);
    const double direct = out.gamma_eff / (4.0 * out.g_eff * out.g_eff / r.kappa);
    const double via_c = 1.0 / (4.0 * out.cooperativity);
    if (std::abs(direct - via_c) > 1e-12 * std::max(std::abs(direct), std::abs(via_c)))
        throw NumericError("raman loss-ratio identity violated");
    out.loss_ratio = direct;
    out.light_shift = r.g * r.g / r.delta_e;
    return out;
}

} // namespace kcs
