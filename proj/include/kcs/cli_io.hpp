#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kcs/dynamics.hpp"
#include "kcs/model_reduction.hpp"
#include "kcs/spin_algebra.hpp"

namespace kcs {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Fixed observable vocabulary; CSV columns always follow this order.
const std::vector<std::string>& observable_names();

// One fully resolved run. Parsed from the JSON config with defaults applied;
// serialize_config() emits the normalized form (sorted keys, defaults made
// explicit), so serialize(parse(x)) is idempotent and lossless.
struct RunConfig {
    std::string subcommand;
    ConstraintRule rule;
    int n_sites = 0;

    // effective-model block ("model")
    double gamma = 1.0;
    double chi = 0.0;
    double gamma_loss = 0.0;
    double gamma_deph_ind = 0.0;
    double gamma_deph_common = 0.0;
    double v_nnn = 0.0;

    // cavity block ("cavity")
    double g = 1.0;
    double kappa = 1.0;
    double delta = 0.0;
    int n_max = 0;
    bool rwa = true;

    // raman block, present only when configured
    bool has_raman = false;
    RamanParams raman;

    TimeGrid grid;
    int n_traj = 100;
    std::uint64_t seed = 1;
    double dt = 0.0;    // 0 = automatic step selection
    int k_max = 0;      // layers; defaults to n_sites
    int n_batches = 1;  // trajectory batches for density reconstruction
    // empty = every observable the subcommand produces
    std::vector<std::string> observables;
    std::string out_prefix = "kcs";

    // dtwa block: optional per-key overrides on top of the rule-derived
    // projector coefficients. Allowed keys: p0, alpha, beta, gamma,
    // alpha0_re, alpha0_im.
    std::map<std::string, double> dtwa;

    EffectiveModel effective_model() const;
    FullCavityModel cavity_model() const;
};

// Strict parse: unknown keys, type mismatches, and malformed rule tables are
// ConfigError with the offending field path in the message.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);

// Shortest decimal that scans back to exactly the same double. Always uses
// '.' as the decimal separator.
std::string format_double(double v);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);

// Full driver behind main(): parses flags, loads the config, dispatches, and
// maps error categories to exit codes (config 2, resource 3, numeric 4).
int run_cli(int argc, const char* const* argv);

} // namespace kcs
