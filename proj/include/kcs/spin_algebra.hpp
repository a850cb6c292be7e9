#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kcs/errors.hpp"

namespace kcs {

using cplx = std::complex<double>;

// Site j of a chain of n sites maps to bit j-1 (LSB = site 1). Printed
// bitstrings put site 1 leftmost.
struct SpinConfig {
    std::uint32_t bits = 0;
    int n_sites = 0;

    bool up(int j) const { return (bits >> (j - 1)) & 1u; }
    int popcount() const { return __builtin_popcount(bits); }
    std::string to_string() const;
    static SpinConfig from_string(const std::string& s);
};

enum class Boundary { periodic, open };

enum class RuleKind { dicke, east, and_rule, or_rule, custom };

// Boolean facilitation constraint P_j evaluated on the occupations of the
// sites within distance `range` of j. Diagonal in the z basis by
// construction. The fully occupied neighborhood always facilitates.
//
// Open-boundary handling: East follows the chain form in which the leftmost
// site has no lowering term (a missing left neighbor blocks). And/Or/Custom
// treat out-of-range neighbors as a fixed fill value, occupied by default.
struct ConstraintRule {
    RuleKind kind = RuleKind::dicke;
    int range = 0;
    Boundary boundary = Boundary::periodic;
    bool open_fill_occupied = true;
    // Custom only: truth table over the 2*range neighbor occupations.
    // Index bit d-1 = occupation of site j-d, bit range+d-1 = site j+d.
    std::vector<std::uint8_t> table;

    static ConstraintRule dicke();
    static ConstraintRule east(Boundary b = Boundary::periodic);
    static ConstraintRule and_rule(Boundary b = Boundary::periodic, bool fill = true);
    static ConstraintRule or_rule(Boundary b = Boundary::periodic, bool fill = true);
    static ConstraintRule custom(int range, std::vector<std::uint8_t> table,
                                 Boundary b = Boundary::periodic, bool fill = true);

    std::string name() const;
};

bool constraint_allows(const ConstraintRule& rule, SpinConfig c, int j);

// Dense state over the full 2^n configuration space.
struct PureState {
    int n_sites = 0;
    std::vector<cplx> amp;

    PureState() = default;
    explicit PureState(int n);

    static PureState all_up(int n);
    static PureState basis(int n, std::uint32_t bits);

    std::size_t dim() const { return amp.size(); }
    double norm2() const;
    void normalize();
};

// Sparse state for layer recursions on larger chains.
struct SparseState {
    int n_sites = 0;
    std::unordered_map<std::uint32_t, cplx> amp;

    double norm2() const;
    void normalize();
    // Drop entries below rel_tol times the largest magnitude.
    void prune(double rel_tol = 1e-14);
};

PureState apply_F(const ConstraintRule& rule, const PureState& in);
PureState apply_Fdag(const ConstraintRule& rule, const PureState& in);
SparseState apply_F(const ConstraintRule& rule, const SparseState& in);
SparseState apply_Fdag(const ConstraintRule& rule, const SparseState& in);

// Unconstrained collective ladder operators S^± = sum_j sigma_j^±.
PureState apply_splus(const PureState& in);
PureState apply_sminus(const PureState& in);

// <psi|F^dag F|psi> = |F psi|^2 (unnormalized).
double expect_fdagf(const ConstraintRule& rule, const PureState& psi);

// Diagonal observables as dense vectors over configurations.
std::vector<double> diag_sz(int n);                       // sum_j sigma_j^z / 2
std::vector<double> diag_nmean(int n);                    // (1/n) sum_j n_j
std::vector<double> diag_nadj(int n, Boundary b);         // sum n_j n_{j+1}
std::vector<double> diag_ntri(int n, Boundary b);         // sum n_j n_{j+1} n_{j+2}
std::vector<double> diag_nnn(int n, Boundary b);          // sum n_j n_{j+2}

double expect_diag(const std::vector<double>& diag, const PureState& psi);
double expect_sperp2(const PureState& psi); // <(S^+S^- + S^-S^+)/2>

// Flattened F action on the 2^n basis: |to⟩ += psi[from] for each entry.
struct FTransitions {
    int n_sites = 0;
    std::vector<std::uint32_t> from, to;
};

FTransitions build_transitions(const ConstraintRule& rule, int n);

void apply_F(const FTransitions& t, const cplx* in, cplx* out);     // out += F in
void apply_Fdag(const FTransitions& t, const cplx* in, cplx* out);  // out += F^dag in

// All configs of n sites with m sites up, ascending.
std::vector<std::uint32_t> sector_configs(int n, int m);

} // namespace kcs
