#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kcs/spin_algebra.hpp"

namespace kcs {

enum class DarkClass { bitstring, singlet, triple_plus };

std::string dark_class_name(DarkClass c);

// Orthonormal basis of ker F, organized by magnetization sector and labeled
// by the adjacent-pair / triple-count signature of each vector.
struct DarkBasis {
    ConstraintRule rule;
    int n_sites = 0;
    std::vector<PureState> vectors;
    std::vector<DarkClass> labels;
    std::vector<double> nadj;   // <N_adj> per vector
    std::vector<double> ntri;   // <N_tri> per vector
    std::vector<int> sector;    // excitation count per vector

    std::size_t size() const { return vectors.size(); }
};

struct SectorFragmentation {
    int sector = 0;
    std::size_t dimension = 0;
    std::size_t n_components = 0;
    std::map<std::size_t, std::size_t> size_histogram; // component size -> count
};

struct FragmentationReport {
    ConstraintRule rule;
    int n_sites = 0;
    std::vector<SectorFragmentation> sectors;
};

struct DarkCheck {
    double residual = 0.0; // ||F psi|| / ||psi||
    bool dark = false;
};

// Sector-wise nullspace of F via singular-value decomposition. The kernel is
// block diagonal in the total magnetization since [S^z, F] = -F.
DarkBasis kernel_basis(const ConstraintRule& rule, int n);

// All configurations with no two adjacent up spins (wrap pair included on the
// ring). These product states are dark for every facilitation rule that
// requires an occupied neighbor.
std::vector<SpinConfig> enumerate_bitstring_dark(int n, Boundary b);

// Facilitable zeros of an independent-set root: sites where one extra up spin
// can decay back onto the root in exactly one way.
std::vector<int> facilitable_zeros_single(SpinConfig root, Boundary b);
// Sites that can host the two-excitation end of a triple packet.
std::vector<int> facilitable_zeros_pair(SpinConfig root, Boundary b);

// (sigma_i^+ - sigma_j^+) |root>, dark by pairwise cancellation.
PureState dimer_packet(SpinConfig root, int i, int j, Boundary b);
// Five-term packet placing excitation pairs at i and j on top of the root.
PureState triple_packet(SpinConfig root, int i, int j, Boundary b);

// Solves for the dark packet pinned to the seed 1^m 0 1 0^(m-1) inside a
// window, restricted to configurations with at most the seed's excitation
// count and maximal run length m.
PureState build_omega(int m, int window_length);

// Bitstring darks, dimers, triples, embedded omega packets, and deeper
// two-zone packets for the east rule; every returned vector is verified
// dark. Spans the full kernel for n <= 10 on both boundaries.
std::vector<PureState> east_packet_spanning_set(int n, Boundary b);

FragmentationReport fragmentation_report(const ConstraintRule& rule, int n);

DarkCheck is_dark(const ConstraintRule& rule, const PureState& state, double tol = 1e-10);

} // namespace kcs
