#pragma once

#include <Eigen/Dense>

#include "kcs/errors.hpp"
#include "kcs/spin_algebra.hpp"

namespace kcs {

// Unconditional state as a dense matrix over the 2^n configuration basis,
// indexed like PureState (site 1 = bit 0).
struct DensityMatrix {
    int n_sites = 0;
    Eigen::MatrixXcd rho;

    static DensityMatrix zero(int n);
    static DensityMatrix pure(const PureState& psi);

    // Hermitian to 1e-10, unit trace to 1e-10 and, when requested, smallest
    // eigenvalue above -1e-8. Shape problems are ConfigError, value problems
    // NumericError.
    void validate(bool check_positivity = true) const;
};

} // namespace kcs
