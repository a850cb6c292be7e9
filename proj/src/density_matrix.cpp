#include "kcs/density_matrix.hpp"

namespace kcs {

DensityMatrix DensityMatrix::zero(int n) {
    if (n < 1) throw ConfigError("DensityMatrix: need at least one site");
    if (n > 12) throw ResourceError("DensityMatrix: dense states are capped at 12 sites");
    DensityMatrix dm;
    dm.n_sites = n;
    dm.rho = Eigen::MatrixXcd::Zero(1 << n, 1 << n);
    return dm;
}

DensityMatrix DensityMatrix::pure(const PureState& psi) {
    DensityMatrix dm = zero(psi.n_sites);
    Eigen::Map<const Eigen::VectorXcd> v(psi.amp.data(), static_cast<Eigen::Index>(psi.dim()));
    dm.rho = v * v.adjoint();
    return dm;
}

void DensityMatrix::validate(bool check_positivity) const {
    const Eigen::Index dim = Eigen::Index(1) << n_sites;
    if (n_sites < 1 || rho.rows() != dim || rho.cols() != dim)
        throw ConfigError("DensityMatrix: matrix shape does not match site count");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-10)
        throw NumericError("DensityMatrix: not Hermitian, deviation " + std::to_string(herm));
    const double tr_err = std::abs(rho.trace() - cplx(1.0, 0.0));
    if (tr_err > 1e-10)
        throw NumericError("DensityMatrix: trace deviates from 1 by " + std::to_string(tr_err));
    if (check_positivity) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        if (lo < -1e-8)
            throw NumericError("DensityMatrix: negative eigenvalue " + std::to_string(lo));
    }
}

} // namespace kcs
