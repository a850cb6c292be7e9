#include "kcs/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace kcs {

namespace {

void check_sites(const Eigen::MatrixXcd& rho, int n) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    if (n < 1 || rho.rows() != dim || rho.cols() != dim)
        throw ConfigError("entanglement: matrix shape does not match site count");
}

double entropy(const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()[i];
        if (lam > 0.0) s -= lam * std::log(lam);
    }
    return s;
}

} // namespace

Bipartition Bipartition::half(int n) {
    Bipartition part;
    part.n_sites = n;
    for (int j = 1; j <= (n + 1) / 2; ++j) part.sites_a.push_back(j);
    part.validate();
    return part;
}

void Bipartition::validate() const {
    if (n_sites < 2) throw ConfigError("Bipartition: need at least two sites");
    if (sites_a.empty()) throw ConfigError("Bipartition: subset A is empty");
    if (static_cast<int>(sites_a.size()) >= n_sites)
        throw ConfigError("Bipartition: subset A must be a proper subset");
    std::vector<int> sorted = sites_a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 1 || sorted[i] > n_sites)
            throw ConfigError("Bipartition: site " + std::to_string(sorted[i]) + " out of range");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw ConfigError("Bipartition: duplicate site " + std::to_string(sorted[i]));
    }
}

std::uint32_t Bipartition::mask_a() const {
    std::uint32_t m = 0;
    for (int j : sites_a) m |= 1u << (j - 1);
    return m;
}

const char* witness_verdict_name(WitnessVerdict v) {
    return v == WitnessVerdict::entangled ? "Entangled" : "Inconclusive";
}

Eigen::MatrixXcd partial_transpose(const Eigen::MatrixXcd& rho, const Bipartition& part) {
    part.validate();
    check_sites(rho, part.n_sites);
    const std::uint32_t dim = 1u << part.n_sites;
    const std::uint32_t mask_a = part.mask_a();
    const std::uint32_t mask_b = (dim - 1) & ~mask_a;
    Eigen::MatrixXcd out(dim, dim);
    for (std::uint32_t r = 0; r < dim; ++r)
        for (std::uint32_t c = 0; c < dim; ++c)
            out((r & mask_a) | (c & mask_b), (c & mask_a) | (r & mask_b)) = rho(r, c);
    return out;
}

double log_negativity(const DensityMatrix& rho, const Bipartition& part) {
    if (rho.n_sites != part.n_sites)
        throw ConfigError("log_negativity: partition and state disagree on site count");
    if (rho.n_sites > 12) throw ResourceError("log_negativity: capped at 12 sites");
    rho.validate(false);
    const Eigen::MatrixXcd pt = partial_transpose(rho.rho, part);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pt, Eigen::EigenvaluesOnly);
    const double trace_norm = es.eigenvalues().cwiseAbs().sum();
    double en = std::log(trace_norm);
    if (en < 0.0) {
        if (en < -1e-10)
            throw NumericError("log_negativity: value " + std::to_string(en) +
                               " below the numerical floor");
        en = 0.0;
    }
    return en;
}

Eigen::MatrixXcd reduced_density(const Eigen::MatrixXcd& rho, int n_sites,
                                 const std::vector<int>& sites) {
    check_sites(rho, n_sites);
    std::vector<int> kept = sites;
    std::sort(kept.begin(), kept.end());
    if (kept.empty() || kept.front() < 1 || kept.back() > n_sites ||
        std::adjacent_find(kept.begin(), kept.end()) != kept.end())
        throw ConfigError("reduced_density: invalid site list");

    std::vector<int> env;
    for (int j = 1; j <= n_sites; ++j)
        if (!std::binary_search(kept.begin(), kept.end(), j)) env.push_back(j);

    const auto spread = [](std::uint32_t local, const std::vector<int>& where) {
        std::uint32_t bits = 0;
        for (std::size_t t = 0; t < where.size(); ++t)
            bits |= ((local >> t) & 1u) << (where[t] - 1);
        return bits;
    };

    const std::uint32_t dim_k = 1u << kept.size();
    const std::uint32_t dim_e = 1u << env.size();
    std::vector<std::uint32_t> kept_bits(dim_k), env_bits(dim_e);
    for (std::uint32_t a = 0; a < dim_k; ++a) kept_bits[a] = spread(a, kept);
    for (std::uint32_t e = 0; e < dim_e; ++e) env_bits[e] = spread(e, env);

    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim_k, dim_k);
    for (std::uint32_t a = 0; a < dim_k; ++a)
        for (std::uint32_t b = 0; b < dim_k; ++b) {
            cplx sum = 0.0;
            for (std::uint32_t e = 0; e < dim_e; ++e)
                sum += rho(kept_bits[a] | env_bits[e], kept_bits[b] | env_bits[e]);
            out(a, b) = sum;
        }
    return out;
}

Eigen::MatrixXd mutual_information_matrix(const DensityMatrix& rho) {
    if (rho.n_sites > 12) throw ResourceError("mutual_information_matrix: capped at 12 sites");
    rho.validate(false);
    const int n = rho.n_sites;

    std::vector<double> s1(n);
    for (int i = 0; i < n; ++i) s1[i] = entropy(reduced_density(rho.rho, n, {i + 1}));

    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double s2 = entropy(reduced_density(rho.rho, n, {i + 1, j + 1}));
            double mi = s1[i] + s1[j] - s2;
            if (mi < 0.0) {
                if (mi < -1e-10)
                    throw NumericError("mutual_information_matrix: entry " + std::to_string(mi) +
                                       " below the numerical floor");
                mi = 0.0;
            }
            info(i, j) = info(j, i) = mi;
        }
    return info;
}

WitnessReport witness(const DensityMatrix& rho, const ConstraintRule& rule, double tol) {
    rho.validate(false);
    const int n = rho.n_sites;

    // F^dag F = sum_c v_c v_c^dag with v_c the indicator over the parents of
    // child configuration c, so the trace groups transitions by child.
    const FTransitions trans = build_transitions(rule, n);
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> parents;
    for (std::size_t e = 0; e < trans.to.size(); ++e)
        parents[trans.to[e]].push_back(trans.from[e]);

    cplx residual = 0.0;
    for (const auto& [child, from] : parents) {
        (void)child;
        for (std::uint32_t p : from)
            for (std::uint32_t q : from) residual += rho.rho(p, q);
    }

    const std::vector<double> nadj_diag = diag_nadj(n, rule.boundary);
    double nadj = 0.0;
    for (std::uint32_t c = 0; c < (1u << n); ++c)
        nadj += nadj_diag[c] * rho.rho(c, c).real();

    WitnessReport report;
    report.dark_residual = residual.real();
    report.nadj = nadj;
    report.verdict = (report.dark_residual < tol && report.nadj > tol)
                         ? WitnessVerdict::entangled
                         : WitnessVerdict::inconclusive;
    return report;
}

double product_state_FdagF(const std::vector<double>& p, const std::vector<cplx>& s) {
    const int n = static_cast<int>(p.size());
    if (n < 2) throw ConfigError("product_state_FdagF: need at least two sites");
    if (s.size() != p.size())
        throw ConfigError("product_state_FdagF: p and s must have the same length");
    for (int j = 0; j < n; ++j) {
        if (!(p[j] >= 0.0 && p[j] <= 1.0))
            throw ConfigError("product_state_FdagF: p[" + std::to_string(j) +
                              "] outside [0, 1]");
        if (std::norm(s[j]) > p[j] * (1.0 - p[j]) + 1e-12)
            throw ConfigError("product_state_FdagF: |s[" + std::to_string(j) +
                              "]|^2 exceeds p(1-p)");
    }
    cplx coherent = 0.0;
    double bonds = 0.0;
    for (int j = 0; j < n; ++j) {
        const double p_left = p[(j + n - 1) % n];
        coherent += p_left * s[j];
        bonds += p_left * p[j] * p[j];
    }
    return std::norm(coherent) + bonds;
}

} // namespace kcs
