#include "kcs/spin_algebra.hpp"

#include <algorithm>
#include <cmath>

namespace kcs {

std::string SpinConfig::to_string() const {
    std::string s(static_cast<std::size_t>(n_sites), '0');
    for (int j = 1; j <= n_sites; ++j)
        if (up(j)) s[static_cast<std::size_t>(j - 1)] = '1';
    return s;
}

SpinConfig SpinConfig::from_string(const std::string& s) {
    if (s.empty() || s.size() > 28) throw ConfigError("bitstring length must be 1..28");
    SpinConfig c{0, static_cast<int>(s.size())};
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1')
            c.bits |= (1u << i);
        else if (s[i] != '0')
            throw ConfigError("bitstring may contain only '0' and '1'");
    }
    return c;
}

ConstraintRule ConstraintRule::dicke() { return ConstraintRule{RuleKind::dicke, 0}; }

ConstraintRule ConstraintRule::east(Boundary b) {
    ConstraintRule r{RuleKind::east, 1};
    r.boundary = b;
    return r;
}

ConstraintRule ConstraintRule::and_rule(Boundary b, bool fill) {
    ConstraintRule r{RuleKind::and_rule, 1};
    r.boundary = b;
    r.open_fill_occupied = fill;
    return r;
}

ConstraintRule ConstraintRule::or_rule(Boundary b, bool fill) {
    ConstraintRule r{RuleKind::or_rule, 1};
    r.boundary = b;
    r.open_fill_occupied = fill;
    return r;
}

ConstraintRule ConstraintRule::custom(int range, std::vector<std::uint8_t> table, Boundary b,
                                      bool fill) {
    if (range < 1 || range > 3) throw ConfigError("custom constraint range must be 1..3");
    const std::size_t want = 1u << (2 * range);
    if (table.size() != want)
        throw ConfigError("custom constraint table must have 2^(2*range) entries");
    if (!table.back())
        throw ConfigError("custom constraint must facilitate the fully occupied neighborhood");
    ConstraintRule r{RuleKind::custom, range};
    r.boundary = b;
    r.open_fill_occupied = fill;
    r.table = std::move(table);
    return r;
}

std::string ConstraintRule::name() const {
    switch (kind) {
        case RuleKind::dicke: return "dicke";
        case RuleKind::east: return "east";
        case RuleKind::and_rule: return "and";
        case RuleKind::or_rule: return "or";
        case RuleKind::custom: return "custom";
    }
    return "?";
}

namespace {

// Occupation of site j+d (d signed, d != 0). Returns -1 when the site falls
// off an open chain.
inline int neighbor_occ(SpinConfig c, int j, int d, Boundary b) {
    int s = j + d;
    if (b == Boundary::periodic) {
        s = ((s - 1) % c.n_sites + c.n_sites) % c.n_sites + 1;
        return c.up(s) ? 1 : 0;
    }
    if (s < 1 || s > c.n_sites) return -1;
    return c.up(s) ? 1 : 0;
}

} // namespace

bool constraint_allows(const ConstraintRule& rule, SpinConfig c, int j) {
    switch (rule.kind) {
        case RuleKind::dicke: return true;
        case RuleKind::east: {
            const int l = neighbor_occ(c, j, -1, rule.boundary);
            return l == 1; // a missing left neighbor blocks
        }
        case RuleKind::and_rule: {
            int l = neighbor_occ(c, j, -1, rule.boundary);
            int r = neighbor_occ(c, j, +1, rule.boundary);
            if (l < 0) l = rule.open_fill_occupied ? 1 : 0;
            if (r < 0) r = rule.open_fill_occupied ? 1 : 0;
            return l && r;
        }
        case RuleKind::or_rule: {
            int l = neighbor_occ(c, j, -1, rule.boundary);
            int r = neighbor_occ(c, j, +1, rule.boundary);
            if (l < 0) l = rule.open_fill_occupied ? 1 : 0;
            if (r < 0) r = rule.open_fill_occupied ? 1 : 0;
            return l || r;
        }
        case RuleKind::custom: {
            unsigned idx = 0;
            for (int d = 1; d <= rule.range; ++d) {
                int l = neighbor_occ(c, j, -d, rule.boundary);
                int r = neighbor_occ(c, j, +d, rule.boundary);
                if (l < 0) l = rule.open_fill_occupied ? 1 : 0;
                if (r < 0) r = rule.open_fill_occupied ? 1 : 0;
                idx |= static_cast<unsigned>(l) << (d - 1);
                idx |= static_cast<unsigned>(r) << (rule.range + d - 1);
            }
            return rule.table[idx] != 0;
        }
    }
    return false;
}

PureState::PureState(int n) : n_sites(n) {
    if (n < 1 || n > 24) throw ResourceError("dense states support 1..24 sites");
    amp.assign(std::size_t{1} << n, cplx{0.0, 0.0});
}

PureState PureState::all_up(int n) {
    PureState s(n);
    s.amp[(std::size_t{1} << n) - 1] = 1.0;
    return s;
}

PureState PureState::basis(int n, std::uint32_t bits) {
    PureState s(n);
    s.amp.at(bits) = 1.0;
    return s;
}

double PureState::norm2() const {
    double acc = 0.0;
    for (const cplx& a : amp) acc += std::norm(a);
    return acc;
}

void PureState::normalize() {
    const double n2 = norm2();
    if (n2 <= 0.0) throw NumericError("cannot normalize a zero state");
    const double s = 1.0 / std::sqrt(n2);
    for (cplx& a : amp) a *= s;
}

double SparseState::norm2() const {
    double acc = 0.0;
    for (const auto& [k, v] : amp) acc += std::norm(v);
    return acc;
}

void SparseState::normalize() {
    const double n2 = norm2();
    if (n2 <= 0.0) throw NumericError("cannot normalize a zero state");
    const double s = 1.0 / std::sqrt(n2);
    for (auto& [k, v] : amp) v *= s;
}

void SparseState::prune(double rel_tol) {
    double max_mag = 0.0;
    for (const auto& [k, v] : amp) max_mag = std::max(max_mag, std::abs(v));
    const double cut = rel_tol * max_mag;
    for (auto it = amp.begin(); it != amp.end();)
        it = (std::abs(it->second) < cut) ? amp.erase(it) : std::next(it);
}

PureState apply_F(const ConstraintRule& rule, const PureState& in) {
    PureState out(in.n_sites);
    const std::uint32_t dim = 1u << in.n_sites;
    for (std::uint32_t c = 0; c < dim; ++c) {
        if (in.amp[c] == cplx{}) continue;
        const SpinConfig sc{c, in.n_sites};
        for (int j = 1; j <= in.n_sites; ++j) {
            if (!sc.up(j)) continue;
            if (!constraint_allows(rule, sc, j)) continue;
            out.amp[c ^ (1u << (j - 1))] += in.amp[c];
        }
    }
    return out;
}

PureState apply_Fdag(const ConstraintRule& rule, const PureState& in) {
    PureState out(in.n_sites);
    const std::uint32_t dim = 1u << in.n_sites;
    for (std::uint32_t c = 0; c < dim; ++c) {
        if (in.amp[c] == cplx{}) continue;
        const SpinConfig sc{c, in.n_sites};
        for (int j = 1; j <= in.n_sites; ++j) {
            if (sc.up(j)) continue;
            const std::uint32_t raised = c | (1u << (j - 1));
            if (!constraint_allows(rule, SpinConfig{raised, in.n_sites}, j)) continue;
            out.amp[raised] += in.amp[c];
        }
    }
    return out;
}

SparseState apply_F(const ConstraintRule& rule, const SparseState& in) {
    SparseState out;
    out.n_sites = in.n_sites;
    out.amp.reserve(in.amp.size() * 2);
    for (const auto& [c, a] : in.amp) {
        const SpinConfig sc{c, in.n_sites};
        for (int j = 1; j <= in.n_sites; ++j) {
            if (!sc.up(j)) continue;
            if (!constraint_allows(rule, sc, j)) continue;
            out.amp[c ^ (1u << (j - 1))] += a;
        }
    }
    return out;
}

SparseState apply_Fdag(const ConstraintRule& rule, const SparseState& in) {
    SparseState out;
    out.n_sites = in.n_sites;
    out.amp.reserve(in.amp.size() * 2);
    for (const auto& [c, a] : in.amp) {
        const SpinConfig sc{c, in.n_sites};
        for (int j = 1; j <= in.n_sites; ++j) {
            if (sc.up(j)) continue;
            const std::uint32_t raised = c | (1u << (j - 1));
            if (!constraint_allows(rule, SpinConfig{raised, in.n_sites}, j)) continue;
            out.amp[raised] += a;
        }
    }
    return out;
}

PureState apply_splus(const PureState& in) {
    PureState out(in.n_sites);
    const std::uint32_t dim = 1u << in.n_sites;
    for (std::uint32_t c = 0; c < dim; ++c) {
        if (in.amp[c] == cplx{}) continue;
        for (int j = 0; j < in.n_sites; ++j)
            if (!((c >> j) & 1u)) out.amp[c | (1u << j)] += in.amp[c];
    }
    return out;
}

PureState apply_sminus(const PureState& in) {
    PureState out(in.n_sites);
    const std::uint32_t dim = 1u << in.n_sites;
    for (std::uint32_t c = 0; c < dim; ++c) {
        if (in.amp[c] == cplx{}) continue;
        for (int j = 0; j < in.n_sites; ++j)
            if ((c >> j) & 1u) out.amp[c ^ (1u << j)] += in.amp[c];
    }
    return out;
}

double expect_fdagf(const ConstraintRule& rule, const PureState& psi) {
    return apply_F(rule, psi).norm2();
}

std::vector<double> diag_sz(int n) {
    std::vector<double> d(std::size_t{1} << n);
    for (std::uint32_t c = 0; c < d.size(); ++c)
        d[c] = static_cast<double>(__builtin_popcount(c)) - 0.5 * n;
    return d;
}

std::vector<double> diag_nmean(int n) {
    std::vector<double> d(std::size_t{1} << n);
    for (std::uint32_t c = 0; c < d.size(); ++c)
        d[c] = static_cast<double>(__builtin_popcount(c)) / n;
    return d;
}

std::vector<double> diag_nadj(int n, Boundary b) {
    std::vector<double> d(std::size_t{1} << n, 0.0);
    const int pairs = (b == Boundary::periodic) ? n : n - 1;
    for (std::uint32_t c = 0; c < d.size(); ++c) {
        int acc = 0;
        for (int j = 0; j < pairs; ++j) {
            const int k = (j + 1) % n;
            acc += ((c >> j) & 1u) & ((c >> k) & 1u);
        }
        d[c] = acc;
    }
    return d;
}

std::vector<double> diag_ntri(int n, Boundary b) {
    std::vector<double> d(std::size_t{1} << n, 0.0);
    const int triples = (b == Boundary::periodic) ? n : n - 2;
    for (std::uint32_t c = 0; c < d.size(); ++c) {
        int acc = 0;
        for (int j = 0; j < triples; ++j) {
            const int k = (j + 1) % n, l = (j + 2) % n;
            acc += ((c >> j) & 1u) & ((c >> k) & 1u) & ((c >> l) & 1u);
        }
        d[c] = acc;
    }
    return d;
}

std::vector<double> diag_nnn(int n, Boundary b) {
    std::vector<double> d(std::size_t{1} << n, 0.0);
    const int pairs = (b == Boundary::periodic) ? n : n - 2;
    for (std::uint32_t c = 0; c < d.size(); ++c) {
        int acc = 0;
        for (int j = 0; j < pairs; ++j) {
            const int k = (j + 2) % n;
            acc += ((c >> j) & 1u) & ((c >> k) & 1u);
        }
        d[c] = acc;
    }
    return d;
}

double expect_diag(const std::vector<double>& diag, const PureState& psi) {
    double acc = 0.0;
    for (std::size_t c = 0; c < psi.amp.size(); ++c) acc += diag[c] * std::norm(psi.amp[c]);
    return acc;
}

double expect_sperp2(const PureState& psi) {
    return 0.5 * (apply_sminus(psi).norm2() + apply_splus(psi).norm2());
}

FTransitions build_transitions(const ConstraintRule& rule, int n) {
    FTransitions t;
    t.n_sites = n;
    const std::uint32_t dim = 1u << n;
    for (std::uint32_t c = 0; c < dim; ++c) {
        const SpinConfig sc{c, n};
        for (int j = 1; j <= n; ++j) {
            if (!sc.up(j)) continue;
            if (!constraint_allows(rule, sc, j)) continue;
            t.from.push_back(c);
            t.to.push_back(c ^ (1u << (j - 1)));
        }
    }
    return t;
}

void apply_F(const FTransitions& t, const cplx* in, cplx* out) {
    const std::size_t m = t.from.size();
    for (std::size_t i = 0; i < m; ++i) out[t.to[i]] += in[t.from[i]];
}

void apply_Fdag(const FTransitions& t, const cplx* in, cplx* out) {
    const std::size_t m = t.from.size();
    for (std::size_t i = 0; i < m; ++i) out[t.from[i]] += in[t.to[i]];
}

std::vector<std::uint32_t> sector_configs(int n, int m) {
    std::vector<std::uint32_t> out;
    if (m < 0 || m > n) return out;
    const std::uint32_t dim = 1u << n;
    for (std::uint32_t c = 0; c < dim; ++c)
        if (__builtin_popcount(c) == m) out.push_back(c);
    return out;
}

} // namespace kcs
