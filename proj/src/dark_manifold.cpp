#include "kcs/dark_manifold.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "kcs/errors.hpp"

namespace kcs {

std::string dark_class_name(DarkClass c) {
    switch (c) {
        case DarkClass::bitstring: return "Bitstring";
        case DarkClass::singlet: return "Singlet";
        case DarkClass::triple_plus: return "Triple+";
    }
    return "?";
}

namespace {

constexpr double kSingularCutoff = 1e-10;
constexpr double kClassThreshold = 1e-8;
constexpr double kDarkTol = 1e-10;

DarkClass classify(double nadj, double ntri) {
    if (ntri >= kClassThreshold) return DarkClass::triple_plus;
    if (nadj >= kClassThreshold) return DarkClass::singlet;
    return DarkClass::bitstring;
}

int wrap_site(int j, int n) { return ((j - 1) % n + n) % n + 1; }

// Children of a sector config under F, with multiplicity by emitting site.
std::vector<std::uint32_t> decay_children(const ConstraintRule& rule, SpinConfig c) {
    std::vector<std::uint32_t> out;
    for (int j = 1; j <= c.n_sites; ++j) {
        if (!c.up(j)) continue;
        if (!constraint_allows(rule, c, j)) continue;
        out.push_back(c.bits & ~(1u << (j - 1)));
    }
    return out;
}

int max_run(std::uint32_t bits, int n) {
    int best = 0, cur = 0;
    for (int b = 0; b < n; ++b) {
        if ((bits >> b) & 1u) {
            ++cur;
            best = std::max(best, cur);
        } else {
            cur = 0;
        }
    }
    return best;
}

bool independent_set(SpinConfig c, Boundary b) {
    std::uint32_t shifted = c.bits & (c.bits >> 1);
    if (shifted != 0) return false;
    if (b == Boundary::periodic && c.n_sites > 1 && c.up(1) && c.up(c.n_sites)) return false;
    return true;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    }
};

} // namespace

DarkBasis kernel_basis(const ConstraintRule& rule, int n) {
    if (n < 1 || n > 14) throw ResourceError("kernel_basis: site count out of range");

    DarkBasis basis;
    basis.rule = rule;
    basis.n_sites = n;
    auto nadj_diag = diag_nadj(n, rule.boundary);
    auto ntri_diag = diag_ntri(n, rule.boundary);

    auto add_vector = [&](const PureState& v, int sector) {
        double na = expect_diag(nadj_diag, v);
        double nt = expect_diag(ntri_diag, v);
        basis.vectors.push_back(v);
        basis.nadj.push_back(na);
        basis.ntri.push_back(nt);
        basis.labels.push_back(classify(na, nt));
        basis.sector.push_back(sector);
    };

    for (int m = 0; m <= n; ++m) {
        auto configs = sector_configs(n, m);
        std::unordered_map<std::uint32_t, int> child_index;
        std::vector<std::uint32_t> children;
        std::vector<std::vector<std::pair<int, int>>> entries(configs.size());
        // Configs with no decay channel are dark on their own; keeping them as
        // basis states (instead of letting the null space rotate them into the
        // packet directions) makes the class labels count them exactly.
        std::vector<std::uint32_t> active;
        for (std::size_t col = 0; col < configs.size(); ++col) {
            auto kids = decay_children(rule, SpinConfig{configs[col], n});
            if (kids.empty()) {
                add_vector(PureState::basis(n, configs[col]), m);
                continue;
            }
            std::size_t acol = active.size();
            active.push_back(configs[col]);
            entries[acol].clear();
            for (auto child : kids) {
                auto [it, fresh] = child_index.try_emplace(child, static_cast<int>(children.size()));
                if (fresh) children.push_back(child);
                entries[acol].emplace_back(it->second, 1);
            }
        }
        if (active.empty()) continue;

        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(children.size()),
                                                  static_cast<Eigen::Index>(active.size()));
        for (std::size_t col = 0; col < active.size(); ++col)
            for (auto [row, w] : entries[col]) a(row, static_cast<Eigen::Index>(col)) += w;

        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        double cutoff = kSingularCutoff * sv(0);
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > cutoff) ++rank;

        for (Eigen::Index k = rank; k < a.cols(); ++k) {
            PureState v(n);
            for (std::size_t col = 0; col < active.size(); ++col)
                v.amp[active[col]] = svd.matrixV()(static_cast<Eigen::Index>(col), k);
            add_vector(v, m);
        }
    }
    return basis;
}

std::vector<SpinConfig> enumerate_bitstring_dark(int n, Boundary b) {
    if (n < 1 || n > 28) throw ResourceError("enumerate_bitstring_dark: site count out of range");
    std::vector<SpinConfig> out;
    std::uint64_t dim = std::uint64_t{1} << n;
    for (std::uint64_t bits = 0; bits < dim; ++bits) {
        SpinConfig c{static_cast<std::uint32_t>(bits), n};
        if (independent_set(c, b)) out.push_back(c);
    }
    return out;
}

std::vector<int> facilitable_zeros_single(SpinConfig root, Boundary b) {
    int n = root.n_sites;
    std::vector<int> out;
    int i_start = (b == Boundary::open) ? 2 : 1;
    for (int i = i_start; i <= n; ++i) {
        if (!root.up(wrap_site(i - 1, n))) continue;
        if (root.up(i)) continue;
        bool right_clear;
        if (b == Boundary::open)
            right_clear = (i == n) || !root.up(i + 1);
        else
            right_clear = !root.up(wrap_site(i + 1, n));
        if (right_clear) out.push_back(i);
    }
    return out;
}

std::vector<int> facilitable_zeros_pair(SpinConfig root, Boundary b) {
    int n = root.n_sites;
    std::vector<int> out;
    if (b == Boundary::open) {
        for (int i = 2; i <= n - 1; ++i) {
            if (!root.up(i - 1)) continue;
            if (root.up(i) || root.up(i + 1)) continue;
            if (i + 2 <= n && root.up(i + 2)) continue;
            out.push_back(i);
        }
    } else {
        for (int i = 1; i <= n; ++i) {
            if (!root.up(wrap_site(i - 1, n))) continue;
            if (root.up(i) || root.up(wrap_site(i + 1, n)) || root.up(wrap_site(i + 2, n)))
                continue;
            out.push_back(i);
        }
    }
    return out;
}

namespace {

void require_dark(const ConstraintRule& rule, const PureState& v, const char* what) {
    PureState fv = apply_F(rule, v);
    double res = std::sqrt(fv.norm2() / v.norm2());
    if (res >= kDarkTol)
        throw NumericError(std::string(what) + ": constructed state is not dark, residual " +
                           std::to_string(res));
}

bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

} // namespace

PureState dimer_packet(SpinConfig root, int i, int j, Boundary b) {
    int n = root.n_sites;
    if (!independent_set(root, b)) throw ConfigError("dimer_packet: root is not an independent set");
    auto s1 = facilitable_zeros_single(root, b);
    if (i == j || !contains(s1, i) || !contains(s1, j))
        throw ConfigError("dimer_packet: sites are not facilitable zeros of the root");
    PureState v(n);
    v.amp[root.bits | (1u << (i - 1))] = 1.0;
    v.amp[root.bits | (1u << (j - 1))] = -1.0;
    require_dark(ConstraintRule::east(b), v, "dimer_packet");
    return v;
}

PureState triple_packet(SpinConfig root, int i, int j, Boundary b) {
    int n = root.n_sites;
    if (!independent_set(root, b)) throw ConfigError("triple_packet: root is not an independent set");
    if (i > j) std::swap(i, j);
    auto s2 = facilitable_zeros_pair(root, b);
    if (i == j || !contains(s2, i) || !contains(s2, j))
        throw ConfigError("triple_packet: sites are not facilitable pair-zeros of the root");
    bool disjoint;
    if (b == Boundary::open) {
        disjoint = (j - i) >= 4;
    } else {
        int d = j - i;
        disjoint = d >= 4 && (n - d) >= 4;
    }
    if (!disjoint) throw ConfigError("triple_packet: packet windows overlap");

    auto up2 = [&](int a, int c) {
        return root.bits | (1u << (wrap_site(a, n) - 1)) | (1u << (wrap_site(c, n) - 1));
    };
    PureState v(n);
    v.amp[up2(i, i + 1)] += 1.0;
    v.amp[up2(j, j + 1)] += 1.0;
    v.amp[up2(i, j + 1)] -= 1.0;
    v.amp[up2(i + 1, j)] -= 1.0;
    v.amp[up2(i, j)] -= 1.0;
    require_dark(ConstraintRule::east(b), v, "triple_packet");
    return v;
}

PureState build_omega(int m, int window_length) {
    if (m < 2) throw ConfigError("build_omega: need m >= 2");
    if (window_length < 2 * m + 1)
        throw ConfigError("build_omega: window must hold at least 2m+1 sites");
    if (window_length > 20) throw ResourceError("build_omega: window too large");
    int L = window_length;

    std::uint32_t seed = ((1u << m) - 1u) | (1u << (m + 1)); // 1^m 0 1 0^(m-1)
    int seed_pop = m + 1;

    // The packet lives entirely in the seed's excitation sector, so the
    // nullspace problem is posed there: columns are same-count window
    // configurations, rows their one-decay children.
    std::vector<std::uint32_t> cand;
    std::unordered_map<std::uint32_t, int> cand_index;
    for (std::uint32_t c = 0; c < (1u << L); ++c) {
        if (__builtin_popcount(c) != seed_pop) continue;
        if (max_run(c, L) > m) continue;
        cand_index.emplace(c, static_cast<int>(cand.size()));
        cand.push_back(c);
    }

    auto rule = ConstraintRule::east(Boundary::open);
    std::unordered_map<std::uint32_t, int> row_index;
    for (auto c : cand)
        for (auto child : decay_children(rule, SpinConfig{c, L}))
            row_index.emplace(child, static_cast<int>(row_index.size()));

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(std::max<std::size_t>(row_index.size(), 1)),
        static_cast<Eigen::Index>(cand.size()));
    for (std::size_t col = 0; col < cand.size(); ++col)
        for (auto child : decay_children(rule, SpinConfig{cand[col], L}))
            a(row_index.at(child), static_cast<Eigen::Index>(col)) += 1.0;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double cutoff = kSingularCutoff * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;

    int seed_col = cand_index.at(seed);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cand.size()));
    for (Eigen::Index k = rank; k < a.cols(); ++k)
        w += svd.matrixV()(seed_col, k) * svd.matrixV().col(k);
    double seed_coeff = w(seed_col);
    if (std::abs(seed_coeff) < 1e-12)
        throw NumericError("build_omega: kernel contains no vector with the seed");
    w /= seed_coeff;

    PureState v(L);
    for (std::size_t idx = 0; idx < cand.size(); ++idx)
        if (std::abs(w(static_cast<Eigen::Index>(idx))) > 1e-12)
            v.amp[cand[idx]] = w(static_cast<Eigen::Index>(idx));
    require_dark(rule, v, "build_omega");
    return v;
}

namespace {

// Dark combinations of `k` excitations confined to the empty stretches after
// two root ups, found as the nullspace of the decay map restricted to that
// support. One excitation gives the dimer and two the triple; from three on
// (both stretches at least four sites) closed forms get unwieldy and the
// small solve is used instead.
void two_zone_packets(const ConstraintRule& rule, SpinConfig root,
                      const std::vector<int>& sites, int k, std::vector<PureState>& out) {
    int n = root.n_sites;
    const int s = static_cast<int>(sites.size());
    if (k > s) return;

    std::vector<std::uint32_t> cand;
    std::vector<int> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        std::uint32_t bits = root.bits;
        for (int t : idx) bits |= 1u << (sites[static_cast<std::size_t>(t)] - 1);
        cand.push_back(bits);
        int pos = k - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == s - k + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int q = pos + 1; q < k; ++q)
            idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
    }

    std::unordered_map<std::uint32_t, int> row_index;
    for (auto c : cand)
        for (auto child : decay_children(rule, SpinConfig{c, n}))
            row_index.emplace(child, static_cast<int>(row_index.size()));

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(std::max<std::size_t>(row_index.size(), 1)),
        static_cast<Eigen::Index>(cand.size()));
    for (std::size_t col = 0; col < cand.size(); ++col)
        for (auto child : decay_children(rule, SpinConfig{cand[col], n}))
            a(row_index.at(child), static_cast<Eigen::Index>(col)) += 1.0;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double cutoff = sv.size() > 0 ? kSingularCutoff * sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;

    for (Eigen::Index col = rank; col < a.cols(); ++col) {
        PureState v(n);
        for (std::size_t r = 0; r < cand.size(); ++r) {
            double w = svd.matrixV()(static_cast<Eigen::Index>(r), col);
            if (std::abs(w) > 1e-12) v.amp[cand[r]] = w;
        }
        require_dark(rule, v, "two_zone_packets");
        out.push_back(v);
    }
}

// Place a window state onto an n-site chain at a 0-based offset, all other
// sites down. On the ring the placement is a rotation.
PureState embed_window(const PureState& win, int n, int offset, Boundary b) {
    PureState out(n);
    std::uint32_t mask = (n == 28) ? 0x0fffffffu : ((1u << n) - 1u);
    for (std::uint32_t c = 0; c < win.dim(); ++c) {
        if (win.amp[c] == cplx{0.0, 0.0}) continue;
        std::uint32_t shifted;
        if (b == Boundary::open)
            shifted = c << offset;
        else
            shifted = ((c << offset) | (c >> (n - offset))) & mask;
        out.amp[shifted] = win.amp[c];
    }
    return out;
}

} // namespace

std::vector<PureState> east_packet_spanning_set(int n, Boundary b) {
    if (n < 2 || n > 14) throw ResourceError("east_packet_spanning_set: site count out of range");
    std::vector<PureState> out;

    auto roots = enumerate_bitstring_dark(n, b);
    for (auto r : roots) out.push_back(PureState::basis(n, r.bits));

    for (auto r : roots) {
        auto s1 = facilitable_zeros_single(r, b);
        for (std::size_t x = 0; x < s1.size(); ++x)
            for (std::size_t y = x + 1; y < s1.size(); ++y)
                out.push_back(dimer_packet(r, s1[x], s1[y], b));

        auto s2 = facilitable_zeros_pair(r, b);
        for (std::size_t x = 0; x < s2.size(); ++x)
            for (std::size_t y = x + 1; y < s2.size(); ++y) {
                int i = s2[x], j = s2[y];
                bool disjoint = (b == Boundary::open)
                                    ? (j - i) >= 4
                                    : ((j - i) >= 4 && (n - (j - i)) >= 4);
                if (!disjoint) continue;
                out.push_back(triple_packet(r, i, j, b));
            }
    }

    int max_window = (b == Boundary::open) ? n : n - 1;
    auto east = ConstraintRule::east(b);
    for (int m = 2; 2 * m + 1 <= max_window; ++m) {
        auto omega = build_omega(m, 2 * m + 1);
        int last_offset = (b == Boundary::open) ? n - (2 * m + 1) : n - 1;
        for (int offset = 0; offset <= last_offset; ++offset) {
            auto v = embed_window(omega, n, offset, b);
            require_dark(east, v, "east_packet_spanning_set");
            out.push_back(v);
        }
    }

    // Deeper two-zone packets. The minimal-window omegas above bind a run to
    // one lone partner up; once the stretches after two root ups both hold
    // four or more sites, additional dark combinations appear (on the ring
    // the first is the antisymmetric wrap pairing of two gap-5 stretches at
    // half filling) that no single window placement produces. Solve for all
    // of them directly on the restricted support.
    for (auto r : roots) {
        std::vector<int> ups;
        for (int s = 1; s <= n; ++s)
            if (r.up(s)) ups.push_back(s);
        if (ups.size() < 2) continue;

        // Empty stretch following site a, and whether a root up bounds it.
        auto zone_after = [&](int a, bool& bounded) {
            std::vector<int> z;
            bounded = true;
            for (int step = 1; step <= n; ++step) {
                if (b == Boundary::open && a + step > n) {
                    bounded = false;
                    break;
                }
                int site = (b == Boundary::open) ? a + step : wrap_site(a + step, n);
                if (r.up(site)) break;
                z.push_back(site);
            }
            return z;
        };

        for (std::size_t x = 0; x < ups.size(); ++x) {
            bool bx = true;
            auto za = zone_after(ups[x], bx);
            int capa = static_cast<int>(za.size()) - (bx ? 1 : 0);
            if (capa < 3) continue;
            for (std::size_t y = x + 1; y < ups.size(); ++y) {
                bool by = true;
                auto zb = zone_after(ups[y], by);
                int capb = static_cast<int>(zb.size()) - (by ? 1 : 0);
                if (capb < 3) continue;
                std::vector<int> sites = za;
                sites.insert(sites.end(), zb.begin(), zb.end());
                for (int k = 3; k <= std::min(capa, capb); ++k)
                    two_zone_packets(east, r, sites, k, out);
            }
        }
    }
    return out;
}

FragmentationReport fragmentation_report(const ConstraintRule& rule, int n) {
    if (n < 1 || n > 14) throw ResourceError("fragmentation_report: site count out of range");
    FragmentationReport rep;
    rep.rule = rule;
    rep.n_sites = n;

    for (int m = 0; m <= n; ++m) {
        auto configs = sector_configs(n, m);
        UnionFind uf(configs.size());
        std::unordered_map<std::uint32_t, std::size_t> first_parent;
        for (std::size_t idx = 0; idx < configs.size(); ++idx) {
            for (auto child : decay_children(rule, SpinConfig{configs[idx], n})) {
                auto [it, fresh] = first_parent.try_emplace(child, idx);
                if (!fresh) uf.unite(it->second, idx);
            }
        }

        SectorFragmentation frag;
        frag.sector = m;
        frag.dimension = configs.size();
        std::unordered_map<std::size_t, std::size_t> comp_size;
        for (std::size_t idx = 0; idx < configs.size(); ++idx) ++comp_size[uf.find(idx)];
        frag.n_components = comp_size.size();
        for (const auto& [root, size] : comp_size) ++frag.size_histogram[size];
        rep.sectors.push_back(std::move(frag));
    }
    return rep;
}

DarkCheck is_dark(const ConstraintRule& rule, const PureState& state, double tol) {
    double n2 = state.norm2();
    if (n2 <= 0.0) throw ConfigError("is_dark: zero state");
    PureState f = apply_F(rule, state);
    DarkCheck chk;
    chk.residual = std::sqrt(f.norm2() / n2);
    chk.dark = chk.residual < tol;
    return chk;
}

} // namespace kcs
