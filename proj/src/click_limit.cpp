#include "kcs/click_limit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "kcs/errors.hpp"

namespace kcs {

namespace {

using Layer = std::vector<std::pair<std::uint32_t, double>>;

Layer apply_f_layer(const ConstraintRule& rule, int n, const Layer& cur) {
    std::unordered_map<std::uint32_t, double> acc;
    acc.reserve(cur.size() * static_cast<std::size_t>(n));
    for (const auto& [bits, a] : cur) {
        SpinConfig c{bits, n};
        for (int j = 1; j <= n; ++j) {
            if (!c.up(j)) continue;
            if (!constraint_allows(rule, c, j)) continue;
            acc[bits & ~(1u << (j - 1))] += a;
        }
    }
    Layer next;
    next.reserve(acc.size());
    for (const auto& [bits, a] : acc)
        if (a != 0.0) next.emplace_back(bits, a);
    std::sort(next.begin(), next.end());
    return next;
}

double layer_norm2(const Layer& l) {
    double s = 0.0;
    for (const auto& [bits, a] : l) s += a * a;
    return s;
}

} // namespace

LayerSpectrum layer_spectrum(const ConstraintRule& rule, int n, int k_max) {
    if (n < 1 || n > 28) throw ResourceError("layer_spectrum: site count out of range");
    if (k_max < 0) throw ConfigError("layer_spectrum: negative k_max");

    LayerSpectrum spec;
    spec.rule = rule;
    spec.n_sites = n;
    spec.k_max = k_max;
    spec.log_norms.assign(static_cast<std::size_t>(k_max) + 1,
                          -std::numeric_limits<double>::infinity());
    spec.intensities.assign(static_cast<std::size_t>(k_max), 0.0);

    Layer cur{{(n == 28) ? 0x0fffffffu : ((1u << n) - 1u), 1.0}};
    double log_b = 0.0;
    spec.log_norms[0] = 0.0;
    for (int k = 0; k < k_max; ++k) {
        Layer next = apply_f_layer(rule, n, cur);
        double s = layer_norm2(next);
        if (next.empty() || s <= 0.0) break;
        spec.intensities[static_cast<std::size_t>(k)] = s;
        log_b += std::log(s);
        spec.log_norms[static_cast<std::size_t>(k) + 1] = log_b;
        double inv = 1.0 / std::sqrt(s);
        for (auto& [bits, a] : next) a *= inv;
        cur = std::move(next);
    }
    return spec;
}

namespace {

std::uint64_t binomial_u64(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i);
        r /= static_cast<std::uint64_t>(i);
    }
    return r;
}

} // namespace

std::uint64_t and_count(int n, int k) {
    if (k < 0 || 2 * k > n) return 0;
    if (k == 0) return 1;
    return binomial_u64(n - k, k) + binomial_u64(n - k - 1, k - 1);
}

double and_intensity(int n, int k) {
    if (k < 0 || 2 * k >= n) return 0.0;
    double kk = static_cast<double>(k);
    double nn = static_cast<double>(n);
    return (kk + 1.0) * (nn - 2.0 * kk) * (nn - 2.0 * kk - 1.0) / (nn - kk - 1.0);
}

double g_and(double n) {
    if (n < 0.5 || n > 1.0) return 0.0;
    return (1.0 - n) * (2.0 * n - 1.0) * (2.0 * n - 1.0) / n;
}

double g_and_maximizer() {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.5, b = 1.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    while (b - a > 1e-13) {
        if (g_and(c) > g_and(d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    return 0.5 * (a + b);
}

double boolean_lower_bound(int w, int n, int k) {
    double room = static_cast<double>(n) - static_cast<double>(2 * w + 1) * k;
    if (k < 0 || room <= 0.0) return 0.0;
    return (static_cast<double>(k) + 1.0) * room;
}

int isolated_zone_size(SpinConfig decayed, int w) {
    int n = decayed.n_sites;
    int count = 0;
    for (int j = 1; j <= n; ++j) {
        if (decayed.up(j)) continue;
        bool clear = true;
        for (int i = 1; i <= n && clear; ++i) {
            if (!decayed.up(i)) continue;
            int d = std::abs(i - j);
            d = std::min(d, n - d);
            if (d <= w) clear = false;
        }
        if (clear) ++count;
    }
    return count;
}

BoundReport verify_bound(const ConstraintRule& rule, int n) {
    int w = (rule.kind == RuleKind::dicke) ? 0 : rule.range;
    int span = 2 * w + 1;
    int k_up = (n - 1) / span; // last k with positive floor
    auto spec = layer_spectrum(rule, n, k_up + 1);

    BoundReport rep;
    rep.range = w;
    rep.n_sites = n;
    rep.min_margin = std::numeric_limits<double>::infinity();

    // Walk the cascade once more to sample configurations for the insertion
    // count, layer by layer.
    std::uint32_t mask = (n == 28) ? 0x0fffffffu : ((1u << n) - 1u);
    Layer cur{{mask, 1.0}};
    for (int k = 0; k <= k_up; ++k) {
        double bound = boolean_lower_bound(w, n, k);
        double intensity = spec.intensities[static_cast<std::size_t>(k)];
        rep.k.push_back(k);
        rep.intensity.push_back(intensity);
        rep.bound.push_back(bound);
        double margin = intensity - bound;
        rep.margin.push_back(margin);
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9 * std::max(1.0, bound))
            throw NumericError("verify_bound: layer intensity below the floor at k=" +
                               std::to_string(k));

        std::size_t stride = std::max<std::size_t>(1, cur.size() / 32);
        for (std::size_t i = 0; i < cur.size(); i += stride) {
            SpinConfig c{cur[i].first, n};
            SpinConfig decayed{static_cast<std::uint32_t>(~c.bits) & mask, n};
            int zone = isolated_zone_size(decayed, w);
            if (zone < n - span * k)
                throw NumericError("verify_bound: insertion count below floor at k=" +
                                   std::to_string(k));
            ++rep.insertion_samples;
        }

        if (k < k_up) {
            Layer next = apply_f_layer(rule, n, cur);
            double s = layer_norm2(next);
            if (next.empty() || s <= 0.0)
                throw NumericError("verify_bound: cascade died inside the positive window");
            double inv = 1.0 / std::sqrt(s);
            for (auto& [bits, a] : next) a *= inv;
            cur = std::move(next);
        }
    }
    return rep;
}

namespace {

double rk4_step(const std::function<double(double)>& g, double y, double h) {
    double k1 = -g(y);
    double k2 = -g(y + 0.5 * h * k1);
    double k3 = -g(y + 0.5 * h * k2);
    double k4 = -g(y + h * k3);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One accepted adaptive step (step-doubling error control); h is updated.
double rk4_adaptive(const std::function<double(double)>& g, double y, double t_end,
                    double& t, double& h) {
    for (;;) {
        double hh = std::min(h, t_end - t);
        double y_full = rk4_step(g, y, hh);
        double y_half = rk4_step(g, rk4_step(g, y, 0.5 * hh), 0.5 * hh);
        double err = std::abs(y_half - y_full) / 15.0;
        double tol = 1e-12 + 1e-11 * std::abs(y_half);
        if (err <= tol || hh < 1e-12) {
            t += hh;
            double grow = (err > 0.0) ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
            h = hh * std::clamp(grow, 0.2, 5.0);
            return y_half + (y_half - y_full) / 15.0;
        }
        h = hh * std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 1.0);
    }
}

} // namespace

DensityTrajectory ode_density(const std::function<double(double)>& g, double n0,
                              const std::vector<double>& tau_grid,
                              const std::string& rule_tag) {
    if (tau_grid.empty()) throw ConfigError("ode_density: empty tau grid");
    for (std::size_t i = 1; i < tau_grid.size(); ++i)
        if (tau_grid[i] <= tau_grid[i - 1])
            throw ConfigError("ode_density: tau grid must be strictly increasing");

    DensityTrajectory out;
    out.rule_tag = rule_tag;
    out.tau = tau_grid;
    out.n.reserve(tau_grid.size());
    out.n.push_back(n0);

    double y = n0;
    double t = tau_grid.front();
    double h = 1e-3;
    for (std::size_t i = 1; i < tau_grid.size(); ++i) {
        double t_end = tau_grid[i];
        while (t < t_end - 1e-14) y = rk4_adaptive(g, y, t_end, t, h);
        t = t_end;
        out.n.push_back(y);
    }
    return out;
}

DensityTrajectory ode_density_and(double n0, const std::vector<double>& tau_grid) {
    return ode_density([](double x) { return g_and(x); }, n0, tau_grid, "and");
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double b,
               double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa,
                        double b, double fb, double m, double fm, double whole,
                        double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(f, a, fa, m, fm, lm, flm);
    double right = simpson(f, m, fm, b, fb, rm, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    double m = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = simpson(f, a, fa, b, fb, m, fm);
    return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

} // namespace

double quadrature_time(double n_target, double n0) {
    if (!(n_target > 0.5) || !(n_target < n0) || !(n0 < 1.0))
        throw ConfigError("quadrature_time: need 0.5 < n_target < n0 < 1");
    // 1/g_and(n) = 1/(1-n) + phi(n) with phi smooth through n = 1.
    auto phi = [](double x) {
        double u = 2.0 * x - 1.0;
        return (4.0 * x - 1.0) / (u * u);
    };
    double singular = std::log((1.0 - n_target) / (1.0 - n0));
    double smooth = integrate(phi, n_target, n0, 1e-13);
    return singular + smooth;
}

} // namespace kcs
