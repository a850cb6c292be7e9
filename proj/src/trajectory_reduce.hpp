#pragma once

// Internal helper: mean/SEM reduction of per-trajectory observable tables
// into a TrajectoryResult, shared by the quantum-jump and semiclassical
// engines. vals[o] is laid out trajectory-major: vals[o][traj * n_points + p].

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "kcs/dynamics.hpp"

namespace kcs::detail {

inline void reduce_observables(TrajectoryResult& out, const std::vector<std::vector<double>>& vals,
                               const std::vector<const char*>& names, int n_traj, int n_points) {
    for (std::size_t o = 0; o < names.size(); ++o) {
        ObservableSeries s;
        s.mean.resize(n_points);
        s.sem.resize(n_points);
        for (int p = 0; p < n_points; ++p) {
            double m = 0.0;
            for (int tr = 0; tr < n_traj; ++tr)
                m += vals[o][static_cast<std::size_t>(tr) * n_points + p];
            m /= n_traj;
            double var = 0.0;
            if (n_traj > 1) {
                for (int tr = 0; tr < n_traj; ++tr) {
                    const double d = vals[o][static_cast<std::size_t>(tr) * n_points + p] - m;
                    var += d * d;
                }
                var /= (n_traj - 1);
            }
            s.mean[p] = m;
            s.sem[p] = std::sqrt(var / n_traj);
        }
        out.observables[names[o]] = std::move(s);
    }
}

} // namespace kcs::detail
