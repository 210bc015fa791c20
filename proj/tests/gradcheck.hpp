#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dehaze/params.hpp"

// Central finite-difference check of d(loss)/d(theta) for every ParamSet a
// loss touches. The loss builder must be re-runnable: it gets a fresh tape and
// freshly bound parameter sets each evaluation.
namespace gradcheck {

struct Result {
    double max_rel = 0.0;
    long checked = 0;
    std::string worst;
};

using LossBuilder =
    std::function<dehaze::Var(dehaze::Tape&, const std::vector<dehaze::BoundParams>&)>;

inline double eval_loss(std::vector<dehaze::ParamSet>& sets, const LossBuilder& build) {
    dehaze::Tape t;
    std::vector<dehaze::BoundParams> bound;
    bound.reserve(sets.size());
    for (const dehaze::ParamSet& p : sets) bound.push_back(dehaze::bind(t, p, false));
    return t.value(build(t, bound))[0];
}

// Deterministic strided sample of coordinates in [0, n).
inline std::vector<std::size_t> sample_coords(std::size_t n, int max_coords) {
    std::vector<std::size_t> out;
    if (n <= static_cast<std::size_t>(max_coords)) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    for (int k = 0; k < max_coords; ++k)
        out.push_back((static_cast<std::size_t>(k) * n) / static_cast<std::size_t>(max_coords) +
                      (k % 3));
    for (std::size_t& c : out) c = std::min(c, n - 1);
    return out;
}

inline Result check(std::vector<dehaze::ParamSet>& sets, const LossBuilder& build,
                    int max_coords_per_tensor = 5) {
    // Analytic gradients.
    std::vector<std::map<std::string, dehaze::Tensor>> analytic(sets.size());
    {
        dehaze::Tape t;
        std::vector<dehaze::BoundParams> bound;
        for (const dehaze::ParamSet& p : sets) bound.push_back(dehaze::bind(t, p, true));
        const dehaze::Var loss = build(t, bound);
        t.backward(loss);
        for (std::size_t s = 0; s < sets.size(); ++s)
            for (const auto& [name, var] : bound[s].vars)
                analytic[s].emplace(name, t.has_grad(var)
                                              ? t.grad(var)
                                              : dehaze::Tensor(sets[s].at(name).shape()));
    }

    Result res;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (auto& [name, param] : sets[s].entries()) {
            const dehaze::Tensor& g = analytic[s].at(name);
            for (std::size_t i : sample_coords(param.size(), max_coords_per_tensor)) {
                const double saved = param[i];
                double best_rel = 1e300;
                for (double h_scale : {1.0, 0.125, 8.0}) {
                    const double h = 1e-6 * std::max(1.0, std::fabs(saved)) * h_scale;
                    param[i] = saved + h;
                    const double f1 = eval_loss(sets, build);
                    param[i] = saved - h;
                    const double f2 = eval_loss(sets, build);
                    param[i] = saved;
                    const double fd = (f1 - f2) / (2.0 * h);
                    // Mixed tolerance: the 1e-3 denominator floor turns the
                    // relative gate into an absolute one of 1e-7 for
                    // near-zero gradients, where central differences on an
                    // O(1) loss bottom out in roundoff and curvature noise.
                    const double rel = std::fabs(fd - g[i]) /
                                       std::max({std::fabs(fd), std::fabs(g[i]), 1e-3});
                    best_rel = std::min(best_rel, rel);
                    if (best_rel < 1e-5) break;
                }
                ++res.checked;
                if (best_rel > res.max_rel) {
                    res.max_rel = best_rel;
                    res.worst = "set" + std::to_string(s) + ":" + name + "[" + std::to_string(i) +
                                "]";
                }
            }
        }
    }
    return res;
}

}  // namespace gradcheck
