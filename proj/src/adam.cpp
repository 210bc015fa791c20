#include "dehaze/adam.hpp"

#include <cmath>

namespace dehaze {

void AdamParams::validate() const {
    if (!(lr > 0.0)) throw DomainError("AdamParams: lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw DomainError("AdamParams: betas must be in [0,1)");
    if (!(eps > 0.0)) throw DomainError("AdamParams: eps must be > 0");
}

void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t,
               const AdamParams& hp) {
    hp.validate();
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v))
        throw DimensionError("adam_step: param/grad/state shape mismatch");
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

double global_grad_norm(const std::map<std::string, Tensor>& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.raw()) sq += v * v;
    return std::sqrt(sq);
}

void clip_gradients(std::map<std::string, Tensor>& grads, double max_norm) {
    const double norm = global_grad_norm(grads);
    if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads)
        for (double& v : g.raw()) v *= scale;
}

void adam_update_set(ParamSet& params, std::map<std::string, Tensor>& grads, AdamState& state,
                     const AdamParams& hp, double clip_norm) {
    if (clip_norm > 0.0) clip_gradients(grads, clip_norm);
    state.t += 1;
    for (auto& [name, p] : params.entries()) {
        auto git = grads.find(name);
        if (git == grads.end()) throw DimensionError("adam_update_set: missing gradient for " + name);
        if (state.m.find(name) == state.m.end()) {
            state.m.emplace(name, Tensor(p.shape()));
            state.v.emplace(name, Tensor(p.shape()));
        }
        adam_step(p, git->second, state.m.at(name), state.v.at(name), state.t, hp);
        if (!all_finite(p)) throw TrainingError("non-finite parameter after update: " + name);
    }
}

}  // namespace dehaze
