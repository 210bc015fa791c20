#include "dehaze/params.hpp"

#include <cmath>

namespace dehaze {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    auto [it, inserted] = entries_.emplace(name, std::move(t));
    if (!inserted) throw DomainError("ParamSet: duplicate parameter " + name);
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DomainError("ParamSet: missing parameter " + name);
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DomainError("ParamSet: missing parameter " + name);
    return it->second;
}

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

bool ParamSet::all_values_finite() const {
    for (const auto& [name, t] : entries_)
        if (!all_finite(t)) return false;
    return true;
}

Var BoundParams::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw DomainError("BoundParams: missing parameter " + name);
    return it->second;
}

BoundParams bind(Tape& tape, const ParamSet& params, bool trainable) {
    BoundParams b;
    for (const auto& [name, t] : params.entries()) b.vars.emplace(name, tape.leaf(t, trainable));
    return b;
}

void init_conv(ParamSet& p, Rng& rng, const std::string& name, int cout, int cin, int k,
               double stddev, double bias_value) {
    Tensor w({cout, cin, k, k});
    for (double& v : w.raw()) v = rng.normal(0.0, stddev);
    p.add(name + ".w", std::move(w));
    p.add(name + ".b", Tensor::full({cout}, bias_value));
}

void init_conv_transpose(ParamSet& p, Rng& rng, const std::string& name, int cin, int cout, int k,
                         double stddev) {
    Tensor w({cin, cout, k, k});
    for (double& v : w.raw()) v = rng.normal(0.0, stddev);
    p.add(name + ".w", std::move(w));
    p.add(name + ".b", Tensor({cout}));
}

void init_norm(ParamSet& p, const std::string& name, int channels) {
    p.add(name + ".g", Tensor::full({channels}, 1.0));
    p.add(name + ".be", Tensor({channels}));
}

void init_conv_he(ParamSet& p, Rng& rng, const std::string& name, int cout, int cin, int k) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    init_conv(p, rng, name, cout, cin, k, stddev);
}

}  // namespace dehaze
