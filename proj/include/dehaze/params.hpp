#pragma once

#include <map>
#include <string>

#include "dehaze/autodiff.hpp"
#include "dehaze/rng.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

/// Named learnable arrays for one network. Iteration order is the sorted name
/// order, which fixes serialization and update order.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    std::map<std::string, Tensor>& entries() { return entries_; }
    const std::map<std::string, Tensor>& entries() const { return entries_; }

    std::size_t parameter_count() const;
    bool all_values_finite() const;

private:
    std::map<std::string, Tensor> entries_;
};

/// A ParamSet registered on a tape. trainable=false freezes the parameters
/// (no gradients are tracked through them).
struct BoundParams {
    std::map<std::string, Var> vars;
    Var at(const std::string& name) const;
};

BoundParams bind(Tape& tape, const ParamSet& params, bool trainable);

// Initialization helpers; creation order is fixed so seeds reproduce exactly.
void init_conv(ParamSet& p, Rng& rng, const std::string& name, int cout, int cin, int k,
               double stddev, double bias_value = 0.0);
void init_conv_transpose(ParamSet& p, Rng& rng, const std::string& name, int cin, int cout, int k,
                         double stddev);
void init_norm(ParamSet& p, const std::string& name, int channels);
void init_conv_he(ParamSet& p, Rng& rng, const std::string& name, int cout, int cin, int k);

}  // namespace dehaze
