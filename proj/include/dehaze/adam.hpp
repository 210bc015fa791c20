#pragma once

#include <map>
#include <string>

#include "dehaze/checkpoint.hpp"
#include "dehaze/params.hpp"

namespace dehaze {

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    void validate() const;
};

/// One bias-corrected adaptive update for a single array. t is the 1-based
/// step count including this update.
void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t,
               const AdamParams& hp);

double global_grad_norm(const std::map<std::string, Tensor>& grads);
void clip_gradients(std::map<std::string, Tensor>& grads, double max_norm);

/// Clips the gradient set to max_norm (if > 0), advances the state one step,
/// and updates every parameter. Throws TrainingError if a parameter turns
/// non-finite.
void adam_update_set(ParamSet& params, std::map<std::string, Tensor>& grads, AdamState& state,
                     const AdamParams& hp, double clip_norm);

}  // namespace dehaze
