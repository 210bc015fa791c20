#pragma once

#include <cstdint>
#include <utility>

#include "dehaze/params.hpp"

namespace dehaze {

/// Residual translation generator. At base_width 64 the layer chain is
/// 3→64 k7 s1, 64→128 k3 s2, 128→256 k3 s2, nine 256-channel residual blocks,
/// transposed 256→128 and 128→64 k3 s2, a depth-conditioned feature modulation
/// stage at 64 channels (synthetic→real direction only), 64→3 k7 s1, tanh.
/// Other widths scale every channel count proportionally.
struct GeneratorConfig {
    int base_width = 64;
    int n_res_blocks = 9;
    void validate() const;
};

ParamSet build_s2r_generator(const GeneratorConfig& config, std::uint64_t seed);
ParamSet build_r2s_generator(const GeneratorConfig& config, std::uint64_t seed);

/// 3-stage stride-2 patch discriminator: 64×64 input -> 8×8 score map.
ParamSet build_discriminator(int base_width, std::uint64_t seed);

// Tape-level forwards (training path).
Var sft_apply(Tape& t, Var features, Var gamma, Var beta);
std::pair<Var, Var> sft_condition(Tape& t, const BoundParams& p, Var depth);
Var translate_s2r(Tape& t, const BoundParams& p, Var x, Var depth);
Var translate_r2s(Tape& t, const BoundParams& p, Var x);
Var discriminate(Tape& t, const BoundParams& p, Var x);

// Tensor-level forwards (inference/tests); inputs are N×C×H×W network space.
Tensor translate_s2r(const ParamSet& p, const Tensor& x, const Tensor& depth);
Tensor translate_r2s(const ParamSet& p, const Tensor& x);
Tensor discriminate_image(const ParamSet& p, const Tensor& x);
Tensor discriminate_feature(const ParamSet& p, const Tensor& dehazed);
std::pair<Tensor, Tensor> sft_condition(const ParamSet& p, const Tensor& depth);

}  // namespace dehaze
