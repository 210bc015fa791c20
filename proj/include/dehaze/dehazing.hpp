#pragma once

#include <cstdint>
#include <vector>

#include "dehaze/params.hpp"

namespace dehaze {

/// Encoder-decoder dehazer: `stages` stride-2 encoder levels, a mirrored
/// decoder (nearest upsample + convolution) with one skip concatenation per
/// resolution level, tanh prediction head and a tanh side output at every
/// coarser decoder scale.
struct DehazerConfig {
    int base_width = 64;
    int stages = 3;
    void validate() const;
};

ParamSet build_dehazer(const DehazerConfig& config, std::uint64_t seed);

struct DehazeVars {
    Var prediction;
    std::vector<Var> side_outputs;  // coarsest first
};

DehazeVars dehaze(Tape& t, const BoundParams& p, Var x);

struct DehazeResult {
    Tensor prediction;
    std::vector<Tensor> side_outputs;
};

DehazeResult dehaze(const ParamSet& p, const Tensor& x);

}  // namespace dehaze
