#pragma once

#include <array>

#include "dehaze/tensor.hpp"

namespace dehaze {

/// Global atmospheric light (per channel, [0,1]) and scattering coefficient.
struct HazeParams {
    std::array<double, 3> airlight{0.9, 0.9, 0.9};
    double beta = 1.0;

    static HazeParams uniform(double a, double beta) { return HazeParams{{a, a, a}, beta}; }
    void validate() const;
};

/// t = exp(-beta * d), elementwise over an H×W×1 depth map. Values land in (0,1].
Tensor transmission_from_depth(const Tensor& depth, double beta);

/// I = J*t + A*(1-t): hazes a clear image with a transmission map and airlight.
Tensor synthesize_haze(const Tensor& clear, const Tensor& transmission, const HazeParams& params);

/// Algebraic inverse of synthesize_haze with the transmission clamped below by
/// t_floor before the division. Exact inverse wherever t >= t_floor.
Tensor invert_haze(const Tensor& hazy, const Tensor& transmission, const HazeParams& params,
                   double t_floor);

/// Per-pixel min over channels then over a patch×patch neighborhood
/// (replicate border padding; output has the input's spatial size).
Tensor dark_channel(const Tensor& image, int patch);

/// t̂ = 1 - omega * dark_channel(I/A, patch), clamped to [0.05, 1].
Tensor estimate_transmission_dcp(const Tensor& image, const HazeParams& params, double omega,
                                 int patch);

/// d = -ln(t)/beta: depth surrogate recovered from a transmission map.
Tensor pseudo_depth(const Tensor& transmission, double beta);

constexpr double kTransmissionFloor = 0.05;

}  // namespace dehaze
