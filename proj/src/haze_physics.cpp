#include "dehaze/haze_physics.hpp"

#include <algorithm>
#include <cmath>

namespace dehaze {

namespace {

void require_hwc(const Tensor& t, const char* what) {
    if (t.ndim() != 3 || t.dim(2) != 3) throw DimensionError(std::string(what) + ": expected H×W×3");
}

void require_map(const Tensor& t, const char* what) {
    if (t.ndim() != 3 || t.dim(2) != 1) throw DimensionError(std::string(what) + ": expected H×W×1");
}

void require_same_plane(const Tensor& img, const Tensor& map, const char* what) {
    if (img.dim(0) != map.dim(0) || img.dim(1) != map.dim(1))
        throw DimensionError(std::string(what) + ": image and map sizes differ");
}

}  // namespace

void HazeParams::validate() const {
    for (double a : airlight) {
        if (!(a >= 0.0 && a <= 1.0)) throw DomainError("airlight channel outside [0,1]");
    }
    if (!std::isfinite(beta) || beta < 0.0) throw DomainError("beta must be finite and >= 0");
}

Tensor transmission_from_depth(const Tensor& depth, double beta) {
    require_map(depth, "transmission_from_depth");
    if (!std::isfinite(beta) || beta < 0.0)
        throw DomainError("transmission_from_depth: beta must be finite and >= 0");
    Tensor t = depth;
    for (double& v : t.raw()) {
        if (v < 0.0) throw DomainError("transmission_from_depth: negative depth");
        v = std::exp(-beta * v);
    }
    return t;
}

Tensor synthesize_haze(const Tensor& clear, const Tensor& transmission, const HazeParams& params) {
    require_hwc(clear, "synthesize_haze");
    require_map(transmission, "synthesize_haze");
    require_same_plane(clear, transmission, "synthesize_haze");
    params.validate();
    const int h = clear.dim(0), w = clear.dim(1);
    Tensor out({h, w, 3});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double t = transmission(i, j, 0);
            for (int c = 0; c < 3; ++c)
                out(i, j, c) = clear(i, j, c) * t + params.airlight[c] * (1.0 - t);
        }
    return out;
}

Tensor invert_haze(const Tensor& hazy, const Tensor& transmission, const HazeParams& params,
                   double t_floor) {
    require_hwc(hazy, "invert_haze");
    require_map(transmission, "invert_haze");
    require_same_plane(hazy, transmission, "invert_haze");
    params.validate();
    if (!(t_floor > 0.0 && t_floor < 1.0)) throw DomainError("invert_haze: t_floor outside (0,1)");
    const int h = hazy.dim(0), w = hazy.dim(1);
    Tensor out({h, w, 3});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double t = std::max(transmission(i, j, 0), t_floor);
            for (int c = 0; c < 3; ++c)
                out(i, j, c) = (hazy(i, j, c) - params.airlight[c] * (1.0 - t)) / t;
        }
    return out;
}

Tensor dark_channel(const Tensor& image, int patch) {
    require_hwc(image, "dark_channel");
    if (patch <= 0 || patch % 2 == 0) throw DomainError("dark_channel: patch must be odd positive");
    const int h = image.dim(0), w = image.dim(1);
    const int r = patch / 2;

    // Channel minimum first, then a min filter with clamped (replicate) borders.
    Tensor chan_min({h, w, 1});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            chan_min(i, j, 0) =
                std::min({image(i, j, 0), image(i, j, 1), image(i, j, 2)});

    Tensor out({h, w, 1});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double m = chan_min(i, j, 0);
            for (int di = -r; di <= r; ++di) {
                const int ii = std::clamp(i + di, 0, h - 1);
                for (int dj = -r; dj <= r; ++dj) {
                    const int jj = std::clamp(j + dj, 0, w - 1);
                    m = std::min(m, chan_min(ii, jj, 0));
                }
            }
            out(i, j, 0) = m;
        }
    return out;
}

Tensor estimate_transmission_dcp(const Tensor& image, const HazeParams& params, double omega,
                                 int patch) {
    require_hwc(image, "estimate_transmission_dcp");
    params.validate();
    if (!(omega > 0.0 && omega <= 1.0))
        throw DomainError("estimate_transmission_dcp: omega outside (0,1]");
    for (double a : params.airlight)
        if (a <= 0.0) throw DomainError("estimate_transmission_dcp: airlight channel must be > 0");

    const int h = image.dim(0), w = image.dim(1);
    Tensor normalized({h, w, 3});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < 3; ++c) normalized(i, j, c) = image(i, j, c) / params.airlight[c];

    Tensor dark = dark_channel(normalized, patch);
    Tensor t({h, w, 1});
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = std::clamp(1.0 - omega * dark[i], kTransmissionFloor, 1.0);
    return t;
}

Tensor pseudo_depth(const Tensor& transmission, double beta) {
    require_map(transmission, "pseudo_depth");
    if (!std::isfinite(beta) || beta <= 0.0) throw DomainError("pseudo_depth: beta must be > 0");
    Tensor d = transmission;
    for (double& v : d.raw()) {
        if (!(v > 0.0 && v <= 1.0)) throw DomainError("pseudo_depth: transmission outside (0,1]");
        v = -std::log(v) / beta;
    }
    return d;
}

}  // namespace dehaze
