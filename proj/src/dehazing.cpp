#include "dehaze/dehazing.hpp"

#include <string>

namespace dehaze {

namespace {

// No feature normalization here: the restoration target depends on absolute
// intensity statistics, which normalization would discard.
Var conv_relu(Tape& t, const BoundParams& p, const std::string& name, Var x, int stride) {
    x = conv2d(t, x, p.at(name + ".w"), p.at(name + ".b"), stride, 1);
    return relu(t, x);
}

int count_stages(const BoundParams& p) {
    int n = 0;
    while (p.vars.count("enc" + std::to_string(n + 1) + ".w")) ++n;
    return n;
}

}  // namespace

void DehazerConfig::validate() const {
    if (base_width < 2) throw DomainError("DehazerConfig: base_width must be >= 2");
    if (stages < 1 || stages > 6) throw DomainError("DehazerConfig: stages must be in [1,6]");
}

ParamSet build_dehazer(const DehazerConfig& config, std::uint64_t seed) {
    config.validate();
    const int w = config.base_width;
    Rng rng(seed);
    ParamSet p;
    init_conv_he(p, rng, "stem", w, 3, 3);
    int ch = w;
    for (int s = 1; s <= config.stages; ++s) {
        init_conv_he(p, rng, "enc" + std::to_string(s), 2 * ch, ch, 3);
        ch *= 2;
    }
    for (int s = config.stages; s >= 1; --s) {
        // Decoder level s consumes the upsampled deep features plus the skip
        // from the encoder level below (stem for s == 1).
        const int skip_ch = (s == 1) ? w : (w << (s - 1));
        const int out_ch = skip_ch;
        init_conv_he(p, rng, "dec" + std::to_string(s), out_ch, ch + skip_ch, 3);
        if (s > 1) init_conv_he(p, rng, "side" + std::to_string(s), 3, out_ch, 3);
        ch = out_ch;
    }
    init_conv_he(p, rng, "head", 3, w, 3);
    return p;
}

DehazeVars dehaze(Tape& t, const BoundParams& p, Var x) {
    const Tensor& vx = t.value(x);
    if (vx.ndim() != 4) throw DimensionError("dehaze: expected N×C×H×W input");
    if (!all_finite(vx)) throw DomainError("dehaze: non-finite input");
    const int stages = count_stages(p);
    const int div = 1 << stages;
    if (vx.dim(2) % div != 0 || vx.dim(3) % div != 0)
        throw DimensionError("dehaze: spatial size not divisible by 2^stages");

    Var h = conv_relu(t, p, "stem", x, 1);
    std::vector<Var> skips{h};
    for (int s = 1; s <= stages; ++s) {
        h = conv_relu(t, p, "enc" + std::to_string(s), h, 2);
        if (s < stages) skips.push_back(h);
    }

    DehazeVars out;
    for (int s = stages; s >= 1; --s) {
        h = upsample_nearest2x(t, h);
        h = concat_channels(t, h, skips[static_cast<std::size_t>(s - 1)]);
        h = conv_relu(t, p, "dec" + std::to_string(s), h, 1);
        if (s > 1) {
            const std::string side = "side" + std::to_string(s);
            out.side_outputs.push_back(
                tanh_op(t, conv2d(t, h, p.at(side + ".w"), p.at(side + ".b"), 1, 1)));
        }
    }
    out.prediction = tanh_op(t, conv2d(t, h, p.at("head.w"), p.at("head.b"), 1, 1));
    return out;
}

DehazeResult dehaze(const ParamSet& p, const Tensor& x) {
    Tape t;
    BoundParams b = bind(t, p, false);
    DehazeVars v = dehaze(t, b, t.leaf(x));
    DehazeResult r;
    r.prediction = t.value(v.prediction);
    for (Var s : v.side_outputs) r.side_outputs.push_back(t.value(s));
    return r;
}

}  // namespace dehaze
