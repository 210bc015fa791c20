#include "dehaze/translation.hpp"

#include <string>

namespace dehaze {

namespace {

constexpr double kInitStd = 0.02;

void require_finite_input(const Tensor& x, const char* what) {
    if (!all_finite(x)) throw DomainError(std::string(what) + ": non-finite input");
}

Var conv_norm_relu(Tape& t, const BoundParams& p, const std::string& name, Var x, int stride,
                   int pad) {
    x = conv2d(t, x, p.at(name + ".w"), p.at(name + ".b"), stride, pad);
    x = instance_norm(t, x, p.at(name + ".n.g"), p.at(name + ".n.be"));
    return relu(t, x);
}

Var residual_block(Tape& t, const BoundParams& p, const std::string& name, Var x) {
    Var y = conv_norm_relu(t, p, name + ".c1", x, 1, 1);
    y = conv2d(t, y, p.at(name + ".c2.w"), p.at(name + ".c2.b"), 1, 1);
    y = instance_norm(t, y, p.at(name + ".c2.n.g"), p.at(name + ".c2.n.be"));
    return add(t, x, y);
}

int count_res_blocks(const BoundParams& p) {
    int n = 0;
    while (p.vars.count("res" + std::to_string(n + 1) + ".c1.w")) ++n;
    return n;
}

ParamSet build_generator(const GeneratorConfig& config, std::uint64_t seed, bool with_sft) {
    config.validate();
    const int w = config.base_width;
    Rng rng(seed);
    ParamSet p;
    init_conv(p, rng, "conv1", w, 3, 7, kInitStd);
    init_norm(p, "conv1.n", w);
    init_conv(p, rng, "conv2", 2 * w, w, 3, kInitStd);
    init_norm(p, "conv2.n", 2 * w);
    init_conv(p, rng, "conv3", 4 * w, 2 * w, 3, kInitStd);
    init_norm(p, "conv3.n", 4 * w);
    for (int i = 1; i <= config.n_res_blocks; ++i) {
        const std::string name = "res" + std::to_string(i);
        init_conv(p, rng, name + ".c1", 4 * w, 4 * w, 3, kInitStd);
        init_norm(p, name + ".c1.n", 4 * w);
        init_conv(p, rng, name + ".c2", 4 * w, 4 * w, 3, kInitStd);
        init_norm(p, name + ".c2.n", 4 * w);
    }
    init_conv_transpose(p, rng, "up13", 4 * w, 2 * w, 3, kInitStd);
    init_norm(p, "up13.n", 2 * w);
    init_conv_transpose(p, rng, "up14", 2 * w, w, 3, kInitStd);
    init_norm(p, "up14.n", w);
    if (with_sft) {
        init_conv(p, rng, "sft.cond1", w, 1, 3, kInitStd);
        init_conv(p, rng, "sft.cond2", w, w, 3, kInitStd);
        init_conv(p, rng, "sft.cond3", w, w, 3, kInitStd);
        // gamma head bias starts at 1 so the modulation begins near identity
        init_conv(p, rng, "sft.gamma", w, w, 3, kInitStd, 1.0);
        init_conv(p, rng, "sft.beta", w, w, 3, kInitStd);
    }
    init_conv(p, rng, "conv15", 3, w, 7, kInitStd);
    return p;
}

Var generator_body(Tape& t, const BoundParams& p, Var x, bool with_depth, Var depth) {
    Var h = conv_norm_relu(t, p, "conv1", x, 1, 3);
    h = conv_norm_relu(t, p, "conv2", h, 2, 1);
    h = conv_norm_relu(t, p, "conv3", h, 2, 1);
    const int blocks = count_res_blocks(p);
    for (int i = 1; i <= blocks; ++i) h = residual_block(t, p, "res" + std::to_string(i), h);
    h = conv_transpose2d(t, h, p.at("up13.w"), p.at("up13.b"), 2, 1, 1);
    h = instance_norm(t, h, p.at("up13.n.g"), p.at("up13.n.be"));
    h = relu(t, h);
    h = conv_transpose2d(t, h, p.at("up14.w"), p.at("up14.b"), 2, 1, 1);
    h = instance_norm(t, h, p.at("up14.n.g"), p.at("up14.n.be"));
    h = relu(t, h);
    if (with_depth) {
        const Tensor& feat = t.value(h);
        Var d = resize_bilinear(t, depth, feat.dim(2), feat.dim(3));
        auto [gamma, beta] = sft_condition(t, p, d);
        h = sft_apply(t, h, gamma, beta);
    }
    h = conv2d(t, h, p.at("conv15.w"), p.at("conv15.b"), 1, 3);
    return tanh_op(t, h);
}

}  // namespace

void GeneratorConfig::validate() const {
    if (base_width < 4) throw DomainError("GeneratorConfig: base_width must be >= 4");
    if (n_res_blocks < 1) throw DomainError("GeneratorConfig: n_res_blocks must be >= 1");
}

ParamSet build_s2r_generator(const GeneratorConfig& config, std::uint64_t seed) {
    return build_generator(config, seed, true);
}

ParamSet build_r2s_generator(const GeneratorConfig& config, std::uint64_t seed) {
    return build_generator(config, seed, false);
}

ParamSet build_discriminator(int base_width, std::uint64_t seed) {
    if (base_width < 4) throw DomainError("build_discriminator: base_width must be >= 4");
    const int w = base_width;
    Rng rng(seed);
    ParamSet p;
    init_conv(p, rng, "c1", w, 3, 4, kInitStd);
    init_conv(p, rng, "c2", 2 * w, w, 4, kInitStd);
    init_norm(p, "c2.n", 2 * w);
    init_conv(p, rng, "c3", 4 * w, 2 * w, 4, kInitStd);
    init_norm(p, "c3.n", 4 * w);
    init_conv(p, rng, "head", 1, 4 * w, 3, kInitStd);
    return p;
}

Var sft_apply(Tape& t, Var features, Var gamma, Var beta) {
    return add(t, mul(t, gamma, features), beta);
}

std::pair<Var, Var> sft_condition(Tape& t, const BoundParams& p, Var depth) {
    Var phi = relu(t, conv2d(t, depth, p.at("sft.cond1.w"), p.at("sft.cond1.b"), 1, 1));
    phi = relu(t, conv2d(t, phi, p.at("sft.cond2.w"), p.at("sft.cond2.b"), 1, 1));
    phi = relu(t, conv2d(t, phi, p.at("sft.cond3.w"), p.at("sft.cond3.b"), 1, 1));
    Var gamma = conv2d(t, phi, p.at("sft.gamma.w"), p.at("sft.gamma.b"), 1, 1);
    Var beta = conv2d(t, phi, p.at("sft.beta.w"), p.at("sft.beta.b"), 1, 1);
    return {gamma, beta};
}

Var translate_s2r(Tape& t, const BoundParams& p, Var x, Var depth) {
    return generator_body(t, p, x, true, depth);
}

Var translate_r2s(Tape& t, const BoundParams& p, Var x) {
    return generator_body(t, p, x, false, -1);
}

Var discriminate(Tape& t, const BoundParams& p, Var x) {
    Var h = leaky_relu(t, conv2d(t, x, p.at("c1.w"), p.at("c1.b"), 2, 1), 0.2);
    h = conv2d(t, h, p.at("c2.w"), p.at("c2.b"), 2, 1);
    h = instance_norm(t, h, p.at("c2.n.g"), p.at("c2.n.be"));
    h = leaky_relu(t, h, 0.2);
    h = conv2d(t, h, p.at("c3.w"), p.at("c3.b"), 2, 1);
    h = instance_norm(t, h, p.at("c3.n.g"), p.at("c3.n.be"));
    h = leaky_relu(t, h, 0.2);
    return conv2d(t, h, p.at("head.w"), p.at("head.b"), 1, 1);
}

Tensor translate_s2r(const ParamSet& p, const Tensor& x, const Tensor& depth) {
    require_finite_input(x, "translate_s2r");
    require_finite_input(depth, "translate_s2r depth");
    Tape t;
    BoundParams b = bind(t, p, false);
    return t.value(translate_s2r(t, b, t.leaf(x), t.leaf(depth)));
}

Tensor translate_r2s(const ParamSet& p, const Tensor& x) {
    require_finite_input(x, "translate_r2s");
    Tape t;
    BoundParams b = bind(t, p, false);
    return t.value(translate_r2s(t, b, t.leaf(x)));
}

Tensor discriminate_image(const ParamSet& p, const Tensor& x) {
    require_finite_input(x, "discriminate_image");
    Tape t;
    BoundParams b = bind(t, p, false);
    return t.value(discriminate(t, b, t.leaf(x)));
}

Tensor discriminate_feature(const ParamSet& p, const Tensor& dehazed) {
    require_finite_input(dehazed, "discriminate_feature");
    return discriminate_image(p, dehazed);
}

std::pair<Tensor, Tensor> sft_condition(const ParamSet& p, const Tensor& depth) {
    require_finite_input(depth, "sft_condition");
    Tape t;
    BoundParams b = bind(t, p, false);
    auto [g, be] = sft_condition(t, b, t.leaf(depth));
    return {t.value(g), t.value(be)};
}

}  // namespace dehaze
