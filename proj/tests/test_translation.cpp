#include "dehaze/translation.hpp"

#include <limits>

#include "dehaze/checkpoint.hpp"
#include "dehaze/rng.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace dehaze;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.raw()) v = rng.uniform(lo, hi);
    return t;
}

// Closed-form parameter count for the width-64 layer chain, written out layer
// by layer: conv w*h*k*k + bias, norm gamma+beta, transposed conv likewise,
// condition branch 1->64 then three 64->64 convs.
std::size_t expected_s2r_count_w64(int res_blocks) {
    std::size_t n = 0;
    n += 64 * 3 * 7 * 7 + 64 + 2 * 64;            // conv1 + norm
    n += 128 * 64 * 3 * 3 + 128 + 2 * 128;        // conv2 + norm
    n += 256 * 128 * 3 * 3 + 256 + 2 * 256;       // conv3 + norm
    n += static_cast<std::size_t>(res_blocks) *
         (2 * (256 * 256 * 3 * 3 + 256) + 2 * 2 * 256);  // residual blocks
    n += 256 * 128 * 3 * 3 + 128 + 2 * 128;       // up13 + norm
    n += 128 * 64 * 3 * 3 + 64 + 2 * 64;          // up14 + norm
    n += 64 * 1 * 3 * 3 + 64;                     // condition conv 1
    n += 3 * (64 * 64 * 3 * 3 + 64);              // condition convs 2-3 + one head
    n += 64 * 64 * 3 * 3 + 64;                    // second head
    n += 3 * 64 * 7 * 7 + 3;                      // conv15
    return n;
}

void test_parameter_count_oracle() {
    const GeneratorConfig cfg{64, 9};
    const ParamSet s2r = build_s2r_generator(cfg, 1);
    REQUIRE(s2r.parameter_count() == expected_s2r_count_w64(9),
            "s2r parameter count " << s2r.parameter_count() << " != closed form "
                                   << expected_s2r_count_w64(9));
    const ParamSet r2s = build_r2s_generator(cfg, 1);
    const std::size_t sft = 64 * 1 * 3 * 3 + 64 + 4 * (64 * 64 * 3 * 3 + 64);
    REQUIRE(r2s.parameter_count() == expected_s2r_count_w64(9) - sft,
            "r2s must be the s2r chain without the conditioning branch");
    pass("parameter count matches the closed-form layer sum");
}

void test_build_determinism_and_scaling() {
    const GeneratorConfig cfg{8, 9};
    const ParamSet a = build_s2r_generator(cfg, 42);
    const ParamSet b = build_s2r_generator(cfg, 42);
    REQUIRE(a.entries().size() == b.entries().size(), "same seed must give same entries");
    for (const auto& [name, t] : a.entries())
        REQUIRE(bitwise_equal(t, b.at(name)), "same seed must reproduce " << name);
    const ParamSet c = build_s2r_generator(cfg, 43);
    REQUIRE(!bitwise_equal(a.at("conv1.w"), c.at("conv1.w")),
            "different seeds must give different parameters");

    // Width 8: every channel count is 1/8 of the width-64 chain.
    REQUIRE(a.at("conv1.w").shape() == std::vector<int>({8, 3, 7, 7}), "conv1 shape at width 8");
    REQUIRE(a.at("conv2.w").shape() == std::vector<int>({16, 8, 3, 3}), "conv2 shape at width 8");
    REQUIRE(a.at("conv3.w").shape() == std::vector<int>({32, 16, 3, 3}), "conv3 shape at width 8");
    REQUIRE(a.at("res5.c1.w").shape() == std::vector<int>({32, 32, 3, 3}), "res shape at width 8");
    REQUIRE(a.at("up13.w").shape() == std::vector<int>({32, 16, 3, 3}), "up13 shape at width 8");
    REQUIRE(a.at("up14.w").shape() == std::vector<int>({16, 8, 3, 3}), "up14 shape at width 8");
    REQUIRE(a.at("sft.gamma.w").shape() == std::vector<int>({8, 8, 3, 3}), "sft head at width 8");
    REQUIRE(a.at("conv15.w").shape() == std::vector<int>({3, 8, 7, 7}), "conv15 shape at width 8");

    REQUIRE_THROWS(build_s2r_generator(GeneratorConfig{2, 9}, 1), DomainError,
                   "base_width < 4 must be rejected");
    REQUIRE_THROWS(build_s2r_generator(GeneratorConfig{8, 0}, 1), DomainError,
                   "zero residual blocks must be rejected");
    pass("build determinism, scaling and config validation");
}

void test_sft_apply() {
    Rng rng(3);
    const Tensor f = random_tensor(rng, {1, 4, 6, 6});
    Tape t;
    const Var vf = t.leaf(f);
    const Var ones = t.leaf(Tensor::full({1, 4, 6, 6}, 1.0));
    const Var zeros = t.leaf(Tensor({1, 4, 6, 6}));
    REQUIRE(bitwise_equal(t.value(sft_apply(t, vf, ones, zeros)), f),
            "gamma=1, beta=0 must be the identity");

    const Tensor beta = random_tensor(rng, {1, 4, 6, 6});
    REQUIRE(bitwise_equal(t.value(sft_apply(t, vf, zeros, t.leaf(beta))), beta),
            "gamma=0 must return beta");

    const Tensor gamma = random_tensor(rng, {1, 4, 6, 6});
    const Tensor beta2 = random_tensor(rng, {1, 4, 6, 6});
    const Tensor got = t.value(sft_apply(t, vf, t.leaf(gamma), t.leaf(beta2)));
    for (std::size_t i = 0; i < got.size(); ++i)
        REQUIRE_CLOSE(got[i], gamma[i] * f[i] + beta2[i], 1e-7, "elementwise multiply-add oracle");

    // Linearity in the features for beta = 0.
    const Tensor f2 = random_tensor(rng, {1, 4, 6, 6});
    const double a = 0.7, b = -1.3;
    Tensor combo({1, 4, 6, 6});
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * f[i] + b * f2[i];
    const Tensor lhs = t.value(sft_apply(t, t.leaf(combo), t.leaf(gamma), zeros));
    const Tensor r1 = t.value(sft_apply(t, vf, t.leaf(gamma), zeros));
    const Tensor r2 = t.value(sft_apply(t, t.leaf(f2), t.leaf(gamma), zeros));
    for (std::size_t i = 0; i < lhs.size(); ++i)
        REQUIRE_CLOSE(lhs[i], a * r1[i] + b * r2[i], 1e-6, "sft linearity");

    Tensor wrong({1, 4, 5, 5});
    REQUIRE_THROWS(sft_apply(t, vf, t.leaf(wrong), zeros), DimensionError,
                   "shape mismatch must throw");
    pass("sft_apply");
}

void test_sft_condition() {
    const ParamSet gen64 = build_s2r_generator(GeneratorConfig{64, 1}, 5);
    Tensor depth({1, 1, 64, 64});
    Rng rng(6);
    for (double& v : depth.raw()) v = rng.uniform(0.0, 1.0);
    const auto [gamma, beta] = sft_condition(gen64, depth);
    REQUIRE(gamma.shape() == std::vector<int>({1, 64, 64, 64}), "gamma must be 64 maps of 64×64");
    REQUIRE(beta.shape() == std::vector<int>({1, 64, 64, 64}), "beta must be 64 maps of 64×64");

    const ParamSet gen = build_s2r_generator(GeneratorConfig{8, 1}, 5);
    const Tensor zero_depth({1, 1, 16, 16});
    const auto [g0, b0] = sft_condition(gen, zero_depth);
    REQUIRE(all_finite(g0) && all_finite(b0), "constant-zero depth must give finite outputs");

    const auto [g1, b1] = sft_condition(gen, zero_depth);
    REQUIRE(bitwise_equal(g0, g1) && bitwise_equal(b0, b1), "sft_condition must be pure");
    pass("sft_condition");
}

void test_translate_contracts() {
    const GeneratorConfig cfg{8, 9};
    const ParamSet s2r = build_s2r_generator(cfg, 7);
    const ParamSet r2s = build_r2s_generator(cfg, 8);
    Rng rng(9);
    const Tensor x = random_tensor(rng, {1, 3, 64, 64});
    const Tensor d = random_tensor(rng, {1, 1, 64, 64}, 0.0, 1.0);

    const Tensor y = translate_s2r(s2r, x, d);
    REQUIRE(y.shape() == std::vector<int>({1, 3, 64, 64}), "s2r must preserve the spatial size");
    for (double v : y.raw()) REQUIRE(v >= -1.0 && v <= 1.0, "s2r output must stay in [-1,1]");
    REQUIRE(bitwise_equal(y, translate_s2r(s2r, x, d)), "s2r must be pure");

    const Tensor z = translate_r2s(r2s, x);
    REQUIRE(z.shape() == std::vector<int>({1, 3, 64, 64}), "r2s must preserve the spatial size");
    for (double v : z.raw()) REQUIRE(v >= -1.0 && v <= 1.0, "r2s output must stay in [-1,1]");
    REQUIRE(bitwise_equal(z, translate_r2s(r2s, x)), "r2s must be pure");

    // Arbitrary finite parameters cannot escape the tanh closure.
    ParamSet wild = build_r2s_generator(GeneratorConfig{4, 1}, 10);
    for (auto& [name, t] : wild.entries())
        for (double& v : t.raw()) v *= 997.0;
    const Tensor wild_out = translate_r2s(wild, random_tensor(rng, {1, 3, 16, 16}));
    for (double v : wild_out.raw())
        REQUIRE(v >= -1.0 && v <= 1.0, "huge parameters must still give bounded outputs");

    Tensor bad = x;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS(translate_s2r(s2r, bad, d), DomainError, "non-finite input must throw");
    pass("translate_s2r / translate_r2s contracts");
}

void test_discriminator_contracts() {
    const ParamSet d = build_discriminator(8, 11);
    Rng rng(12);
    const Tensor x = random_tensor(rng, {2, 3, 64, 64});
    const Tensor scores = discriminate_image(d, x);
    REQUIRE(scores.shape() == std::vector<int>({2, 1, 8, 8}),
            "three stride-2 stages must give an 8×8 patch map");
    REQUIRE(all_finite(scores), "score map must be finite");
    REQUIRE(bitwise_equal(scores, discriminate_image(d, x)), "discriminator must be pure");
    REQUIRE(bitwise_equal(scores, discriminate_feature(d, x)),
            "feature discriminator shares the architecture");
    pass("discriminator contracts");
}

void test_save_load_bitwise() {
    const GeneratorConfig cfg{8, 2};
    const ParamSet s2r = build_s2r_generator(cfg, 13);
    const std::filesystem::path f = std::filesystem::temp_directory_path() / "s2r_roundtrip.ckpt";
    save_params(f, s2r, {{"seed", 13}});
    const ParamSet loaded = load_params(f);
    REQUIRE(loaded.parameter_count() == s2r.parameter_count(), "roundtrip must keep every array");
    for (const auto& [name, t] : s2r.entries())
        REQUIRE(bitwise_equal(t, loaded.at(name)), "roundtrip must be bitwise for " << name);

    Rng rng(14);
    const Tensor x = random_tensor(rng, {1, 3, 32, 32});
    const Tensor d = random_tensor(rng, {1, 1, 32, 32}, 0.0, 1.0);
    REQUIRE(bitwise_equal(translate_s2r(s2r, x, d), translate_s2r(loaded, x, d)),
            "save/load must leave translator outputs bitwise identical");
    std::filesystem::remove(f);
    pass("parameter save/load bitwise roundtrip");
}

void test_generator_gradients() {
    Rng rng(15);
    const GeneratorConfig cfg{4, 1};
    std::vector<ParamSet> sets;
    sets.push_back(build_s2r_generator(cfg, 16));
    const Tensor x = random_tensor(rng, {1, 3, 8, 8}, -0.9, 0.9);
    const Tensor d = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    const Tensor probe = random_tensor(rng, {1, 3, 8, 8});

    auto build = [&](Tape& t, const std::vector<BoundParams>& b) {
        const Var out = translate_s2r(t, b[0], t.leaf(x), t.leaf(d));
        return mean_all(t, mul(t, out, t.leaf(probe)));
    };
    const auto res = gradcheck::check(sets, build, 4);
    REQUIRE(res.max_rel < 1e-4,
            "s2r gradcheck failed: max rel " << res.max_rel << " at " << res.worst);

    std::vector<ParamSet> sets2;
    sets2.push_back(build_r2s_generator(cfg, 17));
    auto build2 = [&](Tape& t, const std::vector<BoundParams>& b) {
        const Var out = translate_r2s(t, b[0], t.leaf(x));
        return mean_all(t, mul(t, out, t.leaf(probe)));
    };
    const auto res2 = gradcheck::check(sets2, build2, 4);
    REQUIRE(res2.max_rel < 1e-4,
            "r2s gradcheck failed: max rel " << res2.max_rel << " at " << res2.worst);
    pass("generator finite-difference gradients (max rel " + std::to_string(res.max_rel) + ")");
}

}  // namespace

int main() {
    test_parameter_count_oracle();
    test_build_determinism_and_scaling();
    test_sft_apply();
    test_sft_condition();
    test_translate_contracts();
    test_discriminator_contracts();
    test_save_load_bitwise();
    test_generator_gradients();
    std::cout << "test_translation: all passed\n";
    return 0;
}
