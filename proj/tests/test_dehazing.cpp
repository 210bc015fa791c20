#include "dehaze/dehazing.hpp"

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

void test_build_contracts() {
    const DehazerConfig cfg{8, 3};
    const ParamSet a = build_dehazer(cfg, 1);
    const ParamSet b = build_dehazer(cfg, 1);
    for (const auto& [name, t] : a.entries())
        REQUIRE(bitwise_equal(t, b.at(name)), "same seed must reproduce " << name);
    const ParamSet c = build_dehazer(cfg, 2);
    REQUIRE(!bitwise_equal(a.at("stem.w"), c.at("stem.w")),
            "seeds 1 and 2 must give independent parameter sets");

    // Hand-computed shape algebra for width 8, 3 stages.
    REQUIRE(a.at("stem.w").shape() == std::vector<int>({8, 3, 3, 3}), "stem shape");
    REQUIRE(a.at("enc1.w").shape() == std::vector<int>({16, 8, 3, 3}), "enc1 shape");
    REQUIRE(a.at("enc2.w").shape() == std::vector<int>({32, 16, 3, 3}), "enc2 shape");
    REQUIRE(a.at("enc3.w").shape() == std::vector<int>({64, 32, 3, 3}), "enc3 shape");
    REQUIRE(a.at("dec3.w").shape() == std::vector<int>({32, 64 + 32, 3, 3}),
            "dec3 consumes latent plus enc2 skip");
    REQUIRE(a.at("dec2.w").shape() == std::vector<int>({16, 32 + 16, 3, 3}),
            "dec2 consumes dec3 plus enc1 skip");
    REQUIRE(a.at("dec1.w").shape() == std::vector<int>({8, 16 + 8, 3, 3}),
            "dec1 consumes dec2 plus stem skip");
    REQUIRE(a.at("side3.w").shape() == std::vector<int>({3, 32, 3, 3}), "side3 head shape");
    REQUIRE(a.at("side2.w").shape() == std::vector<int>({3, 16, 3, 3}), "side2 head shape");
    REQUIRE(a.at("head.w").shape() == std::vector<int>({3, 8, 3, 3}), "prediction head shape");
    REQUIRE(!a.has("side1.w"), "the full-resolution level has no side output");

    REQUIRE_THROWS(build_dehazer(DehazerConfig{8, 0}, 1), DomainError,
                   "zero stages must be rejected");
    pass("dehazer build determinism, independence and shape algebra");
}

void test_forward_contracts() {
    const DehazerConfig cfg{8, 3};
    const ParamSet p = build_dehazer(cfg, 3);
    Rng rng(4);
    const Tensor x = random_tensor(rng, {2, 3, 64, 64});
    const DehazeResult out = dehaze::dehaze(p, x);
    REQUIRE(out.prediction.shape() == std::vector<int>({2, 3, 64, 64}),
            "prediction must match the input size");
    REQUIRE(out.side_outputs.size() == 2, "three stages must give side outputs at 2 scales");
    REQUIRE(out.side_outputs[0].shape() == std::vector<int>({2, 3, 16, 16}),
            "coarsest side output at 16×16");
    REQUIRE(out.side_outputs[1].shape() == std::vector<int>({2, 3, 32, 32}),
            "middle side output at 32×32");
    for (double v : out.prediction.raw()) REQUIRE(v >= -1.0 && v <= 1.0, "prediction in [-1,1]");
    for (const Tensor& s : out.side_outputs)
        for (double v : s.raw()) REQUIRE(v >= -1.0 && v <= 1.0, "side outputs in [-1,1]");

    const DehazeResult again = dehaze::dehaze(p, x);
    REQUIRE(bitwise_equal(out.prediction, again.prediction), "dehaze must be pure");

    ParamSet wild = build_dehazer(DehazerConfig{4, 2}, 5);
    for (auto& [name, t] : wild.entries())
        for (double& v : t.raw()) v *= 731.0;
    const DehazeResult wild_out = dehaze::dehaze(wild, random_tensor(rng, {1, 3, 16, 16}));
    for (double v : wild_out.prediction.raw())
        REQUIRE(v >= -1.0 && v <= 1.0, "huge parameters stay inside the tanh closure");

    REQUIRE_THROWS(dehaze::dehaze(p, random_tensor(rng, {1, 3, 60, 60})), DimensionError,
                   "size not divisible by 2^stages must throw");
    pass("dehaze forward contracts");
}

void test_gradients() {
    Rng rng(6);
    std::vector<ParamSet> sets;
    sets.push_back(build_dehazer(DehazerConfig{4, 2}, 7));
    const Tensor x = random_tensor(rng, {1, 3, 8, 8}, -0.9, 0.9);
    const Tensor probe = random_tensor(rng, {1, 3, 8, 8});
    auto build = [&](Tape& t, const std::vector<BoundParams>& b) {
        const DehazeVars out = dehaze::dehaze(t, b[0], t.leaf(x));
        return mean_all(t, mul(t, out.prediction, t.leaf(probe)));
    };
    const auto res = gradcheck::check(sets, build, 4);
    REQUIRE(res.max_rel < 1e-4,
            "dehazer gradcheck failed: max rel " << res.max_rel << " at " << res.worst);
    pass("dehazer finite-difference gradients (max rel " + std::to_string(res.max_rel) + ")");
}

// Zeroing the deepest latent while keeping skips should hurt less than
// removing the skips: the skips carry usable information.
void test_skip_connections_carry_information() {
    const DehazerConfig cfg{8, 3};
    Rng rng(8);
    const Tensor x = random_tensor(rng, {1, 3, 32, 32});

    int checked = 0;
    double margin_sum = 0.0;
    for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
        const ParamSet p = build_dehazer(cfg, seed);
        const DehazeResult base = dehaze::dehaze(p, x);

        // Zero the deepest encoder (kills the latent), keep skips intact.
        ParamSet no_latent = p;
        for (double& v : no_latent.at("enc3.w").raw()) v = 0.0;
        for (double& v : no_latent.at("enc3.b").raw()) v = 0.0;
        const double d_latent = max_abs_diff(dehaze::dehaze(no_latent, x).prediction, base.prediction);

        // Zero every skip path instead: decoder convolutions ignore the skip
        // channels (the upsampled part of each decoder input stays).
        ParamSet no_skips = p;
        for (int s = 1; s <= 3; ++s) {
            Tensor& w = no_skips.at("dec" + std::to_string(s) + ".w");
            const int skip_ch = w.dim(1) - 2 * w.dim(0);
            (void)skip_ch;
            const int deep_ch = w.dim(1) - (s == 1 ? 8 : (s == 2 ? 16 : 32));
            for (int co = 0; co < w.dim(0); ++co)
                for (int ci = deep_ch; ci < w.dim(1); ++ci)
                    for (int u = 0; u < 3; ++u)
                        for (int v = 0; v < 3; ++v) w(co, ci, u, v) = 0.0;
        }
        const double d_skips = max_abs_diff(dehaze::dehaze(no_skips, x).prediction, base.prediction);
        margin_sum += d_skips - d_latent;
        checked += d_skips > d_latent ? 1 : 0;
    }
    REQUIRE(checked >= 4, "skips must matter more than the deepest latent on most random nets "
                              << "(" << checked << "/5, mean margin " << margin_sum / 5 << ")");
    pass("skip connections carry information");
}

}  // namespace

int main() {
    test_build_contracts();
    test_forward_contracts();
    test_gradients();
    test_skip_connections_carry_information();
    std::cout << "test_dehazing: all passed\n";
    return 0;
}
