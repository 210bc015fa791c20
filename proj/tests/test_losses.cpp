#include "dehaze/losses.hpp"

#include <limits>

#include "dehaze/haze_physics.hpp"
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

double scalar(Tape& t, Var v) { return t.value(v)[0]; }

void test_adversarial_loss() {
    Tape t;
    const Var ones = t.leaf(Tensor::full({1, 1, 4, 4}, 1.0));
    const Var zeros = t.leaf(Tensor({1, 1, 4, 4}));
    REQUIRE(scalar(t, adversarial_loss(t, ones, zeros, GanRole::Discriminator)) == 0.0,
            "perfect discriminator must score zero");
    REQUIRE(scalar(t, adversarial_loss(t, zeros, ones, GanRole::Generator)) == 0.0,
            "fully fooled generator must score zero");

    Rng rng(31);
    const Tensor real = random_tensor(rng, {2, 1, 5, 5});
    const Tensor fake = random_tensor(rng, {2, 1, 5, 5});
    double want_d = 0.0, want_g = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) {
        want_d += (real[i] - 1.0) * (real[i] - 1.0) + fake[i] * fake[i];
        want_g += (fake[i] - 1.0) * (fake[i] - 1.0);
    }
    want_d /= static_cast<double>(real.size());
    want_g /= static_cast<double>(real.size());
    const Var vr = t.leaf(real);
    const Var vf = t.leaf(fake);
    REQUIRE_CLOSE(scalar(t, adversarial_loss(t, vr, vf, GanRole::Discriminator)), want_d, 1e-7,
                  "least-squares discriminator oracle");
    REQUIRE_CLOSE(scalar(t, adversarial_loss(t, vr, vf, GanRole::Generator)), want_g, 1e-7,
                  "least-squares generator oracle");

    Tensor bad = real;
    bad[0] = std::numeric_limits<double>::infinity();
    const Var vb = t.leaf(bad);
    REQUIRE_THROWS(adversarial_loss(t, vr, vb, GanRole::Generator), DomainError,
                   "non-finite scores must throw");
    pass("adversarial_loss");
}

void test_supervised_mse() {
    Rng rng(32);
    const Tensor y = random_tensor(rng, {1, 3, 6, 6});
    Tape t;
    const Var vy = t.leaf(y);
    REQUIRE(scalar(t, supervised_mse(t, vy, vy)) == 0.0, "identical inputs must give zero");

    const double c = 0.37;
    Tensor shifted = y;
    for (double& v : shifted.raw()) v += c;
    REQUIRE_CLOSE(scalar(t, supervised_mse(t, t.leaf(shifted), vy)), c * c, 1e-12,
                  "constant offset must give c^2");

    const Tensor p = random_tensor(rng, {1, 3, 6, 6});
    double want = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) want += (p[i] - y[i]) * (p[i] - y[i]);
    want /= static_cast<double>(p.size());
    REQUIRE_CLOSE(scalar(t, supervised_mse(t, t.leaf(p), vy)), want, 1e-12, "elementwise oracle");
    pass("supervised_mse");
}

void test_total_variation_loss() {
    Tape t;
    REQUIRE(scalar(t, total_variation_loss(t, t.leaf(Tensor::full({1, 3, 8, 8}, 0.4)))) == 0.0,
            "constant image must give zero");

    // Horizontal ramp with step s and no vertical variation.
    const double step = 0.03;
    Tensor ramp({1, 1, 4, 8});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j) ramp(0, 0, i, j) = step * j;
    REQUIRE_CLOSE(scalar(t, total_variation_loss(t, t.leaf(ramp))), step, 1e-13,
                  "ramp must give its step size");
    pass("total_variation_loss");
}

void test_dark_channel_loss() {
    Rng rng(33);
    Tensor zero_chan = random_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) zero_chan(0, 1, i, j) = 0.0;
    Tape t;
    REQUIRE(scalar(t, dark_channel_loss(t, t.leaf(zero_chan), 3, DcMode::Hard)) == 0.0,
            "a zero channel must give zero loss");
    REQUIRE_CLOSE(scalar(t, dark_channel_loss(t, t.leaf(Tensor::full({1, 3, 8, 8}, 0.42)), 3,
                                              DcMode::Hard)),
                  0.42, 1e-13, "constant image must give the constant");

    // Hard mode equals mean of the brute-force dark channel map.
    const Tensor img_nchw = random_tensor(rng, {1, 3, 12, 12}, 0.0, 1.0);
    Tensor img_hwc({12, 12, 3});
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            for (int c = 0; c < 3; ++c) img_hwc(i, j, c) = img_nchw(0, c, i, j);
    const Tensor dc_map = dark_channel(img_hwc, 3);
    double want = 0.0;
    for (double v : dc_map.raw()) want += v;
    want /= static_cast<double>(dc_map.size());
    const double hard = scalar(t, dark_channel_loss(t, t.leaf(img_nchw), 3, DcMode::Hard));
    REQUIRE(hard == want, "hard mode must equal mean of the dark channel exactly");

    // Soft mode converges to hard from below; within 1e-3 at sharpness 200.
    const double soft = scalar(t, dark_channel_loss(t, t.leaf(img_nchw), 3, DcMode::Soft, 200.0));
    REQUIRE(soft <= hard + 1e-12, "soft min lower-bounds the hard min");
    REQUIRE(hard - soft < 1e-3, "sharpness 200 must match hard mode within 1e-3 (gap "
                                    << hard - soft << ")");
    pass("dark_channel_loss");
}

void test_dc_patch_rule() {
    REQUIRE(dc_patch_for_height(256) == 35, "patch 35 at 256");
    REQUIRE(dc_patch_for_height(64) == 9, "patch 9 at 64");
    REQUIRE(dc_patch_for_height(8) == 1, "patch 1 at 8");
    REQUIRE(dc_patch_for_height(128) % 2 == 1, "patch is always odd");
    pass("dc_patch_for_height");
}

// Translators that add a constant shift: composition adds 2*delta, so the
// cycle loss per branch is |2*delta| against the identity... the offsets are
// checked with exact closed forms below.
void test_composite_losses_with_stub_nets() {
    // Stub "identity" translators built from 1x1 convolutions that copy the
    // input exactly: conv weight identity, bias delta.
    auto make_shift_net = [](double delta) {
        ParamSet p;
        Rng rng(1);
        // conv1 7x7: identity kernel (center tap 1) per channel.
        Tensor w({3, 3, 1, 1});
        for (int c = 0; c < 3; ++c) w(c, c, 0, 0) = 1.0;
        p.add("copy.w", w);
        p.add("copy.b", Tensor::full({3}, delta));
        return p;
    };
    auto forward_shift = [](Tape& t, const BoundParams& p, Var x) {
        return conv2d(t, x, p.at("copy.w"), p.at("copy.b"), 1, 0);
    };

    Rng rng(34);
    const Tensor x = random_tensor(rng, {1, 3, 6, 6}, -0.5, 0.5);
    const ParamSet id_net = make_shift_net(0.0);
    const ParamSet shift_net = make_shift_net(0.1);

    {
        Tape t;
        const BoundParams a = bind(t, id_net, false);
        const Var vx = t.leaf(x);
        const Var y = forward_shift(t, a, forward_shift(t, a, vx));
        REQUIRE(scalar(t, mean_l1(t, y, vx)) == 0.0, "identity composition must give zero");

        const BoundParams b = bind(t, shift_net, false);
        const Var y2 = forward_shift(t, b, vx);
        REQUIRE_CLOSE(scalar(t, mean_l1(t, y2, vx)), 0.1, 1e-12,
                      "constant-shift branch must give |delta|");
    }

    // Full composite ops on tiny real generators: check against a direct
    // recomputation through the same forwards.
    const GeneratorConfig gcfg{4, 1};
    const ParamSet s2r = build_s2r_generator(gcfg, 21);
    const ParamSet r2s = build_r2s_generator(gcfg, 22);
    const Tensor xs = random_tensor(rng, {1, 3, 8, 8});
    const Tensor xr = random_tensor(rng, {1, 3, 8, 8});
    const Tensor ds = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    const Tensor dr = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);

    Tape t;
    const BoundParams bs2r = bind(t, s2r, false);
    const BoundParams br2s = bind(t, r2s, false);
    const Var vxs = t.leaf(xs), vxr = t.leaf(xr), vds = t.leaf(ds), vdr = t.leaf(dr);
    const double cyc = scalar(t, cycle_consistency_loss(t, bs2r, br2s, vxs, vds, vxr, vdr));
    const double want_cyc =
        scalar(t, mean_l1(t, translate_r2s(t, br2s, translate_s2r(t, bs2r, vxs, vds)), vxs)) +
        scalar(t, mean_l1(t, translate_s2r(t, bs2r, translate_r2s(t, br2s, vxr), vdr), vxr));
    REQUIRE_CLOSE(cyc, want_cyc, 1e-12, "cycle loss two-term oracle");

    const double idt = scalar(t, identity_loss(t, bs2r, br2s, vxs, vxr, vdr));
    const double want_idt = scalar(t, mean_l1(t, translate_r2s(t, br2s, vxs), vxs)) +
                            scalar(t, mean_l1(t, translate_s2r(t, bs2r, vxr, vdr), vxr));
    REQUIRE_CLOSE(idt, want_idt, 1e-12, "identity loss two-term oracle");

    const DehazerConfig dcfg{4, 2};
    const ParamSet gr = build_dehazer(dcfg, 23);
    const ParamSet gs = build_dehazer(dcfg, 24);
    const BoundParams bgr = bind(t, gr, false);
    const BoundParams bgs = bind(t, gs, false);
    const double consis = scalar(t, dehaze_consistency_loss(t, br2s, bgr, bgs, vxr));
    const double want_consis =
        scalar(t, mean_l1(t, dehaze::dehaze(t, bgr, vxr).prediction,
                          dehaze::dehaze(t, bgs, translate_r2s(t, br2s, vxr)).prediction));
    REQUIRE_CLOSE(consis, want_consis, 1e-12, "consistency loss direct oracle");
    pass("cycle / identity / consistency losses");
}

void test_translation_total_and_overall() {
    Tape t;
    auto s = [&t](double v) { return t.leaf(Tensor::from({1}, {v})); };
    LossWeights w;

    REQUIRE(scalar(t, translation_total_loss(t, s(0), s(0), s(0), s(0), s(0), s(0), w)) == 0.0,
            "all-zero parts must give zero");
    LossWeights w0 = w;
    w0.lambda_1 = 0.0;
    w0.lambda_2 = 0.0;
    REQUIRE_CLOSE(scalar(t, translation_total_loss(t, s(1), s(2), s(3), s(4), s(9), s(9), w0)),
                  10.0, 1e-12, "zero cycle/identity weights leave the adversarial sum");

    Rng rng(35);
    double parts[6];
    for (double& v : parts) v = rng.uniform(0.0, 2.0);
    const double got = scalar(t, translation_total_loss(t, s(parts[0]), s(parts[1]), s(parts[2]),
                                                        s(parts[3]), s(parts[4]), s(parts[5]), w));
    const double want = parts[0] + parts[1] + parts[2] + parts[3] + w.lambda_1 * parts[4] +
                        w.lambda_2 * parts[5];
    REQUIRE_CLOSE(got, want, 1e-9, "weighted-sum oracle");

    // Overall loss bookkeeping.
    OverallParts zero;
    REQUIRE(overall_loss(zero, w).total == 0.0, "all-zero overall total");

    OverallParts unit_mse;
    unit_mse.rm = 1.0;
    unit_mse.sm = 1.0;
    REQUIRE(overall_loss(unit_mse, w).total == 20.0,
            "unit supervised terms under the default weights must total 20");

    OverallParts rnd;
    rnd.tran = rng.uniform(0.0, 2.0);
    rnd.rm = rng.uniform(0.0, 2.0);
    rnd.sm = rng.uniform(0.0, 2.0);
    rnd.rd = rng.uniform(0.0, 2.0);
    rnd.sd = rng.uniform(0.0, 2.0);
    rnd.rt = rng.uniform(0.0, 2.0);
    rnd.st = rng.uniform(0.0, 2.0);
    rnd.consis = rng.uniform(0.0, 2.0);
    const LossReport rep = overall_loss(rnd, w);
    const double manual = w.lambda_tran * rnd.tran + w.lambda_m * (rnd.rm + rnd.sm) +
                          w.lambda_d * (rnd.rd + rnd.sd) + w.lambda_t * (rnd.rt + rnd.st) +
                          w.lambda_c * rnd.consis;
    REQUIRE_CLOSE(rep.total, manual, 1e-9, "overall weighted-sum oracle");
    REQUIRE(rep.parts.size() == 8, "report must itemize every term");

    // Linearity in each part holding others fixed.
    OverallParts bumped = rnd;
    bumped.rd += 1.0;
    REQUIRE_CLOSE(overall_loss(bumped, w).total - rep.total, w.lambda_d, 1e-9,
                  "overall loss must be linear in each part");

    // The tape twin accumulates identically.
    const double var_total = scalar(
        t, overall_loss_var(t, s(rnd.tran), s(rnd.rm), s(rnd.sm), s(rnd.rd), s(rnd.sd), s(rnd.rt),
                            s(rnd.st), s(rnd.consis), w));
    REQUIRE(var_total == rep.total, "tape and report totals must match bitwise");
    pass("translation_total_loss / overall_loss");
}

void test_loss_gradients() {
    Rng rng(36);
    // Parameterize the loss inputs themselves: a 1x1 conv produces the
    // images the losses consume, so every loss gradient flows through it.
    ParamSet p;
    init_conv(p, rng, "gen", 3, 3, 1, 0.5);
    const Tensor x = random_tensor(rng, {1, 3, 8, 8}, -0.8, 0.8);
    const Tensor y = random_tensor(rng, {1, 3, 8, 8}, -0.8, 0.8);
    std::vector<ParamSet> sets;
    sets.push_back(std::move(p));

    struct Case {
        const char* name;
        gradcheck::LossBuilder build;
    };
    const Tensor probe = random_tensor(rng, {1, 1, 8, 8});
    std::vector<Case> cases;
    cases.push_back({"mse", [&](Tape& t, const std::vector<BoundParams>& b) {
                         const Var img =
                             conv2d(t, t.leaf(x), b[0].at("gen.w"), b[0].at("gen.b"), 1, 0);
                         return supervised_mse(t, img, t.leaf(y));
                     }});
    cases.push_back({"tv", [&](Tape& t, const std::vector<BoundParams>& b) {
                         const Var img =
                             conv2d(t, t.leaf(x), b[0].at("gen.w"), b[0].at("gen.b"), 1, 0);
                         return total_variation_loss(t, to_unit_range(t, tanh_op(t, img)));
                     }});
    cases.push_back({"dc_soft", [&](Tape& t, const std::vector<BoundParams>& b) {
                         const Var img =
                             conv2d(t, t.leaf(x), b[0].at("gen.w"), b[0].at("gen.b"), 1, 0);
                         return dark_channel_loss(t, to_unit_range(t, tanh_op(t, img)), 3,
                                                  DcMode::Soft, 50.0);
                     }});
    cases.push_back({"sft_apply", [&](Tape& t, const std::vector<BoundParams>& b) {
                         const Var img =
                             conv2d(t, t.leaf(x), b[0].at("gen.w"), b[0].at("gen.b"), 1, 0);
                         const Var mod = sft_apply(t, img, t.leaf(y), t.leaf(x));
                         return mean_all(t, mul(t, mod, mul(t, t.leaf(x), t.leaf(y))));
                     }});
    cases.push_back({"adversarial", [&](Tape& t, const std::vector<BoundParams>& b) {
                         const Var img =
                             conv2d(t, t.leaf(x), b[0].at("gen.w"), b[0].at("gen.b"), 1, 0);
                         const Var score = mul(t, mean_all(t, img), mean_all(t, square(t, img)));
                         (void)probe;
                         return adversarial_loss(t, score, score, GanRole::Generator);
                     }});
    for (const Case& c : cases) {
        const auto res = gradcheck::check(sets, c.build, 4);
        REQUIRE(res.max_rel < 1e-4,
                c.name << " gradcheck failed: max rel " << res.max_rel << " at " << res.worst);
    }

    // Composite losses through real tiny networks.
    std::vector<ParamSet> nets;
    nets.push_back(build_s2r_generator(GeneratorConfig{4, 1}, 41));
    nets.push_back(build_r2s_generator(GeneratorConfig{4, 1}, 42));
    const Tensor xs = random_tensor(rng, {1, 3, 8, 8}, -0.9, 0.9);
    const Tensor xr = random_tensor(rng, {1, 3, 8, 8}, -0.9, 0.9);
    const Tensor ds = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    const Tensor dr = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    auto cyc_build = [&](Tape& t, const std::vector<BoundParams>& b) {
        return cycle_consistency_loss(t, b[0], b[1], t.leaf(xs), t.leaf(ds), t.leaf(xr),
                                      t.leaf(dr));
    };
    const auto cyc_res = gradcheck::check(nets, cyc_build, 2);
    REQUIRE(cyc_res.max_rel < 1e-4, "cycle loss gradcheck failed: max rel "
                                        << cyc_res.max_rel << " at " << cyc_res.worst);

    auto idt_build = [&](Tape& t, const std::vector<BoundParams>& b) {
        return identity_loss(t, b[0], b[1], t.leaf(xs), t.leaf(xr), t.leaf(dr));
    };
    const auto idt_res = gradcheck::check(nets, idt_build, 2);
    REQUIRE(idt_res.max_rel < 1e-4, "identity loss gradcheck failed: max rel "
                                        << idt_res.max_rel << " at " << idt_res.worst);

    std::vector<ParamSet> consis_nets;
    consis_nets.push_back(build_r2s_generator(GeneratorConfig{4, 1}, 43));
    consis_nets.push_back(build_dehazer(DehazerConfig{4, 2}, 44));
    consis_nets.push_back(build_dehazer(DehazerConfig{4, 2}, 45));
    auto consis_build = [&](Tape& t, const std::vector<BoundParams>& b) {
        return dehaze_consistency_loss(t, b[0], b[1], b[2], t.leaf(xr));
    };
    const auto consis_res = gradcheck::check(consis_nets, consis_build, 2);
    REQUIRE(consis_res.max_rel < 1e-4, "consistency loss gradcheck failed: max rel "
                                           << consis_res.max_rel << " at " << consis_res.worst);
    pass("loss finite-difference gradients");
}

void test_nonnegativity_property() {
    Rng rng(37);
    Tape t;
    LossWeights w;
    for (int k = 0; k < 20; ++k) {
        const Tensor a = random_tensor(rng, {1, 3, 6, 6});
        const Tensor b = random_tensor(rng, {1, 3, 6, 6});
        const Tensor u = random_tensor(rng, {1, 3, 6, 6}, 0.0, 1.0);
        const Var va = t.leaf(a), vb = t.leaf(b), vu = t.leaf(u);
        for (double v :
             {scalar(t, supervised_mse(t, va, vb)), scalar(t, total_variation_loss(t, vu)),
              scalar(t, dark_channel_loss(t, vu, 3, DcMode::Soft, 200.0)),
              scalar(t, dark_channel_loss(t, vu, 3, DcMode::Hard)), scalar(t, mean_l1(t, va, vb)),
              scalar(t, adversarial_loss(t, va, vb, GanRole::Discriminator))}) {
            REQUIRE(std::isfinite(v), "losses must be finite on finite inputs");
            REQUIRE(v >= 0.0, "losses must be non-negative");
        }
    }
    pass("non-negativity and finiteness properties");
}

}  // namespace

int main() {
    test_adversarial_loss();
    test_supervised_mse();
    test_total_variation_loss();
    test_dark_channel_loss();
    test_dc_patch_rule();
    test_composite_losses_with_stub_nets();
    test_translation_total_and_overall();
    test_loss_gradients();
    test_nonnegativity_property();
    std::cout << "test_losses: all passed\n";
    return 0;
}
