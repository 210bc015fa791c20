#include "dehaze/losses.hpp"

#include <cmath>

namespace dehaze {

void LossWeights::validate() const {
    for (double v : {lambda_tran, lambda_m, lambda_d, lambda_t, lambda_c, lambda_1, lambda_2})
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("LossWeights: weights must be finite and >= 0");
}

double LossReport::part(const std::string& name) const {
    for (const auto& [n, v] : parts)
        if (n == name) return v;
    throw DomainError("LossReport: no part named " + name);
}

bool LossReport::has(const std::string& name) const {
    for (const auto& [n, v] : parts)
        if (n == name) return true;
    return false;
}

Var adversarial_loss(Tape& t, Var scores_real, Var scores_fake, GanRole role) {
    if (!all_finite(t.value(scores_fake)) ||
        (role == GanRole::Discriminator && !all_finite(t.value(scores_real))))
        throw DomainError("adversarial_loss: non-finite score map");
    if (role == GanRole::Generator) {
        return mean_all(t, square(t, affine(t, scores_fake, 1.0, -1.0)));
    }
    Var real_term = mean_all(t, square(t, affine(t, scores_real, 1.0, -1.0)));
    Var fake_term = mean_all(t, square(t, scores_fake));
    return weighted_sum(t, {real_term, fake_term}, {1.0, 1.0});
}

Var supervised_mse(Tape& t, Var pred, Var target) {
    return mean_all(t, square(t, sub(t, pred, target)));
}

Var total_variation_loss(Tape& t, Var image01) { return tv_l1(t, image01); }

Var dark_channel_loss(Tape& t, Var image01, int patch, DcMode mode, double sharpness) {
    return mean_all(t, window_channel_min(t, image01, patch, mode == DcMode::Soft, sharpness));
}

Var mean_l1(Tape& t, Var a, Var b) { return mean_all(t, abs_op(t, sub(t, a, b))); }

Var to_unit_range(Tape& t, Var x) { return affine(t, x, 0.5, 0.5); }

Var cycle_consistency_loss(Tape& t, const BoundParams& s2r, const BoundParams& r2s, Var x_s,
                           Var d_s, Var x_r, Var d_r) {
    Var s_cycle = translate_r2s(t, r2s, translate_s2r(t, s2r, x_s, d_s));
    Var r_cycle = translate_s2r(t, s2r, translate_r2s(t, r2s, x_r), d_r);
    return weighted_sum(t, {mean_l1(t, s_cycle, x_s), mean_l1(t, r_cycle, x_r)}, {1.0, 1.0});
}

Var identity_loss(Tape& t, const BoundParams& s2r, const BoundParams& r2s, Var x_s, Var x_r,
                  Var d_r) {
    Var s_idt = translate_r2s(t, r2s, x_s);
    Var r_idt = translate_s2r(t, s2r, x_r, d_r);
    return weighted_sum(t, {mean_l1(t, s_idt, x_s), mean_l1(t, r_idt, x_r)}, {1.0, 1.0});
}

Var dehaze_consistency_loss(Tape& t, const BoundParams& r2s, const BoundParams& dehazer_r,
                            const BoundParams& dehazer_s, Var x_r) {
    Var from_real = dehaze(t, dehazer_r, x_r).prediction;
    Var from_translated = dehaze(t, dehazer_s, translate_r2s(t, r2s, x_r)).prediction;
    return mean_l1(t, from_real, from_translated);
}

Var translation_total_loss(Tape& t, Var adv_img_r, Var adv_feat_r, Var adv_img_s, Var adv_feat_s,
                           Var cycle, Var identity, const LossWeights& w) {
    w.validate();
    return weighted_sum(t, {adv_img_r, adv_feat_r, adv_img_s, adv_feat_s, cycle, identity},
                        {1.0, 1.0, 1.0, 1.0, w.lambda_1, w.lambda_2});
}

LossReport overall_loss(const OverallParts& p, const LossWeights& w) {
    w.validate();
    LossReport r;
    r.parts = {{"tran", p.tran}, {"rm", p.rm}, {"sm", p.sm}, {"rd", p.rd},
               {"sd", p.sd},     {"rt", p.rt}, {"st", p.st}, {"consis", p.consis}};
    // Same accumulation order as overall_loss_var, so logged totals match the
    // optimized objective bit for bit.
    double s = 0.0;
    s += w.lambda_tran * p.tran;
    s += w.lambda_m * p.rm;
    s += w.lambda_m * p.sm;
    s += w.lambda_d * p.rd;
    s += w.lambda_d * p.sd;
    s += w.lambda_t * p.rt;
    s += w.lambda_t * p.st;
    s += w.lambda_c * p.consis;
    r.total = s;
    return r;
}

Var overall_loss_var(Tape& t, Var tran, Var rm, Var sm, Var rd, Var sd, Var rt, Var st, Var consis,
                     const LossWeights& w) {
    w.validate();
    return weighted_sum(t, {tran, rm, sm, rd, sd, rt, st, consis},
                        {w.lambda_tran, w.lambda_m, w.lambda_m, w.lambda_d, w.lambda_d, w.lambda_t,
                         w.lambda_t, w.lambda_c});
}

int dc_patch_for_height(int h) {
    if (h <= 0) throw DomainError("dc_patch_for_height: height must be positive");
    const int p = 2 * ((35 * h) / 512) + 1;
    return p;
}

}  // namespace dehaze
