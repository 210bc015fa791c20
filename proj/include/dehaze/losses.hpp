#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dehaze/dehazing.hpp"
#include "dehaze/translation.hpp"

namespace dehaze {

/// Trade-off weights of the translation objective (lambda_1/lambda_2) and the
/// overall objective (lambda_tran/m/d/t/c).
struct LossWeights {
    double lambda_tran = 1.0;
    double lambda_m = 10.0;
    double lambda_d = 1e-2;
    double lambda_t = 1e-3;
    double lambda_c = 1e-1;
    double lambda_1 = 10.0;
    double lambda_2 = 5.0;
    void validate() const;
};

/// Itemized loss values for one step; total is the weighted sum of the parts.
struct LossReport {
    std::vector<std::pair<std::string, double>> parts;
    double total = 0.0;
    double part(const std::string& name) const;
    bool has(const std::string& name) const;
};

enum class GanRole { Generator, Discriminator };
enum class DcMode { Soft, Hard };

/// Least-squares adversarial objective. Discriminator: mean((real-1)^2) +
/// mean(fake^2); generator: mean((fake-1)^2) (scores_real is ignored).
Var adversarial_loss(Tape& t, Var scores_real, Var scores_fake, GanRole role);

Var supervised_mse(Tape& t, Var pred, Var target);
Var total_variation_loss(Tape& t, Var image01);
Var dark_channel_loss(Tape& t, Var image01, int patch, DcMode mode, double sharpness = 200.0);

Var cycle_consistency_loss(Tape& t, const BoundParams& s2r, const BoundParams& r2s, Var x_s,
                           Var d_s, Var x_r, Var d_r);
Var identity_loss(Tape& t, const BoundParams& s2r, const BoundParams& r2s, Var x_s, Var x_r,
                  Var d_r);
Var dehaze_consistency_loss(Tape& t, const BoundParams& r2s, const BoundParams& dehazer_r,
                            const BoundParams& dehazer_s, Var x_r);

/// Four adversarial generator terms + lambda_1 * cycle + lambda_2 * identity.
Var translation_total_loss(Tape& t, Var adv_img_r, Var adv_feat_r, Var adv_img_s, Var adv_feat_s,
                           Var cycle, Var identity, const LossWeights& w);

/// Mean L1 between two same-shape maps (shared reduction helper).
Var mean_l1(Tape& t, Var a, Var b);

/// Remap network space [-1,1] to [0,1] (for TV and dark-channel losses).
Var to_unit_range(Tape& t, Var x);

struct OverallParts {
    double tran = 0.0;
    double rm = 0.0, sm = 0.0;
    double rd = 0.0, sd = 0.0;
    double rt = 0.0, st = 0.0;
    double consis = 0.0;
};

/// Weighted total of the full objective with every term itemized.
LossReport overall_loss(const OverallParts& parts, const LossWeights& w);

/// Tape twin of overall_loss: same term order, identical accumulation.
Var overall_loss_var(Tape& t, Var tran, Var rm, Var sm, Var rd, Var sd, Var rt, Var st, Var consis,
                     const LossWeights& w);

/// Dark-channel patch for a given image height: 35 at 256, scaled and odd
/// elsewhere.
int dc_patch_for_height(int h);

}  // namespace dehaze
