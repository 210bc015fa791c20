#include "dehaze/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>

#include "dehaze/dehazing.hpp"
#include "dehaze/translation.hpp"

namespace dehaze {

namespace {

const std::vector<std::string> kAllNets = {"s2r",      "r2s",      "d_img_r", "d_img_s",
                                           "d_feat_r", "d_feat_s", "gr",      "gs"};

std::vector<std::string> nets_for_mode(AblationMode m) {
    switch (m) {
        case AblationMode::SYN:
        case AblationMode::SYN_U:
            return {"gs"};
        default:
            return kAllNets;
    }
}

std::uint64_t net_seed(const TrainConfig& cfg, const std::string& net) {
    return derive_seed(cfg.seed, 0xbe7, fnv1a64(net.data(), net.size()));
}

void ensure_nets(Checkpoint& ck, const TrainConfig& cfg) {
    const GeneratorConfig gcfg{cfg.width, cfg.res_blocks};
    const DehazerConfig dcfg{cfg.width, cfg.dehazer_stages};
    for (const std::string& net : nets_for_mode(cfg.mode)) {
        if (ck.nets.count(net)) continue;
        if (net == "s2r")
            ck.nets.emplace(net, build_s2r_generator(gcfg, net_seed(cfg, net)));
        else if (net == "r2s")
            ck.nets.emplace(net, build_r2s_generator(gcfg, net_seed(cfg, net)));
        else if (net == "gr" || net == "gs")
            ck.nets.emplace(net, build_dehazer(dcfg, net_seed(cfg, net)));
        else
            ck.nets.emplace(net, build_discriminator(cfg.width, net_seed(cfg, net)));
    }
}

AdamParams adam_for_phase(const TrainConfig& cfg, int phase) {
    AdamParams hp;
    hp.beta2 = cfg.beta2;
    if (phase == 1) {
        hp.lr = cfg.lr1;
        hp.beta1 = cfg.beta1_phase1;
    } else {
        hp.lr = phase == 2 ? cfg.lr2 : cfg.lr3;
        hp.beta1 = cfg.beta1_phase23;
    }
    return hp;
}

struct BatchData {
    Tensor x_s, y_s, d_s;
    Tensor x_r, d_r;
    bool has_real = false;
};

BatchData make_batch(const Dataset& data, const std::vector<int>& syn_idx,
                     const std::vector<int>& real_idx, const TrainConfig& cfg,
                     std::uint64_t epoch_seed, bool needs_real) {
    BatchData b;
    std::vector<Tensor> xs, ys, ds;
    for (int idx : syn_idx) {
        const TrainSample s =
            crop_and_normalize(data.syn[static_cast<std::size_t>(idx)], cfg.crop, cfg.crop,
                               derive_seed(epoch_seed, 0xc0, static_cast<std::uint64_t>(idx)));
        xs.push_back(s.hazy_net);
        ys.push_back(s.clear_net);
        ds.push_back(s.depth);
    }
    b.x_s = stack_hwc(xs);
    b.y_s = stack_hwc(ys);
    b.d_s = stack_hwc(ds);
    if (needs_real) {
        std::vector<Tensor> crops01;
        for (int idx : real_idx) {
            const RealSample& r = data.real[static_cast<std::size_t>(idx)];
            const CropWindow win =
                pick_crop(r.hazy.dim(0), r.hazy.dim(1), cfg.crop, cfg.crop,
                          derive_seed(epoch_seed, 0xc1, static_cast<std::uint64_t>(idx)));
            crops01.push_back(apply_crop(r.hazy, win));
        }
        b.d_r = pseudo_depth_batch(crops01, cfg);
        std::vector<Tensor> xr;
        for (Tensor& c : crops01) xr.push_back(to_network_space(c));
        b.x_r = stack_hwc(xr);
        b.has_real = true;
    }
    return b;
}

void check_finite_parts(const LossReport& rep, std::uint64_t step) {
    for (const auto& [name, value] : rep.parts)
        if (!std::isfinite(value))
            throw TrainingError("non-finite loss term " + name + " at step " +
                                std::to_string(step));
    if (!std::isfinite(rep.total))
        throw TrainingError("non-finite total loss at step " + std::to_string(step));
}

std::map<std::string, Tensor> collect_grads(Tape& t, const BoundParams& bound,
                                            const ParamSet& params) {
    std::map<std::string, Tensor> grads;
    for (const auto& [name, var] : bound.vars) {
        if (t.has_grad(var))
            grads.emplace(name, t.grad(var));
        else
            grads.emplace(name, Tensor(params.at(name).shape()));
    }
    return grads;
}

void apply_update(Checkpoint& ck, const std::string& net, Tape& t, const BoundParams& bound,
                  const AdamParams& hp, double clip_norm) {
    auto grads = collect_grads(t, bound, ck.nets.at(net));
    adam_update_set(ck.nets.at(net), grads, ck.opt[net], hp, clip_norm);
}

// Discriminator pass shared by phases 1 and 3: translated/dehazed images are
// produced with every generator frozen, so gradients stay inside the
// discriminators.
void discriminator_update(Checkpoint& ck, const BatchData& b, const TrainConfig& cfg, int phase,
                          std::uint64_t step, LossReport& rep) {
    Tape t;
    const BoundParams s2r = bind(t, ck.nets.at("s2r"), false);
    const BoundParams r2s = bind(t, ck.nets.at("r2s"), false);
    const BoundParams gr = bind(t, ck.nets.at("gr"), false);
    const BoundParams gs = bind(t, ck.nets.at("gs"), false);
    const BoundParams d_img_r = bind(t, ck.nets.at("d_img_r"), true);
    const BoundParams d_img_s = bind(t, ck.nets.at("d_img_s"), true);
    const BoundParams d_feat_r = bind(t, ck.nets.at("d_feat_r"), true);
    const BoundParams d_feat_s = bind(t, ck.nets.at("d_feat_s"), true);

    const Var x_s = t.leaf(b.x_s);
    const Var d_s = t.leaf(b.d_s);
    const Var x_r = t.leaf(b.x_r);

    const Var x_s2r = translate_s2r(t, s2r, x_s, d_s);
    const Var x_r2s = translate_r2s(t, r2s, x_r);
    const Var j_fake_r = dehaze(t, gr, x_s2r).prediction;
    const Var j_real_r = dehaze(t, gr, x_r).prediction;
    const Var j_fake_s = dehaze(t, gs, x_r2s).prediction;
    const Var j_real_s = dehaze(t, gs, x_s).prediction;

    const Var l_img_r = adversarial_loss(t, discriminate(t, d_img_r, x_r),
                                         discriminate(t, d_img_r, x_s2r), GanRole::Discriminator);
    const Var l_feat_r =
        adversarial_loss(t, discriminate(t, d_feat_r, j_real_r),
                         discriminate(t, d_feat_r, j_fake_r), GanRole::Discriminator);
    const Var l_img_s = adversarial_loss(t, discriminate(t, d_img_s, x_s),
                                         discriminate(t, d_img_s, x_r2s), GanRole::Discriminator);
    const Var l_feat_s =
        adversarial_loss(t, discriminate(t, d_feat_s, j_real_s),
                         discriminate(t, d_feat_s, j_fake_s), GanRole::Discriminator);

    rep.parts.emplace_back("d_img_r", t.value(l_img_r)[0]);
    rep.parts.emplace_back("d_feat_r", t.value(l_feat_r)[0]);
    rep.parts.emplace_back("d_img_s", t.value(l_img_s)[0]);
    rep.parts.emplace_back("d_feat_s", t.value(l_feat_s)[0]);
    check_finite_parts(rep, step);

    const Var total = weighted_sum(t, {l_img_r, l_feat_r, l_img_s, l_feat_s}, {1, 1, 1, 1});
    t.backward(total);
    const AdamParams hp = adam_for_phase(cfg, phase);
    apply_update(ck, "d_img_r", t, d_img_r, hp, cfg.clip_norm);
    apply_update(ck, "d_feat_r", t, d_feat_r, hp, cfg.clip_norm);
    apply_update(ck, "d_img_s", t, d_img_s, hp, cfg.clip_norm);
    apply_update(ck, "d_feat_s", t, d_feat_s, hp, cfg.clip_norm);
}

LossReport phase1_step(Checkpoint& ck, const BatchData& b, const TrainConfig& cfg,
                       std::uint64_t step) {
    LossReport rep;
    discriminator_update(ck, b, cfg, 1, step, rep);

    Tape t;
    const BoundParams s2r = bind(t, ck.nets.at("s2r"), true);
    const BoundParams r2s = bind(t, ck.nets.at("r2s"), true);
    const BoundParams gr = bind(t, ck.nets.at("gr"), false);
    const BoundParams gs = bind(t, ck.nets.at("gs"), false);
    const BoundParams d_img_r = bind(t, ck.nets.at("d_img_r"), false);
    const BoundParams d_img_s = bind(t, ck.nets.at("d_img_s"), false);
    const BoundParams d_feat_r = bind(t, ck.nets.at("d_feat_r"), false);
    const BoundParams d_feat_s = bind(t, ck.nets.at("d_feat_s"), false);

    const Var x_s = t.leaf(b.x_s);
    const Var d_s = t.leaf(b.d_s);
    const Var x_r = t.leaf(b.x_r);
    const Var d_r = t.leaf(b.d_r);

    const Var x_s2r = translate_s2r(t, s2r, x_s, d_s);
    const Var x_r2s = translate_r2s(t, r2s, x_r);

    const Var fake_img_r = discriminate(t, d_img_r, x_s2r);
    const Var adv_img_r = adversarial_loss(t, fake_img_r, fake_img_r, GanRole::Generator);
    const Var fake_feat_r = discriminate(t, d_feat_r, dehaze(t, gr, x_s2r).prediction);
    const Var adv_feat_r = adversarial_loss(t, fake_feat_r, fake_feat_r, GanRole::Generator);
    const Var fake_img_s = discriminate(t, d_img_s, x_r2s);
    const Var adv_img_s = adversarial_loss(t, fake_img_s, fake_img_s, GanRole::Generator);
    const Var fake_feat_s = discriminate(t, d_feat_s, dehaze(t, gs, x_r2s).prediction);
    const Var adv_feat_s = adversarial_loss(t, fake_feat_s, fake_feat_s, GanRole::Generator);

    // Cycle and identity reuse the translations computed above.
    const Var cyc = weighted_sum(
        t,
        {mean_l1(t, translate_r2s(t, r2s, x_s2r), x_s),
         mean_l1(t, translate_s2r(t, s2r, x_r2s, d_r), x_r)},
        {1.0, 1.0});
    const Var idt = weighted_sum(t,
                                 {mean_l1(t, translate_r2s(t, r2s, x_s), x_s),
                                  mean_l1(t, translate_s2r(t, s2r, x_r, d_r), x_r)},
                                 {1.0, 1.0});
    const Var tran = translation_total_loss(t, adv_img_r, adv_feat_r, adv_img_s, adv_feat_s, cyc,
                                            idt, cfg.weights);

    rep.parts.emplace_back("adv_img_r", t.value(adv_img_r)[0]);
    rep.parts.emplace_back("adv_feat_r", t.value(adv_feat_r)[0]);
    rep.parts.emplace_back("adv_img_s", t.value(adv_img_s)[0]);
    rep.parts.emplace_back("adv_feat_s", t.value(adv_feat_s)[0]);
    rep.parts.emplace_back("cycle", t.value(cyc)[0]);
    rep.parts.emplace_back("idt", t.value(idt)[0]);
    rep.parts.emplace_back("tran", t.value(tran)[0]);
    rep.total = t.value(tran)[0];
    check_finite_parts(rep, step);

    t.backward(tran);
    const AdamParams hp = adam_for_phase(cfg, 1);
    apply_update(ck, "s2r", t, s2r, hp, cfg.clip_norm);
    apply_update(ck, "r2s", t, r2s, hp, cfg.clip_norm);
    return rep;
}

LossReport phase2_step(Checkpoint& ck, const BatchData& b, const TrainConfig& cfg,
                       std::uint64_t step) {
    const AblationMode m = cfg.mode;
    const bool use_rm = m == AblationMode::FULL || m == AblationMode::S2R;
    const bool use_sm = m != AblationMode::S2R;
    const bool use_r_unsup = m == AblationMode::FULL;
    const bool use_s_unsup_raw = m == AblationMode::SYN_U;
    const bool use_s_unsup_r2s = m == AblationMode::FULL || m == AblationMode::R2S_U;
    const bool use_consis = m == AblationMode::FULL;
    const bool train_gr = use_rm || use_r_unsup;
    const bool train_gs = use_sm || use_s_unsup_raw || use_s_unsup_r2s;
    const int dc_patch = dc_patch_for_height(cfg.crop);

    Tape t;
    const Var x_s = t.leaf(b.x_s);
    const Var y_s = t.leaf(b.y_s);
    const Var d_s = t.leaf(b.d_s);
    const Var x_r = b.has_real ? t.leaf(b.x_r) : -1;

    BoundParams gr, gs;
    if (train_gr) gr = bind(t, ck.nets.at("gr"), true);
    if (train_gs) gs = bind(t, ck.nets.at("gs"), true);

    std::vector<Var> terms;
    std::vector<double> weights;
    LossReport rep;
    auto add_term = [&](const char* name, Var v, double w) {
        rep.parts.emplace_back(name, t.value(v)[0]);
        terms.push_back(v);
        weights.push_back(w);
    };

    Var j_real_r = -1;  // G_R on raw real, shared by the unsupervised terms
    if (use_rm) {
        const BoundParams s2r = bind(t, ck.nets.at("s2r"), false);
        const Var x_s2r = translate_s2r(t, s2r, x_s, d_s);
        add_term("rm", supervised_mse(t, dehaze(t, gr, x_s2r).prediction, y_s), cfg.weights.lambda_m);
    }
    if (use_sm)
        add_term("sm", supervised_mse(t, dehaze(t, gs, x_s).prediction, y_s), cfg.weights.lambda_m);
    if (use_r_unsup) {
        j_real_r = dehaze(t, gr, x_r).prediction;
        const Var unit = to_unit_range(t, j_real_r);
        add_term("rd", dark_channel_loss(t, unit, dc_patch, DcMode::Soft), cfg.weights.lambda_d);
        add_term("rt", total_variation_loss(t, unit), cfg.weights.lambda_t);
    }
    Var j_s_unsup = -1;
    if (use_s_unsup_raw) {
        j_s_unsup = dehaze(t, gs, x_r).prediction;
    } else if (use_s_unsup_r2s) {
        const BoundParams r2s = bind(t, ck.nets.at("r2s"), false);
        j_s_unsup = dehaze(t, gs, translate_r2s(t, r2s, x_r)).prediction;
    }
    if (j_s_unsup >= 0) {
        const Var unit = to_unit_range(t, j_s_unsup);
        add_term("sd", dark_channel_loss(t, unit, dc_patch, DcMode::Soft), cfg.weights.lambda_d);
        add_term("st", total_variation_loss(t, unit), cfg.weights.lambda_t);
    }
    if (use_consis) add_term("consis", mean_l1(t, j_real_r, j_s_unsup), cfg.weights.lambda_c);

    const Var total = weighted_sum(t, terms, weights);
    rep.total = t.value(total)[0];
    check_finite_parts(rep, step);

    t.backward(total);
    const AdamParams hp = adam_for_phase(cfg, 2);
    if (train_gr) apply_update(ck, "gr", t, gr, hp, cfg.clip_norm);
    if (train_gs) apply_update(ck, "gs", t, gs, hp, cfg.clip_norm);
    return rep;
}

LossReport phase3_step(Checkpoint& ck, const BatchData& b, const TrainConfig& cfg,
                       std::uint64_t step) {
    LossReport rep;
    discriminator_update(ck, b, cfg, 3, step, rep);
    const int dc_patch = dc_patch_for_height(cfg.crop);

    Tape t;
    const BoundParams s2r = bind(t, ck.nets.at("s2r"), true);
    const BoundParams r2s = bind(t, ck.nets.at("r2s"), true);
    const BoundParams gr = bind(t, ck.nets.at("gr"), true);
    const BoundParams gs = bind(t, ck.nets.at("gs"), true);
    const BoundParams d_img_r = bind(t, ck.nets.at("d_img_r"), false);
    const BoundParams d_img_s = bind(t, ck.nets.at("d_img_s"), false);
    const BoundParams d_feat_r = bind(t, ck.nets.at("d_feat_r"), false);
    const BoundParams d_feat_s = bind(t, ck.nets.at("d_feat_s"), false);

    const Var x_s = t.leaf(b.x_s);
    const Var y_s = t.leaf(b.y_s);
    const Var d_s = t.leaf(b.d_s);
    const Var x_r = t.leaf(b.x_r);
    const Var d_r = t.leaf(b.d_r);

    const Var x_s2r = translate_s2r(t, s2r, x_s, d_s);
    const Var x_r2s = translate_r2s(t, r2s, x_r);
    const Var j_pairs_r = dehaze(t, gr, x_s2r).prediction;
    const Var j_real_r = dehaze(t, gr, x_r).prediction;
    const Var j_pairs_s = dehaze(t, gs, x_s).prediction;
    const Var j_r2s_s = dehaze(t, gs, x_r2s).prediction;

    const Var fake_img_r = discriminate(t, d_img_r, x_s2r);
    const Var adv_img_r = adversarial_loss(t, fake_img_r, fake_img_r, GanRole::Generator);
    const Var fake_feat_r = discriminate(t, d_feat_r, j_pairs_r);
    const Var adv_feat_r = adversarial_loss(t, fake_feat_r, fake_feat_r, GanRole::Generator);
    const Var fake_img_s = discriminate(t, d_img_s, x_r2s);
    const Var adv_img_s = adversarial_loss(t, fake_img_s, fake_img_s, GanRole::Generator);
    const Var fake_feat_s = discriminate(t, d_feat_s, j_r2s_s);
    const Var adv_feat_s = adversarial_loss(t, fake_feat_s, fake_feat_s, GanRole::Generator);

    const Var cyc = weighted_sum(
        t,
        {mean_l1(t, translate_r2s(t, r2s, x_s2r), x_s),
         mean_l1(t, translate_s2r(t, s2r, x_r2s, d_r), x_r)},
        {1.0, 1.0});
    const Var idt = weighted_sum(t,
                                 {mean_l1(t, translate_r2s(t, r2s, x_s), x_s),
                                  mean_l1(t, translate_s2r(t, s2r, x_r, d_r), x_r)},
                                 {1.0, 1.0});
    const Var tran = translation_total_loss(t, adv_img_r, adv_feat_r, adv_img_s, adv_feat_s, cyc,
                                            idt, cfg.weights);

    const Var rm = supervised_mse(t, j_pairs_r, y_s);
    const Var sm = supervised_mse(t, j_pairs_s, y_s);
    const Var unit_r = to_unit_range(t, j_real_r);
    const Var rd = dark_channel_loss(t, unit_r, dc_patch, DcMode::Soft);
    const Var rt = total_variation_loss(t, unit_r);
    const Var unit_s = to_unit_range(t, j_r2s_s);
    const Var sd = dark_channel_loss(t, unit_s, dc_patch, DcMode::Soft);
    const Var st = total_variation_loss(t, unit_s);
    const Var consis = mean_l1(t, j_real_r, j_r2s_s);

    const Var total = overall_loss_var(t, tran, rm, sm, rd, sd, rt, st, consis, cfg.weights);

    rep.parts.emplace_back("adv_img_r", t.value(adv_img_r)[0]);
    rep.parts.emplace_back("adv_feat_r", t.value(adv_feat_r)[0]);
    rep.parts.emplace_back("adv_img_s", t.value(adv_img_s)[0]);
    rep.parts.emplace_back("adv_feat_s", t.value(adv_feat_s)[0]);
    rep.parts.emplace_back("cycle", t.value(cyc)[0]);
    rep.parts.emplace_back("idt", t.value(idt)[0]);
    OverallParts parts;
    parts.tran = t.value(tran)[0];
    parts.rm = t.value(rm)[0];
    parts.sm = t.value(sm)[0];
    parts.rd = t.value(rd)[0];
    parts.sd = t.value(sd)[0];
    parts.rt = t.value(rt)[0];
    parts.st = t.value(st)[0];
    parts.consis = t.value(consis)[0];
    const LossReport overall = overall_loss(parts, cfg.weights);
    for (const auto& p : overall.parts) rep.parts.push_back(p);
    rep.total = overall.total;
    check_finite_parts(rep, step);

    t.backward(total);
    const AdamParams hp = adam_for_phase(cfg, 3);
    apply_update(ck, "s2r", t, s2r, hp, cfg.clip_norm);
    apply_update(ck, "r2s", t, r2s, hp, cfg.clip_norm);
    apply_update(ck, "gr", t, gr, hp, cfg.clip_norm);
    apply_update(ck, "gs", t, gs, hp, cfg.clip_norm);
    return rep;
}

using StepFn = LossReport (*)(Checkpoint&, const BatchData&, const TrainConfig&, std::uint64_t);

Checkpoint run_phase(const Dataset& data, const TrainConfig& cfg, int phase, int epochs,
                     Checkpoint state, bool needs_real, TrainLogger* log, const StepCallback& cb,
                     StepFn step_fn) {
    cfg.validate();
    const int B = cfg.batch_size;
    const int n_syn = static_cast<int>(data.syn.size());
    const int n_real = static_cast<int>(data.real.size());
    if (n_syn < B) throw DomainError("training: synthetic dataset smaller than one batch");
    if (needs_real && n_real < B)
        throw DomainError("training: real dataset smaller than one batch");
    if (cfg.crop > data.height || cfg.crop > data.width)
        throw DomainError("training: crop larger than dataset images");

    state.mode = to_string(cfg.mode);
    state.config_hash = cfg.config_hash;
    if (state.phase != phase) {
        state.phase = phase;
        state.epoch = 0;
        state.step_in_epoch = 0;
    }

    for (int epoch = state.epoch; epoch < epochs; ++epoch) {
        const auto syn_batches = epoch_batches(n_syn, B, derive_seed(cfg.seed, phase, epoch, 0));
        const auto real_batches =
            needs_real ? epoch_batches(n_real, B, derive_seed(cfg.seed, phase, epoch, 1))
                       : std::vector<std::vector<int>>{};
        const std::uint64_t epoch_seed = derive_seed(cfg.seed, phase, epoch, 2);
        const int start = (epoch == state.epoch) ? state.step_in_epoch : 0;
        for (int i = start; i < static_cast<int>(syn_batches.size()); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::vector<int> real_idx =
                needs_real ? real_batches[static_cast<std::size_t>(i) % real_batches.size()]
                           : std::vector<int>{};
            const BatchData batch =
                make_batch(data, syn_batches[static_cast<std::size_t>(i)], real_idx, cfg,
                           derive_seed(epoch_seed, static_cast<std::uint64_t>(i)), needs_real);
            const LossReport rep = step_fn(state, batch, cfg, state.step + 1);
            state.step += 1;
            state.epoch = epoch;
            state.step_in_epoch = i + 1;
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            if (log) {
                log->log_step(state.step, phase, cfg.mode, rep);
                log->log_timing(state.step, wall_ms);
            }
            if (cb) {
                StepInfo info;
                info.step = state.step;
                info.phase = phase;
                info.phase_step = static_cast<std::uint64_t>(epoch) * syn_batches.size() +
                                  static_cast<std::uint64_t>(i) + 1;
                info.mode = cfg.mode;
                info.report = &rep;
                info.state = &state;
                cb(info);
            }
        }
        state.step_in_epoch = 0;
    }
    state.epoch = epochs;
    state.step_in_epoch = 0;
    return state;
}

void warn_on_config_mismatch(const Checkpoint& resume, const TrainConfig& cfg) {
    if (!cfg.config_hash.empty() && !resume.config_hash.empty() &&
        resume.config_hash != cfg.config_hash)
        std::cerr << "warning: resuming from checkpoint with config hash " << resume.config_hash
                  << " but current config hash is " << cfg.config_hash << "\n";
}

void reset_optimizer(Checkpoint& ck, const std::vector<std::string>& nets) {
    for (const std::string& n : nets) ck.opt.erase(n);
}

}  // namespace

AblationMode mode_from_string(const std::string& s) {
    if (s == "SYN") return AblationMode::SYN;
    if (s == "SYN+U") return AblationMode::SYN_U;
    if (s == "R2S+U") return AblationMode::R2S_U;
    if (s == "S2R") return AblationMode::S2R;
    if (s == "FULL") return AblationMode::FULL;
    throw DomainError("unknown ablation mode: " + s);
}

std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::SYN: return "SYN";
        case AblationMode::SYN_U: return "SYN+U";
        case AblationMode::R2S_U: return "R2S+U";
        case AblationMode::S2R: return "S2R";
        case AblationMode::FULL: return "FULL";
    }
    throw DomainError("invalid ablation mode value");
}

void TrainConfig::validate() const {
    if (width < 4) throw DomainError("TrainConfig: width must be >= 4");
    if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
    if (crop < 16) throw DomainError("TrainConfig: crop must be >= 16");
    if (phase1_epochs < 0 || phase2_epochs < 0 || phase3_epochs < 0)
        throw DomainError("TrainConfig: epochs must be >= 0");
    for (double lr : {lr1, lr2, lr3})
        if (!(lr > 0.0)) throw DomainError("TrainConfig: learning rates must be > 0");
    for (double b : {beta1_phase1, beta1_phase23, beta2})
        if (!(b >= 0.0 && b < 1.0)) throw DomainError("TrainConfig: betas must be in [0,1)");
    weights.validate();
    if (!(dcp_omega > 0.0 && dcp_omega <= 1.0))
        throw DomainError("TrainConfig: dcp_omega outside (0,1]");
    if (dcp_patch < 1 || dcp_patch % 2 == 0)
        throw DomainError("TrainConfig: dcp_patch must be odd positive");
    if (!(pseudo_beta > 0.0)) throw DomainError("TrainConfig: pseudo_beta must be > 0");
    if (!(pseudo_airlight > 0.0 && pseudo_airlight <= 1.0))
        throw DomainError("TrainConfig: pseudo_airlight outside (0,1]");
}

TrainConfig TrainConfig::from_config(const Config& c) {
    TrainConfig t;
    t.width = c.get_int("width");
    t.res_blocks = c.get_int("res_blocks");
    t.dehazer_stages = c.get_int("dehazer_stages");
    t.batch_size = c.get_int("batch_size");
    t.crop = c.get_int("crop");
    t.phase1_epochs = c.get_int("phase1_epochs");
    t.phase2_epochs = c.get_int("phase2_epochs");
    t.phase3_epochs = c.get_int("phase3_epochs");
    t.lr1 = c.get_double("lr1");
    t.lr2 = c.get_double("lr2");
    t.lr3 = c.get_double("lr3");
    t.beta1_phase1 = c.get_double("beta1_phase1");
    t.beta1_phase23 = c.get_double("beta1_phase23");
    t.beta2 = c.get_double("beta2");
    t.clip_norm = c.get_double("clip_norm");
    t.weights.lambda_tran = c.get_double("lambda_tran");
    t.weights.lambda_m = c.get_double("lambda_m");
    t.weights.lambda_d = c.get_double("lambda_d");
    t.weights.lambda_t = c.get_double("lambda_t");
    t.weights.lambda_c = c.get_double("lambda_c");
    t.weights.lambda_1 = c.get_double("lambda_cyc");
    t.weights.lambda_2 = c.get_double("lambda_idt");
    t.dcp_omega = c.get_double("dcp_omega");
    t.dcp_patch = c.get_int("dcp_patch");
    t.pseudo_beta = c.get_double("pseudo_beta");
    t.pseudo_airlight = c.get_double("pseudo_airlight");
    t.seed = c.get_u64("seed");
    t.mode = mode_from_string(c.get_str("mode"));
    t.config_hash = c.hash();
    t.validate();
    return t;
}

TrainLogger::TrainLogger(const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    loss_file_.open(out_dir / "loss_log.txt", std::ios::app);
    if (!loss_file_) throw IoError("cannot open loss log in " + out_dir.string());
    timing_file_.open(out_dir / "timing_log.txt", std::ios::app);
    if (!timing_file_) throw IoError("cannot open timing log in " + out_dir.string());
}

void TrainLogger::log_step(std::uint64_t step, int phase, AblationMode mode,
                           const LossReport& report) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "step=%llu phase=%d mode=%s",
                  static_cast<unsigned long long>(step), phase, to_string(mode).c_str());
    std::string line = buf;
    for (const auto& [name, value] : report.parts) {
        std::snprintf(buf, sizeof(buf), " %s=%.17g", name.c_str(), value);
        line += buf;
    }
    std::snprintf(buf, sizeof(buf), " total=%.17g", report.total);
    line += buf;
    lines_.push_back(line);
    if (loss_file_.is_open()) loss_file_ << line << "\n" << std::flush;
}

void TrainLogger::log_timing(std::uint64_t step, double wall_ms) {
    if (!timing_file_.is_open()) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "step=%llu wall_ms=%.3f",
                  static_cast<unsigned long long>(step), wall_ms);
    timing_file_ << buf << "\n" << std::flush;
}

Tensor pseudo_depth_batch(const std::vector<Tensor>& hazy01, const TrainConfig& cfg) {
    const HazeParams ap = HazeParams::uniform(cfg.pseudo_airlight, cfg.pseudo_beta);
    const double d_max = -std::log(kTransmissionFloor) / cfg.pseudo_beta;
    std::vector<Tensor> maps;
    for (const Tensor& img : hazy01) {
        const Tensor trans = estimate_transmission_dcp(img, ap, cfg.dcp_omega, cfg.dcp_patch);
        Tensor d = pseudo_depth(trans, cfg.pseudo_beta);
        for (double& v : d.raw()) v = std::clamp(v / d_max, 0.0, 1.0);
        maps.push_back(std::move(d));
    }
    return stack_hwc(maps);
}

Checkpoint train_translation(const Dataset& data, const TrainConfig& cfg, TrainLogger* log,
                             const StepCallback& on_step, const Checkpoint* resume) {
    Checkpoint state;
    if (resume) {
        warn_on_config_mismatch(*resume, cfg);
        state = *resume;
    }
    if (!resume || state.phase != 1) {
        state.phase = 1;
        state.epoch = 0;
        state.step_in_epoch = 0;
        reset_optimizer(state, {"s2r", "r2s", "d_img_r", "d_img_s", "d_feat_r", "d_feat_s"});
    }
    ensure_nets(state, cfg);
    return run_phase(data, cfg, 1, cfg.phase1_epochs, std::move(state), true, log, on_step,
                     &phase1_step);
}

Checkpoint train_dehazers(const Dataset& data, const Checkpoint& translation,
                          const TrainConfig& cfg, TrainLogger* log, const StepCallback& on_step,
                          const Checkpoint* resume) {
    Checkpoint state;
    if (resume) {
        warn_on_config_mismatch(*resume, cfg);
        state = *resume;
    } else {
        state = translation;
    }
    if (!resume || state.phase != 2) {
        state.phase = 2;
        state.epoch = 0;
        state.step_in_epoch = 0;
        reset_optimizer(state, {"gr", "gs"});
    }
    ensure_nets(state, cfg);
    const bool needs_real = cfg.mode != AblationMode::SYN && cfg.mode != AblationMode::S2R;
    return run_phase(data, cfg, 2, cfg.phase2_epochs, std::move(state), needs_real, log, on_step,
                     &phase2_step);
}

Checkpoint finetune_joint(const Dataset& data, const Checkpoint& prior, const TrainConfig& cfg,
                          TrainLogger* log, const StepCallback& on_step,
                          const Checkpoint* resume) {
    Checkpoint state;
    if (resume) {
        warn_on_config_mismatch(*resume, cfg);
        state = *resume;
    } else {
        state = prior;
    }
    if (!resume || state.phase != 3) {
        state.phase = 3;
        state.epoch = 0;
        state.step_in_epoch = 0;
        reset_optimizer(state,
                        {"s2r", "r2s", "gr", "gs", "d_img_r", "d_img_s", "d_feat_r", "d_feat_s"});
    }
    ensure_nets(state, cfg);
    for (const std::string& net : kAllNets)
        if (!state.nets.count(net))
            throw DomainError("finetune_joint: missing network " + net + " in prior checkpoint");
    return run_phase(data, cfg, 3, cfg.phase3_epochs, std::move(state), true, log, on_step,
                     &phase3_step);
}

std::vector<int> phases_for_mode(AblationMode m) {
    switch (m) {
        case AblationMode::SYN:
        case AblationMode::SYN_U:
            return {2};
        case AblationMode::R2S_U:
        case AblationMode::S2R:
            return {1, 2};
        case AblationMode::FULL:
            return {1, 2, 3};
    }
    throw DomainError("invalid ablation mode value");
}

std::string primary_network(AblationMode m) {
    return (m == AblationMode::S2R) ? "gr" : "gs";
}

Checkpoint run_schedule(const Dataset& data, const TrainConfig& cfg, TrainLogger* log,
                        const StepCallback& on_step, const Checkpoint* resume) {
    const std::vector<int> phases = phases_for_mode(cfg.mode);
    Checkpoint state;
    std::size_t start = 0;
    bool resuming = false;
    if (resume) {
        state = *resume;
        resuming = true;
        for (std::size_t i = 0; i < phases.size(); ++i)
            if (phases[i] == state.phase) start = i;
    }
    for (std::size_t i = start; i < phases.size(); ++i) {
        const Checkpoint* rs = resuming && state.phase == phases[i] ? &state : nullptr;
        Checkpoint prior = state;
        switch (phases[i]) {
            case 1:
                state = train_translation(data, cfg, log, on_step, rs);
                break;
            case 2:
                state = train_dehazers(data, prior, cfg, log, on_step, rs);
                break;
            case 3:
                state = finetune_joint(data, prior, cfg, log, on_step, rs);
                break;
        }
        resuming = false;
    }
    return state;
}

}  // namespace dehaze
