#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "dehaze/evaluation.hpp"
#include "dehaze/image_io.hpp"

namespace fs = std::filesystem;
using namespace dehaze;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool out_required = true) {
    cmd->add_option("--config", o.config_path, "flat key=value config file");
    auto* out = cmd->add_option("--out-dir", o.out_dir, "run directory");
    if (out_required) out->required();
    cmd->add_option("--seed", o.seed, "overrides the config seed");
}

Config resolve_config(const CommonOpts& o, bool seed_is_data_seed = false) {
    Config c = o.config_path.empty() ? Config::defaults() : Config::from_file(o.config_path);
    if (o.seed) {
        c.set(seed_is_data_seed ? "data_seed" : "seed", std::to_string(*o.seed));
    }
    return c;
}

void echo_config(const Config& c, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    c.write(out_dir / "config.resolved.txt");
}

DatasetManifest manifest_from_config(const Config& c) {
    return make_desk_manifest(c.get_int("size"), c.get_int("size"), c.get_int("syn_count"),
                              c.get_int("real_count"), c.get_u64("data_seed"));
}

int cmd_synth(const CommonOpts& o, const std::string& manifest_in) {
    const Config c = resolve_config(o, true);
    DatasetManifest m =
        manifest_in.empty() ? manifest_from_config(c) : read_manifest(manifest_in);
    write_dataset(o.out_dir, m);
    echo_config(c, o.out_dir);
    std::cout << "wrote " << m.synthetic.size() << " synthetic triplets and " << m.real.size()
              << " real images to " << o.out_dir << "\n";
    return 0;
}

std::vector<int> parse_phases(const std::string& s) {
    std::vector<int> phases;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok != "1" && tok != "2" && tok != "3")
            throw DomainError("--phases accepts a comma list of 1,2,3");
        phases.push_back(tok[0] - '0');
    }
    return phases;
}

int cmd_train(const CommonOpts& o, const std::string& data_root, const std::string& resume_path,
              const std::string& phases_arg) {
    const Config c = resolve_config(o);
    const TrainConfig cfg = TrainConfig::from_config(c);
    const Dataset data = load_dataset(data_root);

    std::vector<int> phases = phases_for_mode(cfg.mode);
    if (!phases_arg.empty()) {
        const std::vector<int> requested = parse_phases(phases_arg);
        for (int p : requested)
            if (std::find(phases.begin(), phases.end(), p) == phases.end())
                throw DomainError("phase " + std::to_string(p) + " is not part of mode " +
                                  to_string(cfg.mode));
        phases = requested;
    }

    echo_config(c, o.out_dir);
    TrainLogger logger(o.out_dir);

    Checkpoint state;
    bool resuming = false;
    if (!resume_path.empty()) {
        state = load_checkpoint(resume_path);
        resuming = true;
        // Drop phases that already completed.
        while (!phases.empty() && phases.front() < state.phase) phases.erase(phases.begin());
    }
    for (int p : phases) {
        const Checkpoint* rs = resuming && state.phase == p ? &state : nullptr;
        Checkpoint prior = state;
        switch (p) {
            case 1: state = train_translation(data, cfg, &logger, {}, rs); break;
            case 2: state = train_dehazers(data, prior, cfg, &logger, {}, rs); break;
            case 3: state = finetune_joint(data, prior, cfg, &logger, {}, rs); break;
        }
        resuming = false;
        save_checkpoint(state, fs::path(o.out_dir) / ("phase" + std::to_string(p) + ".ckpt"));
    }
    save_checkpoint(state, fs::path(o.out_dir) / "final.ckpt");
    std::cout << "trained " << state.step << " steps; checkpoints in " << o.out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& data_root, const std::string& ckpt_path,
             const std::string& pred_dir) {
    const Config c = resolve_config(o);
    const Dataset data = load_dataset(data_root);
    if (data.syn.empty()) throw DomainError("eval needs synthetic samples with ground truth");
    echo_config(c, o.out_dir);

    Checkpoint ck;
    if (!ckpt_path.empty()) ck = load_checkpoint(ckpt_path);
    if (ckpt_path.empty() && pred_dir.empty())
        throw DomainError("eval needs --ckpt or --pred-dir");

    AblationRow row;
    row.mode = pred_dir.empty() ? "EVAL" : "PRED";
    row.steps = ck.step;
    row.seed = c.get_u64("seed");
    AblationRow baseline;
    baseline.mode = "BASELINE-HAZY";
    baseline.seed = row.seed;
    for (const SyntheticSample& s : data.syn) {
        Tensor pred;
        if (!pred_dir.empty())
            pred = read_image_rgb8(fs::path(pred_dir) / (s.stem + ".png"));
        else
            pred = run_inference(s.hazy, ck, Domain::Synthetic);
        row.psnr_mean += psnr(pred, s.clear);
        row.ssim_mean += ssim(pred, s.clear);
        baseline.psnr_mean += psnr(s.hazy, s.clear);
        baseline.ssim_mean += ssim(s.hazy, s.clear);
    }
    const double n = static_cast<double>(data.syn.size());
    row.psnr_mean /= n;
    row.ssim_mean /= n;
    baseline.psnr_mean /= n;
    baseline.ssim_mean /= n;

    const fs::path table = fs::path(o.out_dir) / "eval.csv";
    write_ablation_table(table, {baseline, row});
    std::cout << "baseline " << baseline.psnr_mean << " dB / " << baseline.ssim_mean << "\n"
              << row.mode << " " << row.psnr_mean << " dB / " << row.ssim_mean << "\n"
              << "table: " << table.string() << "\n";
    return 0;
}

int cmd_dehaze(const std::string& input, const std::string& output, const std::string& ckpt_path,
               const std::string& domain_arg) {
    const Tensor hazy = read_image_rgb8(input);
    const Checkpoint ck = load_checkpoint(ckpt_path);
    std::string used;
    const Tensor pred = run_inference(hazy, ck, domain_from_string(domain_arg), &used);
    write_image_rgb8(output, pred);
    std::cout << "dehazed " << input << " with network " << used << " -> " << output << "\n";
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& data_root, const std::string& val_root,
               const std::string& modes_arg) {
    const Config c = resolve_config(o);
    const TrainConfig cfg = TrainConfig::from_config(c);
    const Dataset train_data = load_dataset(data_root);
    const Dataset val_data = load_dataset(val_root);
    echo_config(c, o.out_dir);

    std::vector<AblationMode> modes;
    std::stringstream ss(modes_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) modes.push_back(mode_from_string(tok));
    if (modes.empty()) throw DomainError("--modes is empty");

    TrainLogger logger(o.out_dir);
    const auto rows = run_ablation(train_data, val_data, modes, cfg, &logger);
    const fs::path table = fs::path(o.out_dir) / "ablation.csv";
    write_ablation_table(table, rows);
    for (const AblationRow& r : rows)
        std::cout << r.mode << ": " << r.psnr_mean << " dB / " << r.ssim_mean << " (" << r.steps
                  << " steps)\n";
    std::cout << "table: " << table.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depth-guided domain-adaptation image dehazing"};
    app.require_subcommand(1);

    CommonOpts synth_o;
    std::string synth_manifest;
    auto* synth = app.add_subcommand("synth", "generate a procedural dataset");
    add_common(synth, synth_o);
    synth->add_option("--manifest", synth_manifest, "regenerate from an existing manifest");

    CommonOpts train_o;
    std::string train_data, train_resume, train_phases;
    auto* train = app.add_subcommand("train", "run the training schedule");
    add_common(train, train_o);
    train->add_option("--data", train_data, "dataset root")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_option("--phases", train_phases, "comma list of phases to run (default: mode's)");

    CommonOpts eval_o;
    std::string eval_data, eval_ckpt, eval_pred;
    auto* eval = app.add_subcommand("eval", "PSNR/SSIM over a dataset");
    add_common(eval, eval_o);
    eval->add_option("--data", eval_data, "dataset root with ground truth")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint file");
    eval->add_option("--pred-dir", eval_pred, "directory of predicted images (instead of a ckpt)");

    std::string dh_in, dh_out, dh_ckpt, dh_domain = "real";
    auto* dh = app.add_subcommand("dehaze", "dehaze one image");
    dh->add_option("--input", dh_in)->required();
    dh->add_option("--output", dh_out)->required();
    dh->add_option("--ckpt", dh_ckpt)->required();
    dh->add_option("--domain", dh_domain, "real|synthetic (default real)");

    CommonOpts abl_o;
    std::string abl_data, abl_val, abl_modes = "SYN,SYN+U,R2S+U,S2R,FULL";
    auto* abl = app.add_subcommand("ablate", "train and score ablation modes");
    add_common(abl, abl_o);
    abl->add_option("--data", abl_data, "training dataset root")->required();
    abl->add_option("--val", abl_val, "validation dataset root")->required();
    abl->add_option("--modes", abl_modes, "comma list of modes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_o, synth_manifest);
        if (train->parsed()) return cmd_train(train_o, train_data, train_resume, train_phases);
        if (eval->parsed()) return cmd_eval(eval_o, eval_data, eval_ckpt, eval_pred);
        if (dh->parsed()) return cmd_dehaze(dh_in, dh_out, dh_ckpt, dh_domain);
        if (abl->parsed()) return cmd_ablate(abl_o, abl_data, abl_val, abl_modes);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
