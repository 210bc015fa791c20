#pragma once

#include <fstream>
#include <functional>

#include "dehaze/adam.hpp"
#include "dehaze/checkpoint.hpp"
#include "dehaze/config.hpp"
#include "dehaze/datasets.hpp"
#include "dehaze/losses.hpp"

namespace dehaze {

enum class AblationMode { SYN, SYN_U, R2S_U, S2R, FULL };
AblationMode mode_from_string(const std::string& s);
std::string to_string(AblationMode m);

struct TrainConfig {
    int width = 8;
    int res_blocks = 9;
    int dehazer_stages = 3;
    int batch_size = 2;
    int crop = 64;
    int phase1_epochs = 5;
    int phase2_epochs = 5;
    int phase3_epochs = 3;
    double lr1 = 5e-5;
    double lr2 = 1e-4;
    double lr3 = 1e-4;  // phase-3 networks keep the phase-2 rate
    double beta1_phase1 = 0.5;
    double beta1_phase23 = 0.95;
    double beta2 = 0.999;
    double clip_norm = 10.0;
    LossWeights weights;
    double dcp_omega = 0.95;
    int dcp_patch = 9;
    double pseudo_beta = 1.0;
    double pseudo_airlight = 0.9;
    std::uint64_t seed = 1;
    AblationMode mode = AblationMode::FULL;
    std::string config_hash;

    void validate() const;
    static TrainConfig from_config(const Config& c);
};

/// Per-step record handed to the callback after the parameter update.
struct StepInfo {
    std::uint64_t step = 0;  // cumulative across phases
    int phase = 0;
    std::uint64_t phase_step = 0;  // 1-based within the phase
    AblationMode mode = AblationMode::FULL;
    const LossReport* report = nullptr;
    const Checkpoint* state = nullptr;
};
using StepCallback = std::function<void(const StepInfo&)>;

/// Loss values go to loss_log.txt (deterministic under a fixed seed);
/// wall-clock timings go to the sibling timing_log.txt so the loss log stays
/// bit-comparable across runs.
class TrainLogger {
public:
    TrainLogger() = default;
    explicit TrainLogger(const std::filesystem::path& out_dir);
    void log_step(std::uint64_t step, int phase, AblationMode mode, const LossReport& report);
    void log_timing(std::uint64_t step, double wall_ms);
    const std::vector<std::string>& lines() const { return lines_; }

private:
    std::ofstream loss_file_;
    std::ofstream timing_file_;
    std::vector<std::string> lines_;
};

/// Phase 1: adversarial training of both translators against all four
/// discriminators; dehazers stay frozen inside the feature-level terms.
Checkpoint train_translation(const Dataset& data, const TrainConfig& cfg, TrainLogger* log,
                             const StepCallback& on_step = {},
                             const Checkpoint* resume = nullptr);

/// Phase 2: dehazer training with frozen translators; active terms follow the
/// ablation mode.
Checkpoint train_dehazers(const Dataset& data, const Checkpoint& translation,
                          const TrainConfig& cfg, TrainLogger* log,
                          const StepCallback& on_step = {}, const Checkpoint* resume = nullptr);

/// Phase 3: joint fine-tuning of translators and dehazers on the full
/// objective, discriminators updated first each step.
Checkpoint finetune_joint(const Dataset& data, const Checkpoint& prior, const TrainConfig& cfg,
                          TrainLogger* log, const StepCallback& on_step = {},
                          const Checkpoint* resume = nullptr);

/// Which phases an ablation mode runs (subset of {1,2,3}).
std::vector<int> phases_for_mode(AblationMode m);

/// The dehazing network an ablation mode trains ("gr" or "gs").
std::string primary_network(AblationMode m);

/// Runs the mode's phases in order (optionally resuming) and returns the
/// final state. Also usable for the FULL 3-phase schedule.
Checkpoint run_schedule(const Dataset& data, const TrainConfig& cfg, TrainLogger* log,
                        const StepCallback& on_step = {}, const Checkpoint* resume = nullptr);

/// Depth surrogate for a batch of real crops (storage space, H×W×3 each):
/// transmission from the dark channel prior, inverted and normalized to [0,1].
Tensor pseudo_depth_batch(const std::vector<Tensor>& hazy01, const TrainConfig& cfg);

}  // namespace dehaze
