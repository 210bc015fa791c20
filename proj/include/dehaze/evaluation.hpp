#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dehaze/checkpoint.hpp"
#include "dehaze/datasets.hpp"
#include "dehaze/training.hpp"

namespace dehaze {

/// 10*log10(1/MSE) on [0,1] images, capped at 100 dB for zero error.
double psnr(const Tensor& pred01, const Tensor& ref01);

/// Mean local SSIM, 11×11 Gaussian window (sigma 1.5), standard stabilizers
/// on unit range, channel-averaged over the valid region.
double ssim(const Tensor& pred01, const Tensor& ref01);

enum class Domain { Real, Synthetic };
Domain domain_from_string(const std::string& s);

/// Dehazes one storage-space image with the domain's network (real -> G_R,
/// synthetic -> G_S); used_network reports which one ran.
Tensor run_inference(const Tensor& hazy01, const Checkpoint& ckpt, Domain domain,
                     std::string* used_network = nullptr);

struct AblationRow {
    std::string mode;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    std::uint64_t steps = 0;
    std::uint64_t seed = 0;
};

void write_ablation_table(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
std::vector<AblationRow> read_ablation_table(const std::filesystem::path& path);

/// Trains every requested mode from the same seed and scores it on the
/// synthetic validation set with the mode's dehazer; the first row is the
/// hazy-input baseline.
std::vector<AblationRow> run_ablation(const Dataset& train_data, const Dataset& val_data,
                                      const std::vector<AblationMode>& modes,
                                      const TrainConfig& cfg, TrainLogger* log = nullptr);

}  // namespace dehaze
