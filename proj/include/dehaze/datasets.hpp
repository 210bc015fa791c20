#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dehaze/haze_physics.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

struct SyntheticSample {
    Tensor hazy;   // H×W×3 in [0,1]
    Tensor clear;  // H×W×3 in [0,1]
    Tensor depth;  // H×W×1 in [0,1]
    std::optional<HazeParams> params;
    std::string stem;
};

struct RealSample {
    Tensor hazy;  // H×W×3 in [0,1]
    std::string stem;
};

/// Seed plus haze parameters fully determine one procedural sample.
struct SampleSpec {
    std::uint64_t seed = 0;
    HazeParams params;
};

/// Everything needed to regenerate a procedural dataset bit-exactly.
struct DatasetManifest {
    int height = 64;
    int width = 64;
    std::vector<SampleSpec> synthetic;
    std::vector<SampleSpec> real;
};

struct Dataset {
    int height = 0;
    int width = 0;
    std::vector<SyntheticSample> syn;
    std::vector<RealSample> real;
};

/// Deterministic procedural scene: colored geometric regions with mild
/// texture over a gradient background, piecewise-smooth depth in [0,1].
void generate_scene(std::uint64_t seed, int height, int width, Tensor& clear, Tensor& depth);

SyntheticSample make_synthetic_pair(const Tensor& clear, const Tensor& depth,
                                    const HazeParams& params);

/// Real-domain sample: separate scene distribution parameters, per-channel
/// color gain and sensor noise on top of the haze model. The ground truth is
/// kept for validation diagnostics only; it never ships in the dataset layout.
struct RealGenerated {
    Tensor hazy;
    Tensor ground_truth;
};
RealGenerated generate_real_sample(const SampleSpec& spec, int height, int width);

/// Desk-scale manifest with domain-specific haze distributions.
DatasetManifest make_desk_manifest(int height, int width, int syn_count, int real_count,
                                   std::uint64_t data_seed);

Dataset dataset_from_manifest(const DatasetManifest& manifest,
                              std::vector<Tensor>* real_ground_truth = nullptr);

/// Writes root/syn/{hazy,clear,depth}, root/real/hazy and root/manifest.json.
void write_dataset(const std::filesystem::path& root, const DatasetManifest& manifest);

/// Reads the documented directory layout; attaches haze parameters from
/// manifest.json when present and verifies the hazing identity within 2/255.
Dataset load_dataset(const std::filesystem::path& root);

DatasetManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);

/// Max abs residual of hazy vs re-synthesized hazy; requires params.
double eq1_residual(const SyntheticSample& sample);

// --- cropping / normalization / batching ---

struct CropWindow {
    int oy = 0, ox = 0, h = 0, w = 0;
};

/// Window offsets are a pure function of the seed.
CropWindow pick_crop(int image_h, int image_w, int crop_h, int crop_w, std::uint64_t seed);
Tensor apply_crop(const Tensor& hwc, const CropWindow& win);

struct TrainSample {
    Tensor hazy_net;   // H×W×3 in [-1,1]
    Tensor clear_net;  // H×W×3 in [-1,1] (empty for real samples)
    Tensor depth;      // H×W×1 in [0,1]  (empty for real samples)
};

TrainSample crop_and_normalize(const SyntheticSample& s, int crop_h, int crop_w,
                               std::uint64_t seed);
TrainSample crop_and_normalize(const RealSample& s, int crop_h, int crop_w, std::uint64_t seed);

/// Shuffled index batches for one epoch; partial tail batches are dropped.
std::vector<std::vector<int>> epoch_batches(int count, int batch_size, std::uint64_t seed);

}  // namespace dehaze
