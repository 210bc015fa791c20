#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dehaze/params.hpp"

namespace dehaze {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ULL);

enum class Dtype { F32, F64 };

/// Named-array container, little-endian:
///   magic "DHZC0001" | u32 count |
///   per array (name-sorted): u16 name_len, name, u8 dtype (0=f32,1=f64),
///     u8 ndim, u32 dims[ndim], payload |
///   u32 manifest_len, manifest JSON | u64 fnv1a of everything before it.
void write_container(const std::filesystem::path& path,
                     const std::map<std::string, Tensor>& arrays, const nlohmann::json& manifest,
                     Dtype dtype = Dtype::F64);

struct Container {
    std::map<std::string, Tensor> arrays;
    nlohmann::json manifest;
};

/// Throws IntegrityError on truncation or checksum mismatch.
Container read_container(const std::filesystem::path& path);

// ParamSet convenience wrappers over the container format.
void save_params(const std::filesystem::path& path, const ParamSet& params,
                 const nlohmann::json& manifest, Dtype dtype = Dtype::F64);
ParamSet load_params(const std::filesystem::path& path, nlohmann::json* manifest = nullptr);

struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::uint64_t t = 0;
};

/// Full training state: every network's parameters, optimizer state and the
/// position inside the schedule; save -> load -> save is byte-identical.
struct Checkpoint {
    std::map<std::string, ParamSet> nets;
    std::map<std::string, AdamState> opt;
    std::uint64_t step = 0;
    int phase = 0;
    int epoch = 0;
    int step_in_epoch = 0;
    std::string mode = "FULL";
    std::string config_hash;
    nlohmann::json config_snapshot;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dehaze
