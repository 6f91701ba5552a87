#pragma once

#include "nde/archive.hpp"
#include "nde/config.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <random>
#include <string>

namespace nde {

inline constexpr const char* kScopeDecomposition = "decomposition";
inline constexpr const char* kScopeEnhancement = "enhancement";
inline constexpr const char* kScopeDehaze = "dehaze";
inline constexpr const char* kScopeFeatures = "features";

inline constexpr const char* kStageDecomposition = "decom";
inline constexpr const char* kStageFull = "full";

/// Writes every parameter and buffer of `module` as `<scope>/<name>`.
void store_module(Archive& ar, const std::string& scope, torch::nn::Module& module);

/// Copies `<scope>/<name>` arrays into the module's parameters and buffers.
/// Throws CheckpointError if the scope is missing, an entry is absent or a
/// shape differs. With `strict` false, entries missing from the archive are
/// left untouched (used for partial pretrained loads).
void load_module(const Archive& ar, const std::string& scope, torch::nn::Module& module, bool strict = true);

/// Order-independent FNV-1a digest over the names and raw bytes of every
/// parameter and buffer of `module`.
std::string module_digest(torch::nn::Module& module);

void store_optimizer(Archive& ar, torch::optim::Optimizer& opt);
void load_optimizer(const Archive& ar, torch::optim::Optimizer& opt);

void store_rng(Archive& ar, const std::mt19937_64& rng);
void load_rng(const Archive& ar, std::mt19937_64& rng);

/// Metadata common to every checkpoint.
struct CheckpointInfo {
    std::string stage;  // kStageDecomposition or kStageFull
    int step = 0;
    int epoch = 0;
    TrainConfig config;
};

void write_info(Archive& ar, const CheckpointInfo& info);
CheckpointInfo read_info(const Archive& ar);

}  // namespace nde
