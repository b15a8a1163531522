#pragma once

// Glue between the configuration tree and the library: builds training,
// sampling and request objects from an AppConfig.

#include <string>
#include <vector>

#include "garmentgen/config.hpp"
#include "garmentgen/model_bundle.hpp"
#include "garmentgen/pipelines.hpp"
#include "garmentgen/training.hpp"

namespace garmentgen {

TrainingConfig training_config(const AppConfig& cfg, int stage);
SamplerOptions sampler_options(const AppConfig& cfg);

/// Stage 0 trains on the generic base set; later stages read data.manifest
/// when set and otherwise draw data.dataset_size toy records.
std::vector<DatasetRecord> stage_dataset(const AppConfig& cfg, int stage);

/// Loads io.checkpoint when it exists, otherwise builds a fresh bundle.
ModelBundle load_or_create(const AppConfig& cfg, std::uint64_t seed, bool* loaded = nullptr);

GenerationRequest generation_request(const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed);
TryOnRequest tryon_request(const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed);

/// Pose map of the requested kind taken from a record.
PoseMap record_pose(const DatasetRecord& rec, PoseKind kind);

}  // namespace garmentgen
