#pragma once

// Owning container for every model piece plus the single-archive checkpoint.
//
// Archive layout (little-endian):
//   8 bytes   magic "SGCKPT01"
//   u64       manifest length in bytes
//   manifest  JSON: model name, UNet config, schedule, control config, text
//             embedder, codec, completed stage, and per-parameter
//             {name, shape, offset, count} with offsets in floats
//   blobs     float32 values, concatenated in manifest order

#include <memory>
#include <string>

#include "garmentgen/config.hpp"
#include "garmentgen/controlnet.hpp"
#include "garmentgen/garment_encoder.hpp"
#include "garmentgen/pipelines.hpp"
#include "garmentgen/unet.hpp"

namespace garmentgen {

inline constexpr const char* kModelName = "garmentgen-mini";

struct ModelBundle {
    UNetConfig cfg;
    ControlNetConfig control_cfg;
    NoiseSchedule schedule;
    std::uint64_t text_seed = 7;
    std::unique_ptr<UNet> unet;
    std::unique_ptr<GarmentEncoder> encoder;
    std::unique_ptr<TryOnControlNet> controlnet;
    std::unique_ptr<TextEmbedder> text;
    std::unique_ptr<LatentCodec> codec;
    /// Last completed training stage: -1 untrained, 0 base, 1 encoder, 2 controlnet.
    int stage = -1;

    /// Fresh bundle with seeded random parameters for every network.
    static ModelBundle create(const AppConfig& config, std::uint64_t seed);

    ModelRefs refs() const;
    /// Combined checksum of one network's parameters ("unet", "garment", "control").
    std::uint64_t checksum(const std::string& which) const;
    ParamSet& params(const std::string& which);
};

void save_checkpoint(const std::string& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace garmentgen
