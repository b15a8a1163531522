#pragma once

// Key-value configuration tree (YAML) with dotted-path overrides.

#include <cstdint>
#include <string>
#include <vector>

#include "garmentgen/controlnet.hpp"
#include "garmentgen/unet.hpp"

namespace garmentgen {

struct AppConfig {
    UNetConfig model;
    ControlNetConfig control;
    int text_seed = 7;

    int schedule_T = 100;
    double beta_start = 1e-2;
    double beta_end = 0.1;

    int sampler_steps = 25;
    double guidance_scale = 3.0;
    bool drop_garment_in_uncond = false;
    bool cache_garment_kv = false;
    double clip_x0 = 1.0;

    int image_size = 32;
    int codec_factor = 4;

    int stage = 1;
    double learning_rate = 2e-3;
    std::string optimizer = "adam";
    int batch_size = 4;
    int max_steps = 2000;
    double text_dropout = 0.1;
    std::vector<std::string> augmentations;  // empty means the stage default
    std::uint64_t seed = 0;
    int dataset_size = 8;
    int base_dataset_size = 48;
    std::uint64_t base_seed = 1000;

    std::string attention_mode = "asa";
    std::string pose_kind = "dense_coords";
    bool pixel_composite = true;
    std::string mask_convention = "complement";
    int agnostic_radius = 3;
    std::string manifest;  // training records; empty means the toy generator
    std::string rank_weighting = "linear";

    std::string checkpoint = "checkpoint.sgck";
    std::string out_dir = "out";

    /// Dotted keys understood by `apply_override` and written by `to_yaml`.
    static const std::vector<std::string>& keys();
};

AppConfig default_config();
AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
AppConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides = {});
/// `key=value`; a bare key (no dot) must match exactly one dotted key suffix.
void apply_override(AppConfig& cfg, const std::string& assignment);
std::string to_yaml(const AppConfig& cfg);
void validate(const AppConfig& cfg);

}  // namespace garmentgen
