#include "garmentgen/app.hpp"

#include <algorithm>
#include <filesystem>

#include "garmentgen/data_engine.hpp"

namespace garmentgen {

TrainingConfig training_config(const AppConfig& cfg, int stage) {
    TrainingConfig t;
    t.stage = stage;
    t.optimizer.kind = cfg.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    t.optimizer.learning_rate = cfg.learning_rate;
    t.batch_size = cfg.batch_size;
    t.max_steps = cfg.max_steps;
    if (cfg.augmentations.empty()) {
        t.augmentations = stage_augmentations(stage);
    } else {
        for (const auto& a : cfg.augmentations)
            if (a != "none") t.augmentations.insert(parse_augmentation(a));
    }
    t.seed = cfg.seed;
    t.text_dropout = cfg.text_dropout;
    t.attention_mode = parse_attention_mode(cfg.attention_mode);
    t.cached_garment_t = cfg.cache_garment_kv;
    return t;
}

SamplerOptions sampler_options(const AppConfig& cfg) {
    SamplerOptions o;
    o.drop_garment_in_uncond = cfg.drop_garment_in_uncond;
    o.cache_garment_kv = cfg.cache_garment_kv;
    o.pixel_composite = cfg.pixel_composite;
    o.mask_convention = cfg.mask_convention == "direct" ? MaskConvention::direct : MaskConvention::complement;
    o.clip_x0 = cfg.clip_x0;
    return o;
}

std::vector<DatasetRecord> stage_dataset(const AppConfig& cfg, int stage) {
    if (stage == 0) {
        std::mt19937_64 rng(cfg.base_seed);
        return make_toy_dataset(cfg.base_dataset_size, rng, cfg.image_size, cfg.codec_factor);
    }
    if (cfg.manifest.empty()) {
        std::mt19937_64 rng(cfg.seed);
        return make_toy_dataset(cfg.dataset_size, rng, cfg.image_size, cfg.codec_factor);
    }
    std::vector<DatasetRecord> out;
    for (const auto& r : load_manifest(cfg.manifest)) out.push_back(downsample_record(r, cfg.image_size));
    if (out.empty()) throw ConfigError("manifest '" + cfg.manifest + "' holds no records");
    return out;
}

ModelBundle load_or_create(const AppConfig& cfg, std::uint64_t seed, bool* loaded) {
    const bool exists = !cfg.checkpoint.empty() && std::filesystem::exists(cfg.checkpoint);
    if (loaded) *loaded = exists;
    return exists ? load_checkpoint(cfg.checkpoint) : ModelBundle::create(cfg, seed);
}

GenerationRequest generation_request(const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed) {
    GenerationRequest r;
    r.garment_image = rec.garment_image;
    std::tie(r.garment_prompt, r.target_prompt) = dispatch_prompts(rec);
    r.seed = seed;
    r.steps = cfg.sampler_steps;
    r.guidance_scale = cfg.guidance_scale;
    r.attention_mode = parse_attention_mode(cfg.attention_mode);
    r.height = rec.person_image.height();
    r.width = rec.person_image.width();
    return r;
}

PoseMap record_pose(const DatasetRecord& rec, PoseKind kind) {
    switch (kind) {
        case PoseKind::none: return PoseMap::none(rec.person_image.height(), rec.person_image.width());
        case PoseKind::keypoint_render:
            if (rec.keypoint_map.data.empty()) throw ConfigError("record '" + rec.id + "' has no keypoint map");
            return rec.keypoint_map;
        case PoseKind::dense_coords: return rec.dense_map;
    }
    return rec.dense_map;
}

TryOnRequest tryon_request(const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed) {
    TryOnRequest r;
    static_cast<GenerationRequest&>(r) = generation_request(cfg, rec, seed);
    r.source_image = rec.person_image;
    r.mask = rec.agnostic_mask;
    r.pose = record_pose(rec, parse_pose_kind(cfg.pose_kind));
    return r;
}

}  // namespace garmentgen
