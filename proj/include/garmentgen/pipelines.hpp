#pragma once

// Inference: garment-centric text-to-image and inpainting try-on, both
// driven by a deterministic DDIM loop with classifier-free guidance and
// garment key/value injection at every step.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "garmentgen/backbone.hpp"
#include "garmentgen/controlnet.hpp"
#include "garmentgen/garment_encoder.hpp"
#include "garmentgen/unet.hpp"

namespace garmentgen {

enum class TaskKind { gc_t2i, stylized_gc_t2i, controllable_gc_t2i, virtual_tryon };
enum class PipelineKind { text2image, inpainting };
enum class ControlNetChoice { none, any, tryon };

struct TaskConfig {
    TaskKind task;
    PipelineKind pipeline;
    bool use_garment_encoder;
    std::string base_model_id;
    ControlNetChoice controlnet;

    friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

std::string to_string(TaskKind t);
std::string to_string(PipelineKind p);
std::string to_string(ControlNetChoice c);

/// Accepts the display names ("GC t2i", "virtual try-on", ...) and the
/// snake_case identifiers. Throws ConfigError otherwise.
TaskConfig resolve_task(const std::string& name);
const std::vector<TaskConfig>& task_registry();

/// eps_u + s * (eps_c - eps_u)
Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double s);
/// m * z_gen + (1 - m) * z_src, with m broadcast over channels when it has one.
Tensor blend_latents(const Tensor& z_gen, const Tensor& z_src_noised, const Tensor& m_latent);
/// Area-average to latent resolution, then threshold at 0.5.
Tensor downsample_mask(const Tensor& mask, int factor);

/// Non-owning view of the loaded models.
struct ModelRefs {
    const UNet* unet = nullptr;
    const GarmentEncoder* encoder = nullptr;
    const TryOnControlNet* controlnet = nullptr;
    const TextEmbedder* text = nullptr;
    const LatentCodec* codec = nullptr;
    const NoiseSchedule* schedule = nullptr;
};

struct SamplerOptions {
    /// Unconditional pass also drops the garment injection.
    bool drop_garment_in_uncond = false;
    /// Encode the garment once at t = 0 instead of at every step's t.
    bool cache_garment_kv = false;
    /// Paste the source codec round-trip back outside the pixel mask.
    bool pixel_composite = true;
    /// Only changes how the masked image is built; mask = 1 is always the
    /// generated region.
    MaskConvention mask_convention = MaskConvention::complement;
    /// Clamp the predicted clean latent to [-clip, clip] before each update
    /// (0 disables). The toy codec's latents are block means of [-1,1] pixels.
    double clip_x0 = 1.0;
    /// Diagnostic hook applied to freshly encoded garment key/values.
    std::function<void(GarmentKV&)> garment_kv_hook;
};

struct GenerationRequest {
    LatentTensor garment_image;  // pixel space
    std::string garment_prompt;
    std::string target_prompt;
    std::uint64_t seed = 0;
    int steps = 25;
    double guidance_scale = 3.0;
    AttentionMode attention_mode = AttentionMode::asa;
    int height = 32;  // output size in pixels
    int width = 32;
    /// Replaces the seeded initial latent when set.
    std::optional<Tensor> initial_noise;

    void validate() const;
};

struct TryOnRequest : GenerationRequest {
    LatentTensor source_image;  // pixel space
    Tensor mask;                // [1,H,W], 1 marks the region to generate
    PoseMap pose;
};

/// Noise prediction consistent with x0_hat clamped to [-clip, clip].
Tensor clip_eps(const Tensor& x_t, const Tensor& eps, int t, const NoiseSchedule& s, double clip);

/// Initial latent for a seed; the only thing the seed influences.
Tensor initial_latent(std::uint64_t seed, const Shape& shape);

LatentTensor generate_gc_t2i(const ModelRefs& models, const GenerationRequest& req, const SamplerOptions& opts = {});

struct TryOnTrace {
    Tensor final_latent;
    Tensor source_latent;
    Tensor mask_latent;
};

LatentTensor tryon(const ModelRefs& models, const TryOnRequest& req, const SamplerOptions& opts = {},
                   TryOnTrace* trace = nullptr);

}  // namespace garmentgen
