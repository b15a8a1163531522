#pragma once

// Try-on control network: an encoder copy of the denoiser that reads the
// noisy latent together with the packed condition [mask, masked image, pose]
// and emits residuals for the denoiser's skip and mid features through
// zero-initialized 1x1 projections.

#include <map>
#include <string>

#include "garmentgen/autograd.hpp"
#include "garmentgen/backbone.hpp"
#include "garmentgen/unet.hpp"

namespace garmentgen {

enum class PoseKind { none, keypoint_render, dense_coords };

PoseKind parse_pose_kind(const std::string& s);
std::string to_string(PoseKind k);
int pose_channels(PoseKind k);

struct PoseMap {
    Tensor data;  // [pose_channels, H, W]
    PoseKind kind = PoseKind::none;

    static PoseMap none(int height, int width);
    void validate() const;
};

/// Which pixels of the image context survive into the masked image.
/// complement: masked_image = image * (1 - mask); mask = 1 marks the region to generate.
/// direct:     masked_image = image * mask.
enum class MaskConvention { complement, direct };

struct TryOnCondition {
    Tensor mask;          // [1,H,W] in {0,1}
    Tensor masked_image;  // [C,H,W]
    PoseMap pose;

    /// Channel order [mask, masked_image..., pose...].
    Tensor packed() const;
    int channels() const { return 1 + masked_image.dim(0) + pose.data.dim(0); }
};

void require_binary_mask(const Tensor& mask);

TryOnCondition pack_condition(const LatentTensor& image_context, const Tensor& mask, const PoseMap& pose,
                              MaskConvention convention = MaskConvention::complement);

struct ControlNetConfig {
    int image_channels = 3;
    int pose_slots = 2;  // pose channels are zero-padded up to this many
    int codec_factor = 4;

    int condition_channels() const { return 1 + image_channels + pose_slots; }
};

class TryOnControlNet {
public:
    TryOnControlNet(UNetConfig cfg, ControlNetConfig ccfg, std::uint64_t seed, std::string prefix = "control.");
    TryOnControlNet(const TryOnControlNet&) = delete;
    TryOnControlNet& operator=(const TryOnControlNet&) = delete;

    /// Copies the denoiser's down path and mid block. The widened input conv
    /// keeps the latent-channel weights and zeros the condition channels; the
    /// output projections stay zero.
    void init_from(const UNet& denoiser);

    const UNetConfig& config() const { return cfg_; }
    const ControlNetConfig& control_config() const { return ccfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const std::string& prefix() const { return prefix_; }

    /// Packed condition resampled to latent resolution with padded pose slots.
    Tensor condition_input(const TryOnCondition& cond) const;

    ControlResiduals forward(const LatentTensor& x_t, int t, const TextEmbedding& text,
                             const TryOnCondition& cond) const;
    std::map<std::string, Var> forward_var(const Var& x_t, int t, const Var& text, const Tensor& condition) const;

private:
    UNetConfig cfg_;
    ControlNetConfig ccfg_;
    std::string prefix_;
    ParamSet params_;
    UNetBlocks blocks_;
};

}  // namespace garmentgen
