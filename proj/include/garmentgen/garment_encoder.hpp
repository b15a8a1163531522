#pragma once

// Garment encoder: a trainable copy of the denoiser's down path that reads a
// garment latent plus the garment-category prompt and emits one key/value
// pair per self-attention site. The pairs enter the denoiser through
// additive (asa) or sequence-concatenated (csa) self-attention.

#include <map>
#include <string>

#include "garmentgen/autograd.hpp"
#include "garmentgen/backbone.hpp"
#include "garmentgen/unet.hpp"

namespace garmentgen {

/// attention(Qu,Ku,Vu) + scale * attention(Qu,Kg,Vg)
Tensor asa(const Tensor& q_u, const Tensor& k_u, const Tensor& v_u, const Tensor& k_g, const Tensor& v_g,
           int heads = 1, double scale = 1.0);
/// attention(Qu, [Ku;Kg], [Vu;Vg]); an empty Kg reduces to plain attention.
Tensor csa(const Tensor& q_u, const Tensor& k_u, const Tensor& v_u, const Tensor& k_g, const Tensor& v_g,
           int heads = 1);

Var asa_var(const Var& q_u, const Var& k_u, const Var& v_u, const Var& k_g, const Var& v_g, int heads,
            double scale);
Var csa_var(const Var& q_u, const Var& k_u, const Var& v_u, const Var& k_g, const Var& v_g, int heads);

class GarmentEncoder {
public:
    GarmentEncoder(UNetConfig cfg, std::uint64_t seed, std::string prefix = "garment.");
    GarmentEncoder(const GarmentEncoder&) = delete;
    GarmentEncoder& operator=(const GarmentEncoder&) = delete;

    /// Overwrites every parameter with the matching denoiser parameter.
    void init_from(const UNet& denoiser);

    const UNetConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const std::string& prefix() const { return prefix_; }

    /// Key/values from a garment latent. Pure given parameters.
    GarmentKV encode_latent(const LatentTensor& garment_latent, const TextEmbedding& garment_prompt, int t) const;
    /// Key/values from a pixel-space garment image via the codec.
    GarmentKV encode_garment(const LatentTensor& garment_image, const TextEmbedding& garment_prompt, int t,
                             const LatentCodec& codec) const;

    std::map<std::string, SiteKVVar> forward_var(const Var& garment_latent, int t, const Var& text) const;

private:
    UNetConfig cfg_;
    std::string prefix_;
    ParamSet params_;
    UNetBlocks blocks_;
};

}  // namespace garmentgen
