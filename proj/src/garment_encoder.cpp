#include "garmentgen/garment_encoder.hpp"

namespace garmentgen {

namespace {
void check_dims(const Tensor& q_u, const Tensor& k_u, const Tensor& v_u, const Tensor& k_g, const Tensor& v_g) {
    if (q_u.rank() != 2 || k_u.rank() != 2 || v_u.rank() != 2 || k_g.rank() != 2 || v_g.rank() != 2)
        throw ShapeError("reference attention expects rank-2 operands");
    const int d = q_u.dim(1);
    if (k_u.dim(1) != d || v_u.dim(1) != d || k_g.dim(1) != d || v_g.dim(1) != d)
        throw ShapeError("reference attention: head dimension mismatch");
    if (k_g.dim(0) != v_g.dim(0)) throw ShapeError("reference attention: garment K/V length mismatch");
}
}  // namespace

Var asa_var(const Var& q_u, const Var& k_u, const Var& v_u, const Var& k_g, const Var& v_g, int heads, double scale) {
    auto self = ops::attention(q_u, k_u, v_u, heads);
    auto ref = ops::attention(q_u, k_g, v_g, heads);
    return ops::add(self, scale == 1.0 ? ref : ops::scale(ref, scale));
}

Var csa_var(const Var& q_u, const Var& k_u, const Var& v_u, const Var& k_g, const Var& v_g, int heads) {
    if (k_g->value.dim(0) == 0) return ops::attention(q_u, k_u, v_u, heads);
    return ops::attention(q_u, ops::concat_rows(k_u, k_g), ops::concat_rows(v_u, v_g), heads);
}

Tensor asa(const Tensor& q_u, const Tensor& k_u, const Tensor& v_u, const Tensor& k_g, const Tensor& v_g, int heads,
           double scale) {
    check_dims(q_u, k_u, v_u, k_g, v_g);
    NoGradGuard guard;
    return asa_var(constant(q_u), constant(k_u), constant(v_u), constant(k_g), constant(v_g), heads, scale)->value;
}

Tensor csa(const Tensor& q_u, const Tensor& k_u, const Tensor& v_u, const Tensor& k_g, const Tensor& v_g, int heads) {
    check_dims(q_u, k_u, v_u, k_g, v_g);
    NoGradGuard guard;
    return csa_var(constant(q_u), constant(k_u), constant(v_u), constant(k_g), constant(v_g), heads)->value;
}

GarmentEncoder::GarmentEncoder(UNetConfig cfg, std::uint64_t seed, std::string prefix)
    : cfg_(std::move(cfg)), prefix_(std::move(prefix)), blocks_(cfg_, params_, prefix_) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    blocks_.add_time_mlp(rng);
    blocks_.add_conv("conv_in", cfg_.latent_channels, cfg_.channels_at(0), 3, rng);
    int ch = cfg_.channels_at(0);
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string n = "down" + std::to_string(l);
        blocks_.add_res_block(n + ".res", ch, cfg_.channels_at(l), rng);
        ch = cfg_.channels_at(l);
        // Past the last tap nothing influences the emitted key/values.
        blocks_.add_attn_block(n + ".attn", ch, rng, /*kv_only=*/l == cfg_.depth - 1);
    }
}

void GarmentEncoder::init_from(const UNet& denoiser) {
    const std::size_t copied = params_.copy_values_from(denoiser.params(), denoiser.prefix(), prefix_);
    if (copied != params_.items().size())
        throw ParameterError("garment encoder init: denoiser is missing " +
                             std::to_string(params_.items().size() - copied) + " parameters");
}

std::map<std::string, SiteKVVar> GarmentEncoder::forward_var(const Var& garment_latent, int t, const Var& text) const {
    const auto& zs = garment_latent->value.shape();
    if (zs.size() != 3 || zs[0] != cfg_.latent_channels || zs[1] % cfg_.spatial_divisor() ||
        zs[2] % cfg_.spatial_divisor())
        throw ShapeError("garment latent shape " + shape_str(zs) + " incompatible with config");
    std::map<std::string, SiteKVVar> out;
    auto temb = blocks_.time_embedding(t);
    auto h = blocks_.conv("conv_in", garment_latent);
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string n = "down" + std::to_string(l);
        h = blocks_.res_block(n + ".res", h, temb);
        out[n] = blocks_.tap_kv(n + ".attn", h);
        if (l == cfg_.depth - 1) break;
        h = ops::avg_pool2(blocks_.attn_block(n + ".attn", h, text, {}));
    }
    return out;
}

GarmentKV GarmentEncoder::encode_latent(const LatentTensor& garment_latent, const TextEmbedding& garment_prompt,
                                        int t) const {
    if (garment_latent.space() != Space::latent) throw ShapeError("garment encoder expects a latent");
    NoGradGuard guard;
    auto vars = forward_var(constant(garment_latent.data()), t, constant(garment_prompt.vectors));
    GarmentKV kv;
    kv.timestep_used = t;
    for (auto& [site, p] : vars) kv.sites[site] = {std::move(p.k->value), std::move(p.v->value)};
    return kv;
}

GarmentKV GarmentEncoder::encode_garment(const LatentTensor& garment_image, const TextEmbedding& garment_prompt, int t,
                                         const LatentCodec& codec) const {
    return encode_latent(codec.encode(garment_image), garment_prompt, t);
}

}  // namespace garmentgen
