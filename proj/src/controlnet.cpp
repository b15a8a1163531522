#include "garmentgen/controlnet.hpp"

namespace garmentgen {

PoseKind parse_pose_kind(const std::string& s) {
    if (s == "none") return PoseKind::none;
    if (s == "keypoint_render" || s == "keypoint" || s == "openpose") return PoseKind::keypoint_render;
    if (s == "dense_coords" || s == "dense" || s == "densepose") return PoseKind::dense_coords;
    throw ConfigError("unknown pose kind '" + s + "'");
}

std::string to_string(PoseKind k) {
    switch (k) {
        case PoseKind::none: return "none";
        case PoseKind::keypoint_render: return "keypoint_render";
        case PoseKind::dense_coords: return "dense_coords";
    }
    return "none";
}

int pose_channels(PoseKind k) {
    switch (k) {
        case PoseKind::none: return 0;
        case PoseKind::keypoint_render: return 1;
        case PoseKind::dense_coords: return 2;
    }
    return 0;
}

PoseMap PoseMap::none(int height, int width) { return {Tensor({0, height, width}), PoseKind::none}; }

void PoseMap::validate() const {
    if (data.rank() != 3 || data.dim(0) != pose_channels(kind))
        throw ShapeError("pose map of kind " + to_string(kind) + " has shape " + shape_str(data.shape()));
    if (kind == PoseKind::dense_coords)
        for (double v : data.data())
            if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("dense pose values must lie in [0,1]");
}

void require_binary_mask(const Tensor& mask) {
    if (mask.rank() != 3 || mask.dim(0) != 1) throw ShapeError("mask must be [1,H,W], got " + shape_str(mask.shape()));
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0) throw ShapeError("mask must be binary");
}

Tensor TryOnCondition::packed() const {
    const int h = mask.dim(1), w = mask.dim(2);
    Tensor out({channels(), h, w});
    std::size_t off = 0;
    for (const Tensor* part : {&mask, &masked_image, &pose.data}) {
        std::copy(part->data().begin(), part->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
        off += part->size();
    }
    return out;
}

TryOnCondition pack_condition(const LatentTensor& image_context, const Tensor& mask, const PoseMap& pose,
                              MaskConvention convention) {
    if (image_context.space() != Space::pixel) throw ShapeError("pack_condition expects a pixel-space image");
    require_binary_mask(mask);
    pose.validate();
    const int h = image_context.height(), w = image_context.width();
    if (mask.dim(1) != h || mask.dim(2) != w || pose.data.dim(1) != h || pose.data.dim(2) != w)
        throw ShapeError("pack_condition: spatial dims differ across image, mask and pose");
    TryOnCondition cond{mask, image_context.data(), pose};
    for (int c = 0; c < image_context.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double m = mask.at(0, y, x);
                cond.masked_image.at(c, y, x) *= convention == MaskConvention::complement ? 1.0 - m : m;
            }
    return cond;
}

// ---------------------------------------------------------------------------

TryOnControlNet::TryOnControlNet(UNetConfig cfg, ControlNetConfig ccfg, std::uint64_t seed, std::string prefix)
    : cfg_(std::move(cfg)), ccfg_(ccfg), prefix_(std::move(prefix)), blocks_(cfg_, params_, prefix_) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    blocks_.add_time_mlp(rng);
    blocks_.add_conv("conv_in", cfg_.latent_channels + ccfg_.condition_channels(), cfg_.channels_at(0), 3, rng);
    int ch = cfg_.channels_at(0);
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string n = "down" + std::to_string(l);
        blocks_.add_res_block(n + ".res", ch, cfg_.channels_at(l), rng);
        ch = cfg_.channels_at(l);
        blocks_.add_attn_block(n + ".attn", ch, rng);
        blocks_.add_conv("zero.skip" + std::to_string(l), ch, ch, 1, rng, /*zero=*/true);
    }
    blocks_.add_res_block("mid.res", ch, ch, rng);
    blocks_.add_conv("zero.mid", ch, ch, 1, rng, /*zero=*/true);
}

void TryOnControlNet::init_from(const UNet& denoiser) {
    params_.copy_values_from(denoiser.params(), denoiser.prefix(), prefix_);
    const Tensor& src = denoiser.params().get(denoiser.prefix() + "conv_in.w").value;
    Tensor& dst = params_.get(prefix_ + "conv_in.w").value;
    const int cout = dst.dim(0), cin = dst.dim(1), lat = src.dim(1), kk = dst.dim(2) * dst.dim(3);
    dst.fill(0.0);
    for (int o = 0; o < cout; ++o)
        for (int i = 0; i < lat; ++i)
            for (int k = 0; k < kk; ++k)
                dst[(static_cast<std::size_t>(o) * cin + i) * kk + k] = src[(static_cast<std::size_t>(o) * lat + i) * kk + k];
    params_.get(prefix_ + "conv_in.b").value = denoiser.params().get(denoiser.prefix() + "conv_in.b").value;
    for (auto& [name, p] : params_.items())
        if (name.rfind(prefix_ + "zero.", 0) == 0) p.value.fill(0.0);
}

Tensor TryOnControlNet::condition_input(const TryOnCondition& cond) const {
    require_binary_mask(cond.mask);
    cond.pose.validate();
    if (cond.masked_image.dim(0) != ccfg_.image_channels) throw ShapeError("condition image channel mismatch");
    if (cond.pose.data.dim(0) > ccfg_.pose_slots) throw ShapeError("pose has more channels than the network accepts");
    Tensor packed = cond.packed();
    const int h = packed.dim(1), w = packed.dim(2);
    Tensor padded({ccfg_.condition_channels(), h, w});
    std::copy(packed.data().begin(), packed.data().end(), padded.data().begin());
    return block_average(padded, ccfg_.codec_factor);
}

std::map<std::string, Var> TryOnControlNet::forward_var(const Var& x_t, int t, const Var& text,
                                                        const Tensor& condition) const {
    const auto& xs = x_t->value.shape();
    if (xs.size() != 3 || condition.rank() != 3 || condition.dim(1) != xs[1] || condition.dim(2) != xs[2] ||
        condition.dim(0) != ccfg_.condition_channels())
        throw ShapeError("controlnet: condition " + shape_str(condition.shape()) + " does not match latent " +
                         shape_str(xs));
    std::map<std::string, Var> out;
    auto temb = blocks_.time_embedding(t);
    auto h = blocks_.conv("conv_in", ops::concat_channels(x_t, constant(condition)));
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string n = "down" + std::to_string(l);
        h = blocks_.res_block(n + ".res", h, temb);
        h = blocks_.attn_block(n + ".attn", h, text, {});
        out["skip" + std::to_string(l)] = blocks_.conv("zero.skip" + std::to_string(l), h);
        h = ops::avg_pool2(h);
    }
    h = blocks_.res_block("mid.res", h, temb);
    out["mid"] = blocks_.conv("zero.mid", h);
    return out;
}

ControlResiduals TryOnControlNet::forward(const LatentTensor& x_t, int t, const TextEmbedding& text,
                                          const TryOnCondition& cond) const {
    if (x_t.space() != Space::latent) throw ShapeError("controlnet expects a latent-space input");
    NoGradGuard guard;
    auto vars = forward_var(constant(x_t.data()), t, constant(text.vectors), condition_input(cond));
    ControlResiduals r;
    for (auto& [site, v] : vars) r.sites[site] = std::move(v->value);
    return r;
}

}  // namespace garmentgen
