#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. They rebuild the samplers from the denoiser forward pass
// with plain scalar loops, so they share no sampling code with the library.

#include <algorithm>
#include <cmath>
#include <optional>

#include "garmentgen/pipelines.hpp"

namespace garmentgen::oracle {

inline double abar(const NoiseSchedule& s, int t) { return t < 0 ? 1.0 : s.alphas_cumprod[static_cast<std::size_t>(t)]; }

/// x0 clamp, then the eta = 0 update written out per element.
inline Tensor ddim_update(const Tensor& x, const Tensor& e, int t, int t_prev, const NoiseSchedule& s, double clip) {
    const double at = abar(s, t), ap = abar(s, t_prev);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double x0 = (x[i] - std::sqrt(1.0 - at) * e[i]) / std::sqrt(at);
        double eps = e[i];
        if (clip > 0.0 && std::abs(x0) > clip) {
            x0 = std::clamp(x0, -clip, clip);
            eps = (x[i] - std::sqrt(at) * x0) / std::sqrt(1.0 - at);
        }
        out[i] = std::sqrt(ap) * x0 + std::sqrt(1.0 - ap) * eps;
    }
    return out;
}

inline Tensor guided(const Tensor& eu, const Tensor& ec, double s) {
    Tensor out(ec.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eu[i] + s * (ec[i] - eu[i]);
    return out;
}

struct Injection {
    std::optional<GarmentKV> kv;
    AttentionMode mode = AttentionMode::none;
};

/// Guided noise prediction with optional garment key/values and no control.
inline Tensor eps(const ModelRefs& m, const Tensor& z, int t, const TextEmbedding& cond, const TextEmbedding& uncond,
                  const Injection& g, double scale) {
    InjectionSet inj;
    inj.garment_kv = g.kv;
    inj.attention_mode = g.mode;
    const LatentTensor x(z, Space::latent);
    const Tensor ec = m.unet->forward(x, t, cond, inj).data();
    if (scale == 1.0) return ec;
    return guided(m.unet->forward(x, t, uncond, inj).data(), ec, scale);
}

inline Injection garment_injection(const ModelRefs& m, const GenerationRequest& req, int t) {
    Injection g;
    if (req.attention_mode == AttentionMode::none) return g;
    g.mode = req.attention_mode;
    g.kv = m.encoder->encode_garment(req.garment_image, m.text->embed(req.garment_prompt), t, *m.codec);
    return g;
}

/// Text-to-image without any control network.
inline Tensor generate_latent(const ModelRefs& m, const GenerationRequest& req, double clip) {
    const int f = m.codec->factor();
    const Shape shape{m.unet->config().latent_channels, req.height / f, req.width / f};
    Tensor z = req.initial_noise ? *req.initial_noise : initial_latent(req.seed, shape);
    const TextEmbedding cond = m.text->embed(req.target_prompt), uncond = m.text->embed("");
    const auto ts = ddim_timesteps(*m.schedule, req.steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i], tp = i + 1 < ts.size() ? ts[i + 1] : -1;
        const Tensor e = eps(m, z, t, cond, uncond, garment_injection(m, req, t), req.guidance_scale);
        z = ddim_update(z, e, t, tp, *m.schedule, clip);
    }
    return z;
}

/// Try-on with the control network removed: latent blend at every step,
/// optional pixel composite. Returns the decoded image.
inline Tensor tryon_without_control(const ModelRefs& m, const TryOnRequest& req, double clip, bool composite) {
    const int f = m.codec->factor();
    const Tensor src = m.codec->encode(req.source_image).data();
    const int C = src.dim(0), h = src.dim(1), w = src.dim(2);
    Tensor ml({1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double a = 0.0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) a += req.mask.at(0, y * f + dy, x * f + dx);
            ml.at(0, y, x) = a / (f * f) >= 0.5 ? 1.0 : 0.0;
        }
    auto blend = [&](const Tensor& gen, const Tensor& keep) {
        Tensor out(gen.shape());
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(c, y, x) = ml.at(0, y, x) == 1.0 ? gen.at(c, y, x) : keep.at(c, y, x);
        return out;
    };
    auto noised = [&](const Tensor& noise, int t) {
        if (t < 0) return src;
        const double a = abar(*m.schedule, t);
        Tensor out(src.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a) * src[i] + std::sqrt(1.0 - a) * noise[i];
        return out;
    };
    const Tensor noise = req.initial_noise ? *req.initial_noise : initial_latent(req.seed, src.shape());
    const TextEmbedding cond = m.text->embed(req.target_prompt), uncond = m.text->embed("");
    const auto ts = ddim_timesteps(*m.schedule, req.steps);
    Tensor z = blend(noise, noised(noise, ts.front()));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i], tp = i + 1 < ts.size() ? ts[i + 1] : -1;
        const Tensor e = eps(m, z, t, cond, uncond, garment_injection(m, req, t), req.guidance_scale);
        z = blend(ddim_update(z, e, t, tp, *m.schedule, clip), noised(noise, tp));
    }
    Tensor out = m.codec->decode({z, Space::latent}).data();
    if (composite) {
        const Tensor rt = m.codec->decode({src, Space::latent}).data();
        for (int c = 0; c < out.dim(0); ++c)
            for (int y = 0; y < out.dim(1); ++y)
                for (int x = 0; x < out.dim(2); ++x)
                    if (req.mask.at(0, y, x) == 0.0) out.at(c, y, x) = rt.at(c, y, x);
    }
    return out;
}

}  // namespace garmentgen::oracle
