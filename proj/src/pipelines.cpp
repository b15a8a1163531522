#include "garmentgen/pipelines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace garmentgen {

std::string to_string(TaskKind t) {
    switch (t) {
        case TaskKind::gc_t2i: return "gc_t2i";
        case TaskKind::stylized_gc_t2i: return "stylized_gc_t2i";
        case TaskKind::controllable_gc_t2i: return "controllable_gc_t2i";
        case TaskKind::virtual_tryon: return "virtual_tryon";
    }
    return "?";
}

std::string to_string(PipelineKind p) { return p == PipelineKind::text2image ? "text2image" : "inpainting"; }

std::string to_string(ControlNetChoice c) {
    switch (c) {
        case ControlNetChoice::none: return "none";
        case ControlNetChoice::any: return "any";
        case ControlNetChoice::tryon: return "tryon";
    }
    return "?";
}

const std::vector<TaskConfig>& task_registry() {
    static const std::vector<TaskConfig> rows{
        {TaskKind::gc_t2i, PipelineKind::text2image, true, "sd-mini", ControlNetChoice::none},
        {TaskKind::stylized_gc_t2i, PipelineKind::text2image, true, "stylized-base", ControlNetChoice::none},
        {TaskKind::controllable_gc_t2i, PipelineKind::text2image, true, "any", ControlNetChoice::any},
        {TaskKind::virtual_tryon, PipelineKind::inpainting, true, "sd-mini", ControlNetChoice::tryon},
    };
    return rows;
}

TaskConfig resolve_task(const std::string& name) {
    std::string key;
    for (char c : name)
        if (std::isalnum(static_cast<unsigned char>(c))) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::vector<std::pair<std::string, TaskKind>> aliases{
        {"gct2i", TaskKind::gc_t2i},
        {"stylizedgct2i", TaskKind::stylized_gc_t2i},
        {"controllablegct2i", TaskKind::controllable_gc_t2i},
        {"virtualtryon", TaskKind::virtual_tryon},
        {"tryon", TaskKind::virtual_tryon},
    };
    for (const auto& [alias, kind] : aliases)
        if (key == alias)
            return *std::find_if(task_registry().begin(), task_registry().end(),
                                 [&](const TaskConfig& r) { return r.task == kind; });
    throw ConfigError("unknown task '" + name + "'");
}

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double s) {
    require_same_shape(eps_uncond, eps_cond, "cfg_combine");
    if (s == 1.0) return eps_cond;
    Tensor out = eps_uncond;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * (eps_cond[i] - eps_uncond[i]);
    return out;
}

Tensor blend_latents(const Tensor& z_gen, const Tensor& z_src_noised, const Tensor& m_latent) {
    require_same_shape(z_gen, z_src_noised, "blend_latents");
    const bool broadcast = m_latent.rank() == 3 && m_latent.dim(0) == 1 && z_gen.rank() == 3 &&
                           m_latent.dim(1) == z_gen.dim(1) && m_latent.dim(2) == z_gen.dim(2);
    if (!broadcast) require_same_shape(z_gen, m_latent, "blend_latents mask");
    const std::size_t plane = broadcast ? m_latent.size() : z_gen.size();
    Tensor out(z_gen.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = m_latent[i % plane];
        if (m < 0.0 || m > 1.0) throw ShapeError("blend_latents: mask values must lie in [0,1]");
        out[i] = m * z_gen[i] + (1.0 - m) * z_src_noised[i];
    }
    return out;
}

Tensor downsample_mask(const Tensor& mask, int factor) {
    Tensor m = block_average(mask, factor);
    for (auto& v : m.data()) v = v >= 0.5 ? 1.0 : 0.0;
    return m;
}

void GenerationRequest::validate() const {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (!(guidance_scale >= 0.0)) throw ConfigError("guidance_scale must be >= 0");
    if (height <= 0 || width <= 0) throw ConfigError("output size must be positive");
}

Tensor clip_eps(const Tensor& x_t, const Tensor& eps, int t, const NoiseSchedule& s, double clip) {
    require_same_shape(x_t, eps, "clip_eps");
    if (clip <= 0.0) return eps;
    const double a = s.alpha_bar(t), sa = std::sqrt(a), sb = std::sqrt(1.0 - a);
    Tensor out = eps;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0 = (x_t[i] - sb * eps[i]) / sa;
        const double c = std::clamp(x0, -clip, clip);
        if (c != x0) out[i] = (x_t[i] - sa * c) / sb;
    }
    return out;
}

Tensor initial_latent(std::uint64_t seed, const Shape& shape) {
    std::mt19937_64 rng(seed);
    return Tensor::randn(shape, rng);
}

namespace {

void require(const void* p, const char* what) {
    if (!p) throw ConfigError(std::string("pipeline is missing the ") + what);
}

class Sampler {
public:
    Sampler(const ModelRefs& m, const GenerationRequest& req, const SamplerOptions& opts)
        : m_(m), req_(req), opts_(opts) {
        require(m.unet, "denoiser");
        require(m.text, "text embedder");
        require(m.codec, "codec");
        require(m.schedule, "noise schedule");
        req.validate();
        if (req.attention_mode != AttentionMode::none) require(m.encoder, "garment encoder");
        cond_ = m.text->embed(req.target_prompt);
        uncond_ = m.text->embed("");
        garment_prompt_ = m.text->embed(req.garment_prompt);
        const int f = m.codec->factor();
        if (req.height % f || req.width % f) throw ShapeError("output size must be divisible by the codec factor");
        shape_ = {m.unet->config().latent_channels, req.height / f, req.width / f};
        if (req.attention_mode != AttentionMode::none) {
            if (req.garment_image.space() != Space::pixel) throw ShapeError("garment image must be pixel space");
            garment_latent_ = m.codec->encode(req.garment_image);
        }
    }

    const Shape& latent_shape() const { return shape_; }

    Tensor start() const {
        if (req_.initial_noise) {
            if (req_.initial_noise->shape() != shape_) throw ShapeError("initial noise has the wrong shape");
            return *req_.initial_noise;
        }
        return initial_latent(req_.seed, shape_);
    }

    std::vector<int> timesteps() const { return ddim_timesteps(*m_.schedule, req_.steps); }

    /// Guided noise prediction at (z, t). `control` supplies residuals for a
    /// given text embedding, or is empty.
    Tensor eps(const Tensor& z, int t,
               const std::function<std::optional<ControlResiduals>(const LatentTensor&, int, const TextEmbedding&)>&
                   control) {
        InjectionSet inj;
        if (req_.attention_mode != AttentionMode::none) {
            inj.garment_kv = garment_kv(t);
            inj.attention_mode = req_.attention_mode;
        }
        const LatentTensor x(z, Space::latent);
        inj.control_residuals = control ? control(x, t, cond_) : std::nullopt;
        const Tensor e_cond = m_.unet->forward(x, t, cond_, inj).data();
        if (req_.guidance_scale == 1.0) return clip_eps(z, e_cond, t, *m_.schedule, opts_.clip_x0);
        InjectionSet uinj = inj;
        if (opts_.drop_garment_in_uncond) {
            uinj.garment_kv.reset();
            uinj.attention_mode = AttentionMode::none;
        }
        uinj.control_residuals = control ? control(x, t, uncond_) : std::nullopt;
        const Tensor e_uncond = m_.unet->forward(x, t, uncond_, uinj).data();
        return clip_eps(z, cfg_combine(e_uncond, e_cond, req_.guidance_scale), t, *m_.schedule, opts_.clip_x0);
    }

private:
    const GarmentKV& garment_kv(int t) {
        const int tk = opts_.cache_garment_kv ? 0 : t;
        if (!kv_ || kv_->timestep_used != tk) {
            kv_ = m_.encoder->encode_latent(garment_latent_, garment_prompt_, tk);
            if (opts_.garment_kv_hook) opts_.garment_kv_hook(*kv_);
        }
        return *kv_;
    }

    const ModelRefs& m_;
    const GenerationRequest& req_;
    const SamplerOptions& opts_;
    TextEmbedding cond_, uncond_, garment_prompt_;
    LatentTensor garment_latent_;
    Shape shape_;
    std::optional<GarmentKV> kv_;
};

}  // namespace

LatentTensor generate_gc_t2i(const ModelRefs& models, const GenerationRequest& req, const SamplerOptions& opts) {
    Sampler sampler(models, req, opts);
    Tensor z = sampler.start();
    const auto ts = sampler.timesteps();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i], t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        z = ddim_step(z, sampler.eps(z, t, {}), t, t_prev, *models.schedule);
    }
    if (!z.all_finite()) throw NumericalError("sampler produced non-finite latents");
    return models.codec->decode({z, Space::latent});
}

LatentTensor tryon(const ModelRefs& models, const TryOnRequest& req, const SamplerOptions& opts, TryOnTrace* trace) {
    require(models.controlnet, "try-on control network");
    if (req.source_image.space() != Space::pixel) throw ShapeError("source image must be pixel space");
    if (req.source_image.height() != req.height || req.source_image.width() != req.width)
        throw ShapeError("request size does not match the source image");
    const TryOnCondition cond = pack_condition(req.source_image, req.mask, req.pose, opts.mask_convention);
    Sampler sampler(models, req, opts);

    const LatentTensor src = models.codec->encode(req.source_image);
    const Tensor m_lat = downsample_mask(req.mask, models.codec->factor());
    // One noise draw serves both the initial latent and the forward-noised
    // source, so the seed stays the only source of randomness.
    const Tensor noise = sampler.start();
    const auto ts = sampler.timesteps();
    const NoiseSchedule& s = *models.schedule;

    auto control = [&](const LatentTensor& x, int t, const TextEmbedding& text) -> std::optional<ControlResiduals> {
        return models.controlnet->forward(x, t, text, cond);
    };
    Tensor z = blend_latents(noise, add_noise(src.data(), noise, ts.front(), s), m_lat);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i], t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        const Tensor z_gen = ddim_step(z, sampler.eps(z, t, control), t, t_prev, s);
        const Tensor z_src = t_prev >= 0 ? add_noise(src.data(), noise, t_prev, s) : src.data();
        z = blend_latents(z_gen, z_src, m_lat);
    }
    if (!z.all_finite()) throw NumericalError("sampler produced non-finite latents");

    LatentTensor out = models.codec->decode({z, Space::latent});
    if (opts.pixel_composite) {
        const LatentTensor round_trip = models.codec->decode(src);
        for (int c = 0; c < out.channels(); ++c)
            for (int y = 0; y < out.height(); ++y)
                for (int x = 0; x < out.width(); ++x)
                    if (req.mask.at(0, y, x) == 0.0) out.data().at(c, y, x) = round_trip.data().at(c, y, x);
    }
    if (trace) *trace = {z, src.data(), m_lat};
    return out;
}

}  // namespace garmentgen
