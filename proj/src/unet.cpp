#include "garmentgen/unet.hpp"

#include <cmath>

#include "garmentgen/garment_encoder.hpp"

namespace garmentgen {

std::vector<std::string> UNetConfig::attention_sites() const {
    std::vector<std::string> out;
    for (int l = 0; l < depth; ++l) out.push_back("down" + std::to_string(l));
    return out;
}

std::vector<std::string> UNetConfig::residual_sites() const {
    std::vector<std::string> out;
    for (int l = 0; l < depth; ++l) out.push_back("skip" + std::to_string(l));
    out.push_back("mid");
    return out;
}

void UNetConfig::validate() const {
    if (depth < 1) throw ConfigError("model.depth must be >= 1");
    if (static_cast<int>(channel_mult.size()) != depth) throw ConfigError("model.channel_mult needs one entry per level");
    if (base_channels < 1 || latent_channels < 1 || embedding_dim < 1 || time_embedding_dim < 2)
        throw ConfigError("model widths must be positive");
    if (time_embedding_dim % 2) throw ConfigError("model.time_embedding_dim must be even");
    for (int l = 0; l < depth; ++l) {
        if (channels_at(l) % groups) throw ConfigError("channels must be divisible by model.groups");
        if (channels_at(l) % heads) throw ConfigError("channels must be divisible by model.heads");
    }
}

AttentionMode parse_attention_mode(const std::string& s) {
    if (s == "none") return AttentionMode::none;
    if (s == "asa") return AttentionMode::asa;
    if (s == "csa") return AttentionMode::csa;
    throw ConfigError("unknown attention mode '" + s + "'");
}

std::string to_string(AttentionMode m) {
    switch (m) {
        case AttentionMode::none: return "none";
        case AttentionMode::asa: return "asa";
        case AttentionMode::csa: return "csa";
    }
    return "none";
}

InjectionVars to_vars(const InjectionSet& inj) {
    InjectionVars out;
    out.mode = inj.attention_mode;
    out.garment_scale = inj.garment_scale;
    if (inj.attention_mode != AttentionMode::none && !inj.garment_kv)
        throw ParameterError("attention mode " + to_string(inj.attention_mode) + " requires garment key/values");
    if (inj.garment_kv)
        for (const auto& [site, kv] : inj.garment_kv->sites) out.garment[site] = {constant(kv.k), constant(kv.v)};
    if (inj.control_residuals)
        for (const auto& [site, r] : inj.control_residuals->sites) out.residuals[site] = constant(r);
    return out;
}

Tensor timestep_features(int t, int dim) {
    const int half = dim / 2;
    Tensor f({1, dim});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        f[static_cast<std::size_t>(i)] = std::sin(t * freq);
        f[static_cast<std::size_t>(half + i)] = std::cos(t * freq);
    }
    return f;
}

// ---------------------------------------------------------------------------

UNetBlocks::UNetBlocks(const UNetConfig& cfg, ParamSet& params, std::string prefix)
    : cfg_(cfg), params_(params), prefix_(std::move(prefix)) {}

void UNetBlocks::add_conv(const std::string& name, int cin, int cout, int k, std::mt19937_64& rng, bool zero) {
    const int fan_in = cin * k * k;
    params_.add(full(name + ".w"), zero ? init_zeros({cout, cin, k, k}) : init_uniform({cout, cin, k, k}, fan_in, rng));
    params_.add(full(name + ".b"), zero ? init_zeros({cout}) : init_uniform({cout}, fan_in, rng));
}

void UNetBlocks::add_linear(const std::string& name, int in, int out, bool bias, std::mt19937_64& rng, bool zero) {
    params_.add(full(name + ".w"), zero ? init_zeros({out, in}) : init_uniform({out, in}, in, rng));
    if (bias) params_.add(full(name + ".b"), zero ? init_zeros({out}) : init_uniform({out}, in, rng));
}

void UNetBlocks::add_norm(const std::string& name, int channels) {
    params_.add(full(name + ".g"), init_ones({channels}));
    params_.add(full(name + ".b"), init_zeros({channels}));
}

void UNetBlocks::add_time_mlp(std::mt19937_64& rng) {
    const int te = cfg_.time_embedding_dim;
    add_linear("time.l1", te, 2 * te, true, rng);
    add_linear("time.l2", 2 * te, 2 * te, true, rng);
}

void UNetBlocks::add_res_block(const std::string& name, int cin, int cout, std::mt19937_64& rng) {
    add_norm(name + ".norm1", cin);
    add_conv(name + ".conv1", cin, cout, 3, rng);
    add_linear(name + ".temb", 2 * cfg_.time_embedding_dim, cout, true, rng);
    add_norm(name + ".norm2", cout);
    add_conv(name + ".conv2", cout, cout, 3, rng);
    if (cin != cout) add_conv(name + ".skip", cin, cout, 1, rng);
}

void UNetBlocks::add_attn_block(const std::string& name, int channels, std::mt19937_64& rng, bool kv_only) {
    add_norm(name + ".norm", channels);
    if (!kv_only) add_linear(name + ".q", channels, channels, false, rng);
    add_linear(name + ".k", channels, channels, false, rng);
    add_linear(name + ".v", channels, channels, false, rng);
    if (kv_only) return;
    add_linear(name + ".o", channels, channels, true, rng);
    add_norm(name + ".xnorm", channels);
    add_linear(name + ".xq", channels, channels, false, rng);
    add_linear(name + ".xk", cfg_.embedding_dim, channels, false, rng);
    add_linear(name + ".xv", cfg_.embedding_dim, channels, false, rng);
    add_linear(name + ".xo", channels, channels, true, rng);
}

Var UNetBlocks::conv(const std::string& name, const Var& x) const {
    return ops::conv2d(x, params_.var(full(name + ".w")), params_.var(full(name + ".b")));
}

Var UNetBlocks::linear(const std::string& name, const Var& x) const {
    const std::string b = full(name + ".b");
    return ops::linear(x, params_.var(full(name + ".w")), params_.contains(b) ? params_.var(b) : Var{});
}

Var UNetBlocks::norm(const std::string& name, const Var& x) const {
    return ops::group_norm(x, params_.var(full(name + ".g")), params_.var(full(name + ".b")), cfg_.groups);
}

Var UNetBlocks::time_embedding(int t) const {
    auto f = constant(timestep_features(t, cfg_.time_embedding_dim));
    return linear("time.l2", ops::silu(linear("time.l1", f)));
}

Var UNetBlocks::res_block(const std::string& name, const Var& x, const Var& temb) const {
    auto h = conv(name + ".conv1", ops::silu(norm(name + ".norm1", x)));
    auto tproj = linear(name + ".temb", ops::silu(temb));
    h = ops::add_channel_bias(h, ops::reshape(tproj, {h->value.dim(0)}));
    h = conv(name + ".conv2", ops::silu(norm(name + ".norm2", h)));
    auto skip = params_.contains(full(name + ".skip.w")) ? conv(name + ".skip", x) : x;
    return ops::add(skip, h);
}

SiteKVVar UNetBlocks::tap_kv(const std::string& name, const Var& x) const {
    auto tok = ops::to_tokens(norm(name + ".norm", x));
    return {linear(name + ".k", tok), linear(name + ".v", tok)};
}

Var UNetBlocks::attn_block(const std::string& name, const Var& x, const Var& text, const AttnIO& io) const {
    const int h = x->value.dim(1), w = x->value.dim(2);
    auto tok = ops::to_tokens(norm(name + ".norm", x));
    auto q = linear(name + ".q", tok);
    auto k = linear(name + ".k", tok);
    auto v = linear(name + ".v", tok);
    Var s;
    switch (io.mode) {
        case AttentionMode::none: s = ops::attention(q, k, v, cfg_.heads); break;
        case AttentionMode::asa: s = asa_var(q, k, v, io.garment->k, io.garment->v, cfg_.heads, io.garment_scale); break;
        case AttentionMode::csa: s = csa_var(q, k, v, io.garment->k, io.garment->v, cfg_.heads); break;
    }
    auto out = ops::add(x, ops::from_tokens(linear(name + ".o", s), h, w));

    auto xtok = ops::to_tokens(norm(name + ".xnorm", out));
    auto xq = linear(name + ".xq", xtok);
    auto xk = linear(name + ".xk", text);
    auto xv = linear(name + ".xv", text);
    auto c = ops::attention(xq, xk, xv, cfg_.heads);
    return ops::add(out, ops::from_tokens(linear(name + ".xo", c), h, w));
}

// ---------------------------------------------------------------------------

UNet::UNet(UNetConfig cfg, std::uint64_t seed, std::string prefix)
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
        blocks_.add_attn_block(n + ".attn", ch, rng);
    }
    blocks_.add_res_block("mid.res", ch, ch, rng);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
        const std::string n = "up" + std::to_string(l);
        blocks_.add_res_block(n + ".res", ch + cfg_.channels_at(l), cfg_.channels_at(l), rng);
        ch = cfg_.channels_at(l);
    }
    blocks_.add_norm("out.norm", ch);
    blocks_.add_conv("out.conv", ch, cfg_.latent_channels, 3, rng);
}

std::map<std::string, Shape> UNet::residual_shapes(int height, int width) const {
    std::map<std::string, Shape> out;
    for (int l = 0; l < cfg_.depth; ++l)
        out["skip" + std::to_string(l)] = {cfg_.channels_at(l), height >> l, width >> l};
    out["mid"] = {cfg_.channels_at(cfg_.depth - 1), height >> cfg_.depth, width >> cfg_.depth};
    return out;
}

void UNet::check_injection(const InjectionVars& inj, int height, int width) const {
    const auto sites = cfg_.attention_sites();
    if (inj.mode != AttentionMode::none) {
        for (const auto& site : sites)
            if (!inj.garment.count(site))
                throw ShapeError("garment key/values missing for attention site " + site);
    }
    for (const auto& [site, kv] : inj.garment) {
        if (std::find(sites.begin(), sites.end(), site) == sites.end())
            throw ShapeError("unknown attention site " + site);
        const int level = std::stoi(site.substr(4));
        const auto& ks = kv.k->value.shape();
        if (ks.size() != 2 || ks[1] != cfg_.channels_at(level) || kv.v->value.shape() != ks)
            throw ShapeError("garment key/value shape mismatch at " + site);
    }
    const auto shapes = residual_shapes(height, width);
    for (const auto& [site, r] : inj.residuals) {
        auto it = shapes.find(site);
        if (it == shapes.end()) throw ShapeError("unknown residual site " + site);
        if (r->value.shape() != it->second)
            throw ShapeError("residual shape mismatch at " + site + ": " + shape_str(r->value.shape()) + " vs " +
                             shape_str(it->second));
    }
}

Var UNet::forward_var(const Var& x_t, int t, const Var& text, const InjectionVars& inj) const {
    const auto& xs = x_t->value.shape();
    if (xs.size() != 3 || xs[0] != cfg_.latent_channels || xs[1] % cfg_.spatial_divisor() ||
        xs[2] % cfg_.spatial_divisor())
        throw ShapeError("unet input shape " + shape_str(xs) + " incompatible with config");
    if (text->value.rank() != 2 || text->value.dim(1) != cfg_.embedding_dim)
        throw ShapeError("text embedding width mismatch");
    check_injection(inj, xs[1], xs[2]);

    auto add_residual = [&](const std::string& site, Var h) {
        auto it = inj.residuals.find(site);
        return it == inj.residuals.end() ? h : ops::add(h, it->second);
    };

    auto temb = blocks_.time_embedding(t);
    auto h = blocks_.conv("conv_in", x_t);
    std::vector<Var> skips;
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string n = "down" + std::to_string(l);
        h = blocks_.res_block(n + ".res", h, temb);
        UNetBlocks::AttnIO io;
        io.mode = inj.mode;
        io.garment_scale = inj.garment_scale;
        if (inj.mode != AttentionMode::none) io.garment = &inj.garment.at(n);
        h = blocks_.attn_block(n + ".attn", h, text, io);
        skips.push_back(add_residual("skip" + std::to_string(l), h));
        h = ops::avg_pool2(h);
    }
    h = add_residual("mid", blocks_.res_block("mid.res", h, temb));
    for (int l = cfg_.depth - 1; l >= 0; --l) {
        h = ops::concat_channels(ops::upsample2(h), skips[static_cast<std::size_t>(l)]);
        h = blocks_.res_block("up" + std::to_string(l) + ".res", h, temb);
    }
    return blocks_.conv("out.conv", ops::silu(blocks_.norm("out.norm", h)));
}

LatentTensor UNet::forward(const LatentTensor& x_t, int t, const TextEmbedding& text, const InjectionSet& inj) const {
    if (x_t.space() != Space::latent) throw ShapeError("unet expects a latent-space input");
    NoGradGuard guard;
    auto out = forward_var(constant(x_t.data()), t, constant(text.vectors), to_vars(inj));
    return LatentTensor(std::move(out->value), Space::latent);
}

}  // namespace garmentgen
