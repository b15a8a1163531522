#pragma once

// Instrumentable mini-UNet noise predictor.
//
//   conv_in -> [res + attn site "down{l}" -> skip{l} -> avg_pool] x depth
//           -> mid res -> [upsample, concat skip{l}, res] x depth -> out
//
// Each attention block runs self-attention (the injection site) followed by
// cross-attention over the text embedding. Self-attention sites accept
// external garment keys/values; skip and mid features accept additive
// control residuals.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "garmentgen/autograd.hpp"
#include "garmentgen/backbone.hpp"
#include "garmentgen/params.hpp"

namespace garmentgen {

struct UNetConfig {
    int depth = 2;
    int base_channels = 32;
    std::vector<int> channel_mult{1, 1};
    int latent_channels = 3;
    int embedding_dim = 32;       // text embedding width
    int time_embedding_dim = 32;  // sinusoidal width; MLP hidden is 2x
    int heads = 1;
    int groups = 8;

    int channels_at(int level) const { return base_channels * channel_mult.at(static_cast<std::size_t>(level)); }
    std::vector<std::string> attention_sites() const;
    /// Sites that accept control residuals: skip{l} for each level plus "mid".
    std::vector<std::string> residual_sites() const;
    /// Latent spatial dims must be divisible by this.
    int spatial_divisor() const { return 1 << depth; }
    void validate() const;
};

enum class AttentionMode { none, asa, csa };

AttentionMode parse_attention_mode(const std::string& s);
std::string to_string(AttentionMode m);

struct SiteKV {
    Tensor k;  // [s_g, d]
    Tensor v;  // [s_g, d]
};

/// Per-site garment keys/values.
struct GarmentKV {
    std::map<std::string, SiteKV> sites;
    int timestep_used = 0;
};

/// Per-site residuals added to the denoiser's skip/mid features.
struct ControlResiduals {
    std::map<std::string, Tensor> sites;
};

struct InjectionSet {
    std::optional<GarmentKV> garment_kv;
    std::optional<ControlResiduals> control_residuals;
    AttentionMode attention_mode = AttentionMode::none;
    double garment_scale = 1.0;
};

// Graph-level versions used during training.
struct SiteKVVar {
    Var k;
    Var v;
};

struct InjectionVars {
    std::map<std::string, SiteKVVar> garment;
    std::map<std::string, Var> residuals;
    AttentionMode mode = AttentionMode::none;
    double garment_scale = 1.0;
};

InjectionVars to_vars(const InjectionSet& inj);

/// Parameter registration and block evaluation shared by the denoiser,
/// the garment encoder and the control network. All names are
/// `prefix + local`.
class UNetBlocks {
public:
    UNetBlocks(const UNetConfig& cfg, ParamSet& params, std::string prefix);

    const std::string& prefix() const { return prefix_; }
    std::string full(const std::string& local) const { return prefix_ + local; }

    void add_conv(const std::string& name, int cin, int cout, int k, std::mt19937_64& rng, bool zero = false);
    void add_linear(const std::string& name, int in, int out, bool bias, std::mt19937_64& rng, bool zero = false);
    void add_norm(const std::string& name, int channels);
    void add_time_mlp(std::mt19937_64& rng);
    void add_res_block(const std::string& name, int cin, int cout, std::mt19937_64& rng);
    /// kv_only registers just the norm and key/value projections.
    void add_attn_block(const std::string& name, int channels, std::mt19937_64& rng, bool kv_only = false);

    Var conv(const std::string& name, const Var& x) const;
    Var linear(const std::string& name, const Var& x) const;
    Var norm(const std::string& name, const Var& x) const;
    Var time_embedding(int t) const;
    Var res_block(const std::string& name, const Var& x, const Var& temb) const;

    struct AttnIO {
        const SiteKVVar* garment = nullptr;
        AttentionMode mode = AttentionMode::none;
        double garment_scale = 1.0;
    };
    Var attn_block(const std::string& name, const Var& x, const Var& text, const AttnIO& io) const;
    /// Normalized tokens feeding the self-attention of block `name`, and
    /// their key/value projections.
    SiteKVVar tap_kv(const std::string& name, const Var& x) const;

    const UNetConfig& config() const { return cfg_; }
    ParamSet& params() const { return params_; }

private:
    const UNetConfig& cfg_;
    ParamSet& params_;
    std::string prefix_;
};

/// Sinusoidal timestep features [1, dim].
Tensor timestep_features(int t, int dim);

class UNet {
public:
    UNet(UNetConfig cfg, std::uint64_t seed, std::string prefix = "unet.");
    UNet(const UNet&) = delete;
    UNet& operator=(const UNet&) = delete;
    UNet(UNet&&) = delete;

    const UNetConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const std::string& prefix() const { return prefix_; }

    /// eps prediction; pure function of inputs, parameters and injections.
    LatentTensor forward(const LatentTensor& x_t, int t, const TextEmbedding& text, const InjectionSet& inj) const;
    Var forward_var(const Var& x_t, int t, const Var& text, const InjectionVars& inj) const;

    /// Shapes of the residual sites for a latent of the given size.
    std::map<std::string, Shape> residual_shapes(int height, int width) const;

private:
    void check_injection(const InjectionVars& inj, int height, int width) const;

    UNetConfig cfg_;
    std::string prefix_;
    ParamSet params_;
    UNetBlocks blocks_;
};

}  // namespace garmentgen
