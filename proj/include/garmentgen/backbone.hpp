#pragma once

// Latent-diffusion core: noise schedule, forward noising, deterministic DDIM
// updates, single/multi-head attention, the noise-prediction loss, the latent
// codec and the text embedder.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "garmentgen/tensor.hpp"

namespace garmentgen {

enum class Space { pixel, latent };

/// [C,H,W] array tagged with the space it lives in.
class LatentTensor {
public:
    LatentTensor() = default;
    LatentTensor(Tensor data, Space space);

    const Tensor& data() const { return data_; }
    Tensor& data() { return data_; }
    Space space() const { return space_; }
    int channels() const { return data_.dim(0); }
    int height() const { return data_.dim(1); }
    int width() const { return data_.dim(2); }

    /// Checks finiteness, rank and (when divisor > 1) spatial divisibility.
    void validate(int divisor = 1) const;

private:
    Tensor data_;
    Space space_ = Space::latent;
};

struct NoiseSchedule {
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> betas;
    std::vector<double> alphas_cumprod;

    /// Cumulative alpha; t == -1 denotes the clean end of the chain (1.0).
    double alpha_bar(int t) const;
};

/// Linear beta schedule. Throws ParameterError unless T >= 2 and
/// 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps
Tensor add_noise(const Tensor& x0, const Tensor& eps, int t, const NoiseSchedule& s);
LatentTensor add_noise(const LatentTensor& x0, const Tensor& eps, int t, const NoiseSchedule& s);

/// Deterministic DDIM update from t to t_prev (t_prev == -1 lands on the
/// clean sample). Only eta == 0 is supported.
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_pred, int t, int t_prev, const NoiseSchedule& s,
                 double eta = 0.0);

/// Evenly spaced descending timesteps for a `steps`-step sampler.
std::vector<int> ddim_timesteps(const NoiseSchedule& s, int steps);

/// softmax(Q K^T / sqrt(d_head)) V. Q [sq,d], K and V [sk,d].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads = 1);

/// Mean squared error over all elements.
double simple_loss(const Tensor& eps_pred, const Tensor& eps);

// ---------------------------------------------------------------------------
// Codec

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual LatentTensor encode(const LatentTensor& image) const = 0;
    virtual LatentTensor decode(const LatentTensor& latent) const = 0;
    virtual int factor() const = 0;
    /// Round-trip max-abs bound promised on arbitrary inputs in [-1,1].
    virtual double tolerance() const = 0;
    virtual std::string id() const = 0;
};

/// Block-average encode, nearest-neighbour decode. Exact on images that are
/// constant over factor x factor blocks.
class BlockCodec final : public LatentCodec {
public:
    explicit BlockCodec(int factor = 4);
    LatentTensor encode(const LatentTensor& image) const override;
    LatentTensor decode(const LatentTensor& latent) const override;
    int factor() const override { return factor_; }
    double tolerance() const override { return 2.0; }
    std::string id() const override { return "block-" + std::to_string(factor_); }

private:
    int factor_;
};

/// Block-average of a [C,H,W] tensor; exact when the block is constant.
Tensor block_average(const Tensor& x, int factor);
Tensor nearest_upsample(const Tensor& x, int factor);

// ---------------------------------------------------------------------------
// Text

struct TextEmbedding {
    Tensor vectors;  // [tokens, dim]
    std::string source_text;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual TextEmbedding embed(const std::string& text) const = 0;
    virtual int dim() const = 0;
    virtual std::string id() const = 0;
};

/// Bag of lower-cased alphanumeric tokens, each mapped to a unit-variance
/// gaussian vector seeded by the token hash. The empty prompt maps to a
/// single reserved token.
class HashedTextEmbedder final : public TextEmbedder {
public:
    HashedTextEmbedder(int dim, std::uint64_t seed);
    TextEmbedding embed(const std::string& text) const override;
    int dim() const override { return dim_; }
    std::string id() const override { return "hashed-bow-" + std::to_string(seed_); }

    static std::vector<std::string> tokenize(const std::string& text);

private:
    int dim_;
    std::uint64_t seed_;
};

}  // namespace garmentgen
