#include "garmentgen/backbone.hpp"

#include <cctype>
#include <cmath>
#include <random>

#include "garmentgen/autograd.hpp"

namespace garmentgen {

LatentTensor::LatentTensor(Tensor data, Space space) : data_(std::move(data)), space_(space) {
    if (data_.rank() != 3) throw ShapeError("LatentTensor expects [C,H,W], got " + shape_str(data_.shape()));
}

void LatentTensor::validate(int divisor) const {
    if (data_.rank() != 3 || data_.dim(0) < 1) throw ShapeError("LatentTensor: bad shape " + shape_str(data_.shape()));
    if (divisor > 1 && (data_.dim(1) % divisor || data_.dim(2) % divisor))
        throw ShapeError("LatentTensor: spatial size " + shape_str(data_.shape()) + " not divisible by " +
                         std::to_string(divisor));
    if (!data_.all_finite()) throw NumericalError("LatentTensor: non-finite entries");
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == -1) return 1.0;
    if (t < 0 || t >= T) throw ParameterError("timestep " + std::to_string(t) + " outside [0," + std::to_string(T) + ")");
    return alphas_cumprod[static_cast<std::size_t>(t)];
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw ParameterError("schedule needs T >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ParameterError("schedule needs 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alphas_cumprod.resize(static_cast<std::size_t>(T));
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * t / static_cast<double>(T - 1);
        s.betas[static_cast<std::size_t>(t)] = beta;
        prod *= 1.0 - beta;
        s.alphas_cumprod[static_cast<std::size_t>(t)] = prod;
    }
    return s;
}

Tensor add_noise(const Tensor& x0, const Tensor& eps, int t, const NoiseSchedule& s) {
    require_same_shape(x0, eps, "add_noise");
    if (t < 0 || t >= s.T) throw ParameterError("add_noise: timestep out of range");
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

LatentTensor add_noise(const LatentTensor& x0, const Tensor& eps, int t, const NoiseSchedule& s) {
    return LatentTensor(add_noise(x0.data(), eps, t, s), x0.space());
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_pred, int t, int t_prev, const NoiseSchedule& s, double eta) {
    require_same_shape(x_t, eps_pred, "ddim_step");
    if (eta != 0.0) throw ParameterError("ddim_step: only eta = 0 is supported");
    if (!(t_prev < t)) throw ParameterError("ddim_step: t_prev must be < t");
    const double ab = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t_prev);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    const double spa = std::sqrt(ab_prev), spb = std::sqrt(1.0 - ab_prev);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0_hat = (x_t[i] - sb * eps_pred[i]) / sa;
        out[i] = spa * x0_hat + spb * eps_pred[i];
    }
    return out;
}

std::vector<int> ddim_timesteps(const NoiseSchedule& s, int steps) {
    if (steps < 1) throw ParameterError("sampler needs at least one step");
    if (steps > s.T) throw ParameterError("more sampler steps than schedule steps");
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps));
    for (int i = steps - 1; i >= 0; --i) {
        // Spread over [0, T-1] with the last entry pinned to T-1.
        ts.push_back(static_cast<int>(std::lround(static_cast<double>(i) * (s.T - 1) / std::max(1, steps - 1))));
    }
    if (steps == 1) ts[0] = s.T - 1;
    return ts;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    NoGradGuard guard;
    return ops::attention(constant(q), constant(k), constant(v), heads)->value;
}

double simple_loss(const Tensor& eps_pred, const Tensor& eps) { return mean_squared_diff(eps_pred, eps); }

// ---------------------------------------------------------------------------

Tensor block_average(const Tensor& x, int factor) {
    if (x.rank() != 3 || x.dim(1) % factor || x.dim(2) % factor)
        throw ShapeError("block_average: " + shape_str(x.shape()) + " not divisible by " + std::to_string(factor));
    const int c = x.dim(0), h = x.dim(1) / factor, w = x.dim(2) / factor;
    const double inv = 1.0 / (factor * factor);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                // anchor + mean offset keeps constant blocks bit-exact
                const double anchor = x.at(ch, i * factor, j * factor);
                double off = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) off += x.at(ch, i * factor + dy, j * factor + dx) - anchor;
                out.at(ch, i, j) = anchor + off * inv;
            }
    return out;
}

Tensor nearest_upsample(const Tensor& x, int factor) {
    if (x.rank() != 3) throw ShapeError("nearest_upsample: expected [C,H,W]");
    const int c = x.dim(0), h = x.dim(1) * factor, w = x.dim(2) * factor;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at(ch, i, j) = x.at(ch, i / factor, j / factor);
    return out;
}

BlockCodec::BlockCodec(int factor) : factor_(factor) {
    if (factor < 1) throw ParameterError("codec factor must be >= 1");
}

LatentTensor BlockCodec::encode(const LatentTensor& image) const {
    if (image.space() != Space::pixel) throw ShapeError("encode expects a pixel-space tensor");
    return LatentTensor(block_average(image.data(), factor_), Space::latent);
}

LatentTensor BlockCodec::decode(const LatentTensor& latent) const {
    if (latent.space() != Space::latent) throw ShapeError("decode expects a latent-space tensor");
    return LatentTensor(nearest_upsample(latent.data(), factor_), Space::pixel);
}

// ---------------------------------------------------------------------------

HashedTextEmbedder::HashedTextEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ParameterError("text embedding dim must be >= 1");
}

std::vector<std::string> HashedTextEmbedder::tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || ch == '-') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

TextEmbedding HashedTextEmbedder::embed(const std::string& text) const {
    auto tokens = tokenize(text);
    if (tokens.empty()) tokens.push_back("<empty>");
    Tensor vecs({static_cast<int>(tokens.size()), dim_});
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        std::mt19937_64 rng(fnv1a(tokens[r], seed_ ^ 0x9e3779b97f4a7c15ULL));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int c = 0; c < dim_; ++c) vecs.at(static_cast<int>(r), c) = dist(rng);
    }
    return {std::move(vecs), text};
}

}  // namespace garmentgen
