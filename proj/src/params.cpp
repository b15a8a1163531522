#include "garmentgen/params.hpp"

#include <cmath>

namespace garmentgen {

void round_to_f32(Tensor& t) {
    for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

Parameter& ParamSet::add(const std::string& name, Tensor init) {
    if (params_.count(name)) throw ParameterError("duplicate parameter " + name);
    round_to_f32(init);
    auto& p = params_[name];
    p.name = name;
    p.value = std::move(init);
    return p;
}

Parameter& ParamSet::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ParameterError("unknown parameter " + name);
    return it->second;
}

const Parameter& ParamSet::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ParameterError("unknown parameter " + name);
    return it->second;
}

void ParamSet::set_trainable(bool trainable) {
    for (auto& [_, p] : params_) p.trainable = trainable;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
}

std::uint64_t ParamSet::checksum() const {
    std::uint64_t h = 0;
    for (const auto& [name, p] : params_) h = h * 1099511628211ULL ^ garmentgen::checksum(p.value.data()) ^ fnv1a(name);
    return h;
}

std::size_t ParamSet::copy_values_from(const ParamSet& other, const std::string& src_prefix,
                                       const std::string& dst_prefix) {
    std::size_t copied = 0;
    for (auto& [name, p] : params_) {
        if (name.rfind(dst_prefix, 0) != 0) continue;
        auto it = other.params_.find(src_prefix + name.substr(dst_prefix.size()));
        if (it == other.params_.end() || it->second.value.shape() != p.value.shape()) continue;
        p.value = it->second.value;
        ++copied;
    }
    return copied;
}

Tensor init_uniform(const Shape& shape, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shape);
    for (auto& v : t.data()) v = dist(rng);
    round_to_f32(t);
    return t;
}

Tensor init_zeros(const Shape& shape) { return Tensor(shape, 0.0); }
Tensor init_ones(const Shape& shape) { return Tensor(shape, 1.0); }

}  // namespace garmentgen
