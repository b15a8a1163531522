#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "garmentgen/autograd.hpp"
#include "garmentgen/tensor.hpp"

namespace garmentgen {

struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
};

/// Rounds every entry to the nearest float32. Parameters always hold
/// float32-representable values so checkpoints (float32 blobs) round-trip
/// exactly while arithmetic stays in double.
void round_to_f32(Tensor& t);

/// Named parameter collection with stable element addresses.
class ParamSet {
public:
    Parameter& add(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    Var var(const std::string& name) const { return param_leaf(get(name)); }

    void set_trainable(bool trainable);
    std::vector<std::string> names() const;
    std::size_t scalar_count() const;
    std::uint64_t checksum() const;

    /// For each own parameter `dst_prefix + rest`, copy `src_prefix + rest`
    /// from `other` when present and equally shaped. Returns the copy count.
    std::size_t copy_values_from(const ParamSet& other, const std::string& src_prefix, const std::string& dst_prefix);

    std::map<std::string, Parameter>& items() { return params_; }
    const std::map<std::string, Parameter>& items() const { return params_; }

private:
    std::map<std::string, Parameter> params_;
};

/// Initializers. Values are rounded to float32.
Tensor init_uniform(const Shape& shape, int fan_in, std::mt19937_64& rng);
Tensor init_zeros(const Shape& shape);
Tensor init_ones(const Shape& shape);

}  // namespace garmentgen
