#include "garmentgen/config.hpp"

#include <yaml-cpp/yaml.h>

#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

namespace garmentgen {

namespace {

struct Field {
    std::function<std::string(const AppConfig&)> get;
    std::function<void(AppConfig&, const std::string&)> set;
    bool list = false;
};

template <class T>
T parse_scalar(const std::string& key, const std::string& s) {
    // YAML reads an empty document as null, which would become the string "null"
    if constexpr (std::is_same_v<T, std::string>) return s;
    try {
        return YAML::Load(s).as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("bad value '" + s + "' for " + key);
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" []"), e = item.find_last_not_of(" []");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

template <class T>
std::string str(const T& v) {
    std::ostringstream o;
    o.precision(17);
    o << std::boolalpha << v;
    return o.str();
}

#define FIELD(key, member, type)                                                                    \
    {                                                                                               \
        key, Field {                                                                                \
            [](const AppConfig& c) { return str(c.member); },                                       \
                [](AppConfig& c, const std::string& s) { c.member = parse_scalar<type>(key, s); }   \
        }                                                                                           \
    }

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> f{
        FIELD("model.depth", model.depth, int),
        FIELD("model.base_channels", model.base_channels, int),
        {"model.channel_mult",
         {[](const AppConfig& c) {
              std::vector<std::string> v;
              for (int m : c.model.channel_mult) v.push_back(std::to_string(m));
              return join(v);
          },
          [](AppConfig& c, const std::string& s) {
              c.model.channel_mult.clear();
              for (const auto& x : split_list(s)) c.model.channel_mult.push_back(parse_scalar<int>("model.channel_mult", x));
          },
          true}},
        FIELD("model.latent_channels", model.latent_channels, int),
        FIELD("model.embedding_dim", model.embedding_dim, int),
        FIELD("model.time_embedding_dim", model.time_embedding_dim, int),
        FIELD("model.heads", model.heads, int),
        FIELD("model.groups", model.groups, int),
        FIELD("model.text_seed", text_seed, std::uint64_t),
        FIELD("control.pose_slots", control.pose_slots, int),
        FIELD("schedule.T", schedule_T, int),
        FIELD("schedule.beta_start", beta_start, double),
        FIELD("schedule.beta_end", beta_end, double),
        FIELD("sampler.steps", sampler_steps, int),
        FIELD("sampler.guidance_scale", guidance_scale, double),
        FIELD("sampler.attention_mode", attention_mode, std::string),
        FIELD("sampler.cache_garment_kv", cache_garment_kv, bool),
        FIELD("sampler.clip_x0", clip_x0, double),
        FIELD("cfg.drop_garment", drop_garment_in_uncond, bool),
        FIELD("data.image_size", image_size, int),
        FIELD("data.codec_factor", codec_factor, int),
        FIELD("data.dataset_size", dataset_size, int),
        FIELD("data.agnostic_radius", agnostic_radius, int),
        FIELD("data.manifest", manifest, std::string),
        FIELD("eval.rank_weighting", rank_weighting, std::string),
        FIELD("training.stage", stage, int),
        FIELD("training.learning_rate", learning_rate, double),
        FIELD("training.optimizer", optimizer, std::string),
        FIELD("training.batch_size", batch_size, int),
        FIELD("training.max_steps", max_steps, int),
        FIELD("training.text_dropout", text_dropout, double),
        {"training.augmentations",
         {[](const AppConfig& c) { return join(c.augmentations); },
          [](AppConfig& c, const std::string& s) { c.augmentations = split_list(s); }, true}},
        FIELD("training.seed", seed, std::uint64_t),
        FIELD("training.base_dataset_size", base_dataset_size, int),
        FIELD("training.base_seed", base_seed, std::uint64_t),
        FIELD("tryon.pose_kind", pose_kind, std::string),
        FIELD("tryon.pixel_composite", pixel_composite, bool),
        FIELD("tryon.mask_convention", mask_convention, std::string),
        FIELD("io.checkpoint", checkpoint, std::string),
        FIELD("io.out_dir", out_dir, std::string),
    };
    return f;
}
#undef FIELD

void flatten(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (node.IsMap()) {
        for (const auto& kv : node)
            flatten(kv.second, prefix.empty() ? kv.first.as<std::string>() : prefix + "." + kv.first.as<std::string>(),
                    out);
    } else if (node.IsSequence()) {
        std::vector<std::string> items;
        for (const auto& item : node) items.push_back(item.as<std::string>());
        out.emplace_back(prefix, join(items));
    } else if (node.IsScalar()) {
        out.emplace_back(prefix, node.as<std::string>());
    }
}

}  // namespace

const std::vector<std::string>& AppConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v;
        for (const auto& [name, f] : fields()) v.push_back(name);
        return v;
    }();
    return k;
}

AppConfig default_config() { return AppConfig{}; }

void apply_override(AppConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    if (key.find('.') == std::string::npos) {
        std::vector<std::string> hits;
        for (const auto& k : AppConfig::keys())
            if (k.size() > key.size() && k.compare(k.size() - key.size(), key.size(), key) == 0 &&
                k[k.size() - key.size() - 1] == '.')
                hits.push_back(k);
        if (hits.size() != 1) throw ConfigError("override key '" + key + "' is unknown or ambiguous");
        key = hits.front();
    }
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

AppConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides) {
    AppConfig cfg;
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    std::vector<std::pair<std::string, std::string>> flat;
    if (root && !root.IsNull()) flatten(root, "", flat);
    for (const auto& [key, value] : flat) {
        const auto it = fields().find(key);
        if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
        it->second.set(cfg, value);
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    validate(cfg);
    return cfg;
}

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    YAML::Node probe;
    try {
        probe = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot read config file '" + path + "'");
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    std::ostringstream text;
    text << probe;
    return parse_config(text.str(), overrides);
}

std::string to_yaml(const AppConfig& cfg) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    std::string section;
    for (const auto& [key, f] : fields()) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot), leaf = key.substr(dot + 1);
        if (sec != section) {
            if (!section.empty()) out << YAML::EndMap;
            out << YAML::Key << sec << YAML::Value << YAML::BeginMap;
            section = sec;
        }
        out << YAML::Key << leaf << YAML::Value;
        if (f.list) {
            out << YAML::Flow << YAML::BeginSeq;
            for (const auto& item : split_list(f.get(cfg))) out << item;
            out << YAML::EndSeq;
        } else {
            out << f.get(cfg);
        }
    }
    if (!section.empty()) out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void validate(const AppConfig& c) {
    c.model.validate();
    if (c.schedule_T < 2 || !(c.beta_start > 0) || !(c.beta_start <= c.beta_end) || !(c.beta_end < 1))
        throw ConfigError("invalid schedule");
    if (c.sampler_steps < 1 || c.sampler_steps > c.schedule_T) throw ConfigError("sampler.steps must be in [1, T]");
    if (!(c.guidance_scale >= 0)) throw ConfigError("sampler.guidance_scale must be >= 0");
    if (c.codec_factor < 1 || c.image_size % (c.codec_factor * c.model.spatial_divisor()))
        throw ConfigError("data.image_size must be divisible by codec_factor * 2^depth");
    if (c.stage < 0 || c.stage > 2) throw ConfigError("training.stage must be 0, 1 or 2");
    if (c.batch_size < 1 || c.max_steps < 0 || c.dataset_size < 1) throw ConfigError("invalid training sizes");
    if (!(c.learning_rate > 0)) throw ConfigError("training.learning_rate must be positive");
    if (c.optimizer != "sgd" && c.optimizer != "adam") throw ConfigError("training.optimizer must be sgd or adam");
    if (c.text_dropout < 0 || c.text_dropout > 1) throw ConfigError("training.text_dropout must be in [0,1]");
    if (c.control.pose_slots < 2) throw ConfigError("control.pose_slots must be >= 2");
    if (c.mask_convention != "complement" && c.mask_convention != "direct")
        throw ConfigError("tryon.mask_convention must be complement or direct");
    if (c.agnostic_radius < 0) throw ConfigError("data.agnostic_radius must be >= 0");
    if (!(c.clip_x0 >= 0)) throw ConfigError("sampler.clip_x0 must be >= 0");
    if (c.rank_weighting != "linear" && c.rank_weighting != "inverse")
        throw ConfigError("eval.rank_weighting must be linear or inverse");
    parse_attention_mode(c.attention_mode);
    parse_pose_kind(c.pose_kind);
}

}  // namespace garmentgen
