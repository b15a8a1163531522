#include "garmentgen/model_bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace garmentgen {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'G', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json unet_config_json(const UNetConfig& c) {
    return {{"depth", c.depth},
            {"base_channels", c.base_channels},
            {"channel_mult", c.channel_mult},
            {"latent_channels", c.latent_channels},
            {"embedding_dim", c.embedding_dim},
            {"time_embedding_dim", c.time_embedding_dim},
            {"heads", c.heads},
            {"groups", c.groups},
            {"attention_sites", c.attention_sites()}};
}

UNetConfig unet_config_from(const json& j) {
    UNetConfig c;
    c.depth = j.at("depth");
    c.base_channels = j.at("base_channels");
    c.channel_mult = j.at("channel_mult").get<std::vector<int>>();
    c.latent_channels = j.at("latent_channels");
    c.embedding_dim = j.at("embedding_dim");
    c.time_embedding_dim = j.at("time_embedding_dim");
    c.heads = j.at("heads");
    c.groups = j.at("groups");
    c.validate();
    return c;
}

void build(ModelBundle& b, std::uint64_t seed, int codec_factor) {
    b.unet = std::make_unique<UNet>(b.cfg, seed);
    b.encoder = std::make_unique<GarmentEncoder>(b.cfg, seed + 1);
    b.controlnet = std::make_unique<TryOnControlNet>(b.cfg, b.control_cfg, seed + 2);
    b.text = std::make_unique<HashedTextEmbedder>(b.cfg.embedding_dim, b.text_seed);
    b.codec = std::make_unique<BlockCodec>(codec_factor);
}

}  // namespace

ModelBundle ModelBundle::create(const AppConfig& config, std::uint64_t seed) {
    validate(config);
    ModelBundle b;
    b.cfg = config.model;
    b.control_cfg = config.control;
    b.control_cfg.image_channels = config.model.latent_channels;
    b.control_cfg.codec_factor = config.codec_factor;
    b.schedule = make_schedule(config.schedule_T, config.beta_start, config.beta_end);
    b.text_seed = config.text_seed;
    build(b, seed, config.codec_factor);
    return b;
}

ModelRefs ModelBundle::refs() const {
    return {unet.get(), encoder.get(), controlnet.get(), text.get(), codec.get(), &schedule};
}

ParamSet& ModelBundle::params(const std::string& which) {
    if (which == "unet") return unet->params();
    if (which == "garment") return encoder->params();
    if (which == "control") return controlnet->params();
    throw ParameterError("unknown parameter group '" + which + "'");
}

std::uint64_t ModelBundle::checksum(const std::string& which) const {
    return const_cast<ModelBundle*>(this)->params(which).checksum();
}

void save_checkpoint(const std::string& path, const ModelBundle& b) {
    json params = json::array();
    std::vector<float> blob;
    for (const ParamSet* set : {&b.unet->params(), &b.encoder->params(), &b.controlnet->params()})
        for (const auto& [name, p] : set->items()) {
            params.push_back({{"name", name}, {"shape", p.value.shape()}, {"offset", blob.size()}, {"count", p.value.size()}});
            for (double v : p.value.data()) blob.push_back(static_cast<float>(v));
        }
    const json manifest{
        {"model", kModelName},
        {"unet", unet_config_json(b.cfg)},
        {"schedule", {{"T", b.schedule.T}, {"beta_start", b.schedule.beta_start}, {"beta_end", b.schedule.beta_end}}},
        {"control", {{"image_channels", b.control_cfg.image_channels},
                     {"pose_slots", b.control_cfg.pose_slots},
                     {"codec_factor", b.control_cfg.codec_factor}}},
        {"text_embedder", {{"id", b.text->id()}, {"dim", b.text->dim()}, {"seed", b.text_seed}}},
        {"codec", {{"id", b.codec->id()}, {"factor", b.codec->factor()}}},
        {"stage", b.stage},
        {"parameters", params},
    };
    const std::string text = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
    char magic[8];
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("'" + path + "' is not a checkpoint");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error("truncated checkpoint manifest");
    const json m = json::parse(text);
    if (m.at("model") != kModelName) throw Error("checkpoint holds an unknown model");

    ModelBundle b;
    b.cfg = unet_config_from(m.at("unet"));
    const auto& s = m.at("schedule");
    b.schedule = make_schedule(s.at("T"), s.at("beta_start"), s.at("beta_end"));
    const auto& c = m.at("control");
    b.control_cfg = {c.at("image_channels"), c.at("pose_slots"), c.at("codec_factor")};
    b.text_seed = m.at("text_embedder").at("seed");
    b.stage = m.at("stage");
    build(b, 0, m.at("codec").at("factor"));

    std::vector<float> blob;
    {
        const auto start = in.tellg();
        in.seekg(0, std::ios::end);
        const auto bytes = static_cast<std::size_t>(in.tellg() - start);
        in.seekg(start);
        blob.resize(bytes / sizeof(float));
        in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    }
    std::size_t loaded = 0;
    for (const auto& e : m.at("parameters")) {
        const std::string name = e.at("name");
        const std::string group = name.substr(0, name.find('.'));
        ParamSet& set = b.params(group);
        if (!set.contains(name)) throw Error("checkpoint parameter '" + name + "' is unknown");
        Tensor& t = set.get(name).value;
        const std::size_t offset = e.at("offset"), count = e.at("count");
        if (e.at("shape").get<Shape>() != t.shape() || count != t.size() || offset + count > blob.size())
            throw Error("checkpoint parameter '" + name + "' has a bad shape or offset");
        for (std::size_t i = 0; i < count; ++i) t[i] = static_cast<double>(blob[offset + i]);
        ++loaded;
    }
    const std::size_t expected =
        b.unet->params().items().size() + b.encoder->params().items().size() + b.controlnet->params().items().size();
    if (loaded != expected) throw Error("checkpoint is missing parameters");
    return b;
}

}  // namespace garmentgen
