#include "garmentgen/training.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace garmentgen {

void DatasetRecord::validate() const {
    person_image.validate();
    garment_image.validate();
    if (person_image.space() != Space::pixel || garment_image.space() != Space::pixel)
        throw ShapeError("record images must be pixel space");
    const int h = person_image.height(), w = person_image.width();
    require_binary_mask(agnostic_mask);
    auto same_hw = [&](const Tensor& t) { return t.rank() == 3 && t.dim(1) == h && t.dim(2) == w; };
    if (!same_hw(agnostic_mask) || !same_hw(parse_map) || !same_hw(dense_map.data) ||
        garment_image.height() != h || garment_image.width() != w)
        throw ShapeError("record '" + id + "': spatial dims differ across fields");
    if (!keypoint_map.data.empty() && !same_hw(keypoint_map.data)) throw ShapeError("keypoint map dims differ");
    if (dense_map.kind != PoseKind::dense_coords) throw ShapeError("record dense map must be dense_coords");
    dense_map.validate();
    for (double v : parse_map.data())
        if (v != std::floor(v) || v < 0.0 || v > static_cast<double>(kOther)) throw ShapeError("parse label out of range");
}

DatasetRecord record_from_scene(const ToyScene& s, std::string id) {
    DatasetRecord r;
    r.id = std::move(id);
    r.person_image = s.person;
    r.garment_image = s.garment;
    r.dense_map = s.dense;
    r.keypoint_map = s.keypoints;
    r.parse_map = s.parse;
    r.agnostic_mask = s.garment_mask;
    r.garment_category_prompt = s.spec.category_name();
    r.target_prompt = s.spec.target_prompt();
    return r;
}

std::vector<DatasetRecord> make_toy_dataset(int n, std::mt19937_64& rng, int size, int codec_factor) {
    if (n < 1) throw ParameterError("make_toy_dataset: n must be >= 1");
    std::vector<DatasetRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        FigureSpec spec = FigureSpec::random(rng);
        // Cycle texture families so small datasets still cover all of them.
        spec.texture = i % static_cast<int>(texture_families().size());
        out.push_back(record_from_scene(render_scene(spec, size, size / codec_factor), "toy-" + std::to_string(i)));
    }
    return out;
}

namespace {

enum class Pool { mean, max, majority };

Tensor pool_down(const Tensor& t, int f, Pool how) {
    const int c = t.dim(0), h = t.dim(1) / f, w = t.dim(2) / f;
    Tensor out({c, h, w});
    for (int k = 0; k < c; ++k)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::map<double, int> votes;
                double acc = how == Pool::max ? t.at(k, y * f, x * f) : 0.0;
                for (int by = 0; by < f; ++by)
                    for (int bx = 0; bx < f; ++bx) {
                        const double v = t.at(k, y * f + by, x * f + bx);
                        if (how == Pool::mean) acc += v;
                        else if (how == Pool::max) acc = std::max(acc, v);
                        else ++votes[v];
                    }
                if (how == Pool::mean) acc /= f * f;
                if (how == Pool::majority)  // ties go to the larger label, so garment wins over skin
                    acc = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
                              return a.second != b.second ? a.second < b.second : a.first < b.first;
                          })->first;
                out.at(k, y, x) = acc;
            }
    return out;
}

}  // namespace

DatasetRecord downsample_record(const DatasetRecord& rec, int size) {
    const int h = rec.person_image.height();
    if (size < 1 || h % size != 0 || rec.person_image.width() != h)
        throw ShapeError("downsample_record: " + std::to_string(h) + " px is not a square multiple of " +
                         std::to_string(size));
    const int f = h / size;
    if (f == 1) return rec;
    DatasetRecord r = rec;
    r.person_image = {pool_down(rec.person_image.data(), f, Pool::mean), Space::pixel};
    r.garment_image = {pool_down(rec.garment_image.data(), f, Pool::mean), Space::pixel};
    r.dense_map.data = pool_down(rec.dense_map.data, f, Pool::mean);
    if (!rec.keypoint_map.data.empty()) r.keypoint_map.data = pool_down(rec.keypoint_map.data, f, Pool::max);
    r.parse_map = pool_down(rec.parse_map, f, Pool::majority);
    r.agnostic_mask = pool_down(rec.agnostic_mask, f, Pool::max);
    return r;
}

std::pair<std::string, std::string> dispatch_prompts(const DatasetRecord& rec) {
    return {rec.garment_category_prompt, rec.target_prompt};
}

// ---------------------------------------------------------------------------
// Augmentation

Augmentation parse_augmentation(const std::string& s) {
    if (s == "flip") return Augmentation::flip;
    if (s == "shift") return Augmentation::shift;
    if (s == "scale") return Augmentation::scale;
    throw ConfigError("unknown augmentation '" + s + "'");
}

std::set<Augmentation> stage_augmentations(int stage) {
    if (stage == 2) return {Augmentation::flip, Augmentation::shift, Augmentation::scale};
    return {Augmentation::flip};
}

AugmentParams sample_augment(std::mt19937_64& rng, const std::set<Augmentation>& enabled) {
    AugmentParams p;
    std::uniform_int_distribution<int> coin(0, 1), shift(-1, 1);
    std::uniform_real_distribution<double> scale(0.9, 1.1);
    if (enabled.count(Augmentation::flip)) p.flip = coin(rng) == 1;
    if (enabled.count(Augmentation::shift)) {
        p.shift_x = 4 * shift(rng);
        p.shift_y = 4 * shift(rng);
    }
    if (enabled.count(Augmentation::scale)) p.scale = scale(rng);
    return p;
}

namespace {

Tensor transform(const Tensor& t, const AugmentParams& p) {
    if (t.empty()) return t;
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    Tensor out(t.shape());
    auto source = [&](int pos, int shift, int extent) {
        const double centre = extent / 2.0;
        const double s = centre + (pos - shift + 0.5 - centre) / p.scale - 0.5;
        return std::clamp(static_cast<int>(std::lround(s)), 0, extent - 1);
    };
    for (int y = 0; y < h; ++y) {
        const int sy = source(y, p.shift_y, h);
        for (int x = 0; x < w; ++x) {
            int sx = source(x, p.shift_x, w);
            if (p.flip) sx = w - 1 - sx;
            for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = t.at(ch, sy, sx);
        }
    }
    return out;
}

}  // namespace

DatasetRecord apply_augment(const DatasetRecord& rec, const AugmentParams& p) {
    DatasetRecord r = rec;
    r.person_image = {transform(rec.person_image.data(), p), Space::pixel};
    r.garment_image = {transform(rec.garment_image.data(), p), Space::pixel};
    r.dense_map.data = transform(rec.dense_map.data, p);
    r.keypoint_map.data = transform(rec.keypoint_map.data, p);
    r.parse_map = transform(rec.parse_map, p);
    r.agnostic_mask = transform(rec.agnostic_mask, p);
    return r;
}

DatasetRecord augment(const DatasetRecord& rec, std::mt19937_64& rng, int stage,
                      const std::set<Augmentation>& enabled) {
    const auto allowed = stage_augmentations(stage);
    for (auto a : enabled)
        if (!allowed.count(a)) throw ConfigError("augmentation not allowed in stage " + std::to_string(stage));
    return apply_augment(rec, sample_augment(rng, enabled));
}

// ---------------------------------------------------------------------------
// Optimizer

void Optimizer::step(ParamSet& params, const GradStore& grads) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) continue;
        Parameter& p = params.get(name);
        if (!p.trainable) continue;
        require_same_shape(p.value, g, "optimizer step");
        Tensor& m = m_[name];
        if (m.empty()) m = Tensor::like(g);
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                m[i] = cfg_.momentum * m[i] + g[i];
                p.value[i] -= cfg_.learning_rate * m[i];
            }
        } else {
            Tensor& v = v_[name];
            if (v.empty()) v = Tensor::like(g);
            for (std::size_t i = 0; i < g.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g[i] * g[i];
                p.value[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
            }
        }
        round_to_f32(p.value);
    }
}

// ---------------------------------------------------------------------------
// Losses and steps

void TrainingConfig::validate() const {
    if (stage < 0 || stage > 2) throw ConfigError("training stage must be 0, 1 or 2");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (!(optimizer.learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (text_dropout < 0 || text_dropout > 1) throw ConfigError("text_dropout must be in [0,1]");
    if (pose_kinds.empty()) throw ConfigError("pose_kinds must not be empty");
    const auto allowed = stage_augmentations(stage);
    for (auto a : augmentations)
        if (!allowed.count(a)) throw ConfigError("augmentation not allowed in stage " + std::to_string(stage));
}

std::vector<TrainSample> draw_batch(const std::vector<DatasetRecord>& data, const ModelBundle& bundle,
                                    const TrainingConfig& cfg, std::mt19937_64& rng) {
    if (data.empty()) throw ParameterError("draw_batch: empty dataset");
    std::uniform_int_distribution<int> tdist(0, bundle.schedule.T - 1);
    std::bernoulli_distribution drop(cfg.text_dropout);
    std::vector<TrainSample> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
        TrainSample s;
        const auto& rec = data[rng() % data.size()];
        s.record = cfg.augmentations.empty() ? rec : augment(rec, rng, cfg.stage, cfg.augmentations);
        s.t = tdist(rng);
        const int f = bundle.codec->factor();
        s.eps = Tensor::randn({bundle.cfg.latent_channels, rec.person_image.height() / f, rec.person_image.width() / f},
                              rng);
        s.drop_text = drop(rng);
        s.pose = cfg.pose_kinds[rng() % cfg.pose_kinds.size()];
        batch.push_back(std::move(s));
    }
    return batch;
}

std::string trainable_group(int stage) {
    switch (stage) {
        case 0: return "unet";
        case 1: return "garment";
        case 2: return "control";
    }
    throw ConfigError("no trainable group for stage " + std::to_string(stage));
}

void configure_stage(ModelBundle& bundle, int stage) {
    const std::string group = trainable_group(stage);
    for (const char* g : {"unet", "garment", "control"}) bundle.params(g).set_trainable(group == g);
}

namespace {

PoseMap pose_for(const DatasetRecord& rec, PoseKind kind) {
    switch (kind) {
        case PoseKind::none: return PoseMap::none(rec.person_image.height(), rec.person_image.width());
        case PoseKind::keypoint_render:
            if (rec.keypoint_map.data.empty()) throw ShapeError("record '" + rec.id + "' has no keypoint map");
            return rec.keypoint_map;
        case PoseKind::dense_coords: return rec.dense_map;
    }
    return rec.dense_map;
}

}  // namespace

double batch_loss(const ModelBundle& b, int stage, const std::vector<TrainSample>& batch, GradStore* grads,
                  AttentionMode mode, bool cached_garment_t) {
    if (batch.empty()) throw ParameterError("batch_loss: empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& s : batch) {
        const auto [garment_prompt, target_prompt] = dispatch_prompts(s.record);
        const Tensor z0 = b.codec->encode(s.record.person_image).data();
        const Var x_t = constant(add_noise(z0, s.eps, s.t, b.schedule));
        const Var text = constant(b.text->embed(s.drop_text ? "" : target_prompt).vectors);

        InjectionVars inj;
        if (stage >= 1 && mode != AttentionMode::none) {
            const Tensor zg = b.codec->encode(s.record.garment_image).data();
            inj.garment = b.encoder->forward_var(constant(zg), cached_garment_t ? 0 : s.t,
                                                 constant(b.text->embed(garment_prompt).vectors));
            inj.mode = mode;
        }
        if (stage == 2) {
            const auto cond = pack_condition(s.record.person_image, s.record.agnostic_mask, pose_for(s.record, s.pose));
            inj.residuals = b.controlnet->forward_var(x_t, s.t, text, b.controlnet->condition_input(cond));
        }
        const Var loss = ops::mse(b.unet->forward_var(x_t, s.t, text, inj), s.eps);
        if (grads) backward(loss, *grads, inv);
        total += loss->value[0] * inv;
    }
    if (!std::isfinite(total)) throw NumericalError("training loss is not finite");
    return total;
}

std::string to_jsonl(const StepStats& s) {
    nlohmann::json j{{"step", s.step}, {"stage", s.stage}, {"loss", s.loss}, {"grad_norm", s.grad_norm}};
    return j.dump();
}

Trainer::Trainer(ModelBundle& bundle, TrainingConfig cfg, std::vector<DatasetRecord> data)
    : bundle_(bundle), cfg_(std::move(cfg)), data_(std::move(data)), opt_(cfg_.optimizer), rng_(cfg_.seed) {
    cfg_.validate();
    if (data_.empty()) throw ConfigError("training needs at least one record");
    for (const auto& r : data_) r.validate();
    if (cfg_.stage == 2 && bundle_.stage < 1) throw ConfigError("stage 2 requires a stage-1 checkpoint");
    if (bundle_.stage < cfg_.stage) {
        if (cfg_.stage == 1) bundle_.encoder->init_from(*bundle_.unet);
        if (cfg_.stage == 2) bundle_.controlnet->init_from(*bundle_.unet);
        bundle_.stage = cfg_.stage;
    }
    configure_stage(bundle_, cfg_.stage);
}

StepStats Trainer::step() {
    const auto batch = draw_batch(data_, bundle_, cfg_, rng_);
    GradStore grads;
    StepStats st;
    st.step = ++step_;
    st.stage = cfg_.stage;
    st.loss = batch_loss(bundle_, cfg_.stage, batch, &grads, cfg_.attention_mode, cfg_.cached_garment_t);
    for (const auto& [name, g] : grads) {
        double sq = 0;
        for (double v : g.data()) sq += v * v;
        st.grad_norm[name.substr(0, name.find('.'))] += sq;
    }
    for (auto& [group, sq] : st.grad_norm) sq = std::sqrt(sq);
    opt_.step(bundle_.params(trainable_group(cfg_.stage)), grads);
    return st;
}

std::vector<StepStats> Trainer::run(const std::function<void(const StepStats&)>& on_step) {
    std::vector<StepStats> out;
    while (step_ < cfg_.max_steps) {
        out.push_back(step());
        if (on_step) on_step(out.back());
    }
    return out;
}

std::vector<FdResult> finite_difference_check(ModelBundle& bundle, int stage, const std::vector<TrainSample>& batch,
                                              int count, std::uint64_t seed, double h, double min_grad) {
    GradStore grads;
    batch_loss(bundle, stage, batch, &grads);
    ParamSet& params = bundle.params(trainable_group(stage));
    std::vector<std::string> names;
    for (const auto& [name, g] : grads)
        if (params.contains(name)) names.push_back(name);
    if (names.empty()) throw NumericalError("no gradients reached the trainable parameters");

    std::mt19937_64 rng(seed);
    std::vector<FdResult> out;
    for (int attempts = 0; static_cast<int>(out.size()) < count && attempts < 100000; ++attempts) {
        const std::string& name = names[rng() % names.size()];
        const Tensor& g = grads.at(name);
        const std::size_t i = rng() % g.size();
        if (std::abs(g[i]) <= min_grad) continue;
        Tensor& w = params.get(name).value;
        const double saved = w[i];
        w[i] = saved + h;
        const double up = batch_loss(bundle, stage, batch);
        w[i] = saved - h;
        const double down = batch_loss(bundle, stage, batch);
        w[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - g[i]) / std::max(std::abs(g[i]), std::abs(numeric));
        out.push_back({name, i, g[i], numeric, rel});
    }
    return out;
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
    std::vector<double> out(xs.size());
    double acc = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += xs[i];
        if (i >= window) acc -= xs[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

}  // namespace garmentgen
