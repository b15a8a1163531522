#include "garmentgen/data_engine.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "garmentgen/image_io.hpp"
#include "json.hpp"

namespace garmentgen {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<EngineImage> generator_images(int n, std::mt19937_64& rng, int size) {
    if (n < 1) throw ParameterError("generator_images: n must be >= 1");
    std::vector<EngineImage> out;
    for (int i = 0; i < n; ++i) {
        FigureSpec spec = FigureSpec::random(rng);
        spec.texture = i % static_cast<int>(texture_families().size());
        ToyScene scene = render_scene(spec, size, size);
        out.push_back({"gen-" + std::to_string(i), scene.person, scene.garment, std::move(scene)});
    }
    return out;
}

namespace {

template <class Fn, class... Args>
auto call(const Backend<Fn>& b, const CallContext& ctx, Args&&... args) {
    if (!b.fn) throw BackendError(b.id.empty() ? "unset" : b.id, "backend not configured");
    try {
        return b.fn(ctx, std::forward<Args>(args)...);
    } catch (const BackendError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(b.id, e.what());
    }
}

const ToyScene& truth_of(const EngineImage& img, const std::string& backend) {
    if (!img.truth) throw BackendError(backend, "mock needs generator metadata for '" + img.id + "'");
    return *img.truth;
}

/// Longest name from `names` that appears in `text`, or "".
std::string find_word(const std::string& text, const std::vector<std::string>& names) {
    std::string best;
    for (const auto& n : names)
        if (n.size() > best.size() && text.find(n) != std::string::npos) best = n;
    return best;
}

std::vector<std::string> color_names() {
    std::vector<std::string> v;
    for (const auto& c : garment_palette()) v.push_back(c.name);
    return v;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

const std::vector<std::string> kTemplates{
    "a model wearing a {color} {pattern} garment, studio photo",
    "full body photo of a person in a {color} {pattern} garment",
    "a {color} {pattern} garment worn on a city street",
};

}  // namespace

std::string fill_template(const std::string& tmpl, const std::string& description) {
    std::string color = find_word(description, color_names());
    std::string pattern = find_word(description, texture_families());
    std::string out = tmpl;
    replace_all(out, "{color}", color.empty() ? "colorful" : color);
    replace_all(out, "{pattern}", pattern.empty() ? "plain" : pattern);
    return out;
}

EngineBackends mock_backends(std::uint64_t seed) {
    EngineBackends b;
    b.segmenter = {"mock-segmenter-1", seed, [](const CallContext&, const EngineImage& img) {
                       return truth_of(img, "mock-segmenter-1").parse;
                   }};
    b.pose_estimator = {"mock-densepose-1", seed, [](const CallContext&, const EngineImage& img) {
                            return truth_of(img, "mock-densepose-1").dense;
                        }};
    b.captioner = {"mock-captioner-1", seed, [](const CallContext&, const EngineImage& img) {
                       const FigureSpec& s = truth_of(img, "mock-captioner-1").spec;
                       return "a " + s.color_name() + " " + s.texture_name() + " garment";
                   }};
    b.template_source = {"mock-templates-1", seed, [](const CallContext& ctx, const std::string& description) {
                             const auto& t = kTemplates[fnv1a(description, ctx.seed) % kTemplates.size()];
                             return fill_template(t, description);
                         }};
    // Procedural fill: colour and pattern come from the prompt, the accent
    // colour from a prompt-and-seed hash.
    b.inpainter = {"mock-inpainter-1", seed,
                   [](const CallContext& ctx, const Tensor& image, const Tensor& mask, const PoseMap&,
                      const std::string& prompt) {
                       const auto& pal = garment_palette();
                       std::mt19937_64 rng(fnv1a(prompt, ctx.seed));
                       const std::string cname = find_word(prompt, color_names());
                       int ci = static_cast<int>(rng() % pal.size());
                       for (std::size_t i = 0; i < pal.size(); ++i)
                           if (pal[i].name == cname) ci = static_cast<int>(i);
                       const int ai = (ci + 1 + static_cast<int>(rng() % (pal.size() - 1))) % static_cast<int>(pal.size());
                       const auto& tex = texture_families();
                       const auto tpos = std::find(tex.begin(), tex.end(), find_word(prompt, tex));
                       const int texture = tpos == tex.end() ? 0 : static_cast<int>(tpos - tex.begin());
                       Tensor out = image;
                       const int h = image.dim(1), w = image.dim(2);
                       for (int y = 0; y < h; ++y)
                           for (int x = 0; x < w; ++x) {
                               if (mask.at(0, y, x) == 0.0) continue;
                               const Rgb c = texture_color(texture, pal[ci].rgb, pal[ai].rgb, x * 8 / w, y * 8 / h);
                               for (int k = 0; k < 3; ++k) out.at(k, y, x) = c[k];
                           }
                       return out;
                   }};
    return b;
}

void inject_fault(EngineBackends& b, const std::string& backend, const std::string& image_id) {
    auto wrap = [&](auto& be) {
        auto inner = be.fn;
        const std::string id = be.id;
        be.fn = [inner, id, image_id](const CallContext& ctx, const auto&... args) {
            if (ctx.image_id == image_id) throw BackendError(id, "injected fault on '" + image_id + "'");
            return inner(ctx, args...);
        };
    };
    if (backend == "segmenter") wrap(b.segmenter);
    else if (backend == "pose_estimator") wrap(b.pose_estimator);
    else if (backend == "captioner") wrap(b.captioner);
    else if (backend == "template_source") wrap(b.template_source);
    else if (backend == "inpainter") wrap(b.inpainter);
    else throw ConfigError("unknown backend '" + backend + "'");
}

ParseResult parse(const EngineImage& image, const EngineBackends& backends) {
    image.person.validate();
    const int h = image.person.height(), w = image.person.width();
    ParseResult r;
    r.parse = call(backends.segmenter, {image.id, backends.segmenter.seed}, image);
    if (r.parse.shape() != Shape{1, h, w}) throw BackendError(backends.segmenter.id, "parse map has wrong shape");
    for (double v : r.parse.data())
        if (v != std::floor(v) || v < 0.0 || v > static_cast<double>(kOther))
            throw BackendError(backends.segmenter.id, "parse label outside the label set");
    r.dense = call(backends.pose_estimator, {image.id, backends.pose_estimator.seed}, image);
    if (r.dense.kind != PoseKind::dense_coords || r.dense.data.rank() != 3 || r.dense.data.dim(1) != h ||
        r.dense.data.dim(2) != w)
        throw BackendError(backends.pose_estimator.id, "dense map has wrong kind or shape");
    try {
        r.dense.validate();
    } catch (const Error& e) {
        throw BackendError(backends.pose_estimator.id, e.what());
    }
    return r;
}

AgnosticResult derive_agnostic(const Tensor& image, const Tensor& parse_map, const PoseMap& dense, int radius,
                               MaskConvention convention) {
    if (radius < 0) throw ParameterError("derive_agnostic: radius must be >= 0");
    if (parse_map.rank() != 3 || parse_map.dim(0) != 1) throw ShapeError("parse map must be [1,H,W]");
    const int h = parse_map.dim(1), w = parse_map.dim(2);
    dense.validate();
    if (dense.data.dim(1) != h || dense.data.dim(2) != w) throw ShapeError("dense map dims differ from parse map");

    Tensor garment({1, h, w});
    bool any = false;
    for (std::size_t i = 0; i < garment.size(); ++i)
        if (parse_map[i] == static_cast<double>(kGarment)) garment[i] = 1.0, any = true;
    if (!any) throw ParameterError("derive_agnostic: image has no garment pixels");

    // Square structuring element, done as two separable 1-D max passes.
    Tensor rows({1, h, w}), mask({1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int d = -radius; d <= radius && rows.at(0, y, x) == 0.0; ++d) {
                const int xx = x + d;
                if (xx >= 0 && xx < w && garment.at(0, y, xx) != 0.0) rows.at(0, y, x) = 1.0;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool on = false;
            for (int d = -radius; d <= radius && !on; ++d) {
                const int yy = y + d;
                on = yy >= 0 && yy < h && rows.at(0, yy, x) != 0.0;
            }
            const bool body = parse_map.at(0, y, x) != static_cast<double>(kBackground) ||
                              (dense.kind == PoseKind::dense_coords &&
                               (dense.data.at(0, y, x) != 0.0 || dense.data.at(1, y, x) != 0.0));
            mask.at(0, y, x) = on && body ? 1.0 : 0.0;
        }
    TryOnCondition c = pack_condition(LatentTensor(image, Space::pixel), mask, PoseMap::none(h, w), convention);
    return {std::move(mask), std::move(c.masked_image)};
}

TagResult tag(const EngineImage& image, const EngineBackends& backends) {
    TagResult r;
    r.description = call(backends.captioner, {image.id, backends.captioner.seed}, image);
    if (r.description.empty()) throw BackendError(backends.captioner.id, "empty description");
    r.inpaint_prompt = call(backends.template_source, {image.id, backends.template_source.seed}, r.description);
    if (r.inpaint_prompt.empty()) throw BackendError(backends.template_source.id, "empty inpaint prompt");
    return r;
}

std::uint64_t draw_seed(const EngineBackends& backends, const std::string& image_id, int attempt) {
    return fnv1a(image_id + "#" + std::to_string(attempt), backends.inpainter.seed);
}

Tensor draw(const Tensor& image, const Tensor& mask, const PoseMap& dense, const std::string& prompt,
            const EngineBackends& backends, const CallContext& ctx) {
    require_binary_mask(mask);
    if (image.rank() != 3 || image.dim(1) != mask.dim(1) || image.dim(2) != mask.dim(2))
        throw ShapeError("draw: image and mask dims differ");
    const Tensor fill = call(backends.inpainter, ctx, image, mask, dense, prompt);
    if (fill.shape() != image.shape()) throw BackendError(backends.inpainter.id, "inpainted image has wrong shape");
    Tensor out = image;
    const int h = image.dim(1), w = image.dim(2);
    for (int c = 0; c < image.dim(0); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (mask.at(0, y, x) != 0.0) out.at(c, y, x) = fill.at(c, y, x);
    return out;
}

std::size_t Manifest::record_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.ok; }));
}
std::size_t Manifest::failure_count() const { return entries.size() - record_count(); }

namespace {

json provenance(const EngineBackends& b, std::uint64_t seed, int attempts) {
    auto one = [](const auto& be) { return json{{"id", be.id}, {"seed", be.seed}}; };
    return {{"engine_version", kEngineVersion},
            {"backends",
             {{"segmenter", one(b.segmenter)},
              {"pose_estimator", one(b.pose_estimator)},
              {"captioner", one(b.captioner)},
              {"template_source", one(b.template_source)},
              {"inpainter", one(b.inpainter)}}},
            {"draw_seed", seed},
            {"attempts", attempts}};
}

bool default_accept(const EngineSample& s) {
    const auto& m = s.record.agnostic_mask;
    return !s.tags.description.empty() && std::any_of(m.data().begin(), m.data().end(), [](double v) { return v != 0.0; });
}

ManifestEntry process(const EngineImage& img, const EngineBackends& b, const EngineOptions& opt) {
    ManifestEntry e;
    e.id = img.id;
    const auto& accept = opt.accept ? opt.accept : default_accept;
    std::uint64_t seed = 0;
    try {
        const ParseResult pr = parse(img, b);
        const AgnosticResult ag = derive_agnostic(img.person.data(), pr.parse, pr.dense, opt.agnostic_radius);
        const TagResult tags = tag(img, b);
        for (int attempt = 0; attempt < std::max(1, opt.max_attempts); ++attempt) {
            e.attempts = attempt + 1;
            seed = draw_seed(b, img.id, attempt);
            EngineSample s;
            s.tags = tags;
            DatasetRecord& r = s.record;
            r.id = img.id;
            r.person_image = {draw(img.person.data(), ag.mask, pr.dense, tags.inpaint_prompt, b, {img.id, seed}),
                              Space::pixel};
            r.garment_image = img.garment;
            r.dense_map = pr.dense;
            r.parse_map = pr.parse;
            r.agnostic_mask = ag.mask;
            r.garment_category_prompt = tags.description;
            r.target_prompt = tags.inpaint_prompt;
            r.validate();
            if (accept(s)) {
                e.ok = true;
                e.record = std::move(r);
                break;
            }
        }
        if (!e.ok) e.failed_backend = "accept", e.error = "no satisfactory sample";
    } catch (const BackendError& err) {
        e.failed_backend = err.backend;
        e.error = err.what();
    } catch (const Error& err) {
        e.failed_backend = "engine";
        e.error = err.what();
    }
    json j{{"id", e.id}, {"provenance", provenance(b, seed, e.attempts)}};
    if (e.ok) {
        for (const char* f : {"person", "garment", "dense", "parse", "mask"}) e.files[f] = e.id + "_" + f + ".png";
        j["status"] = "ok";
        for (const auto& [k, v] : e.files) j[k] = v;
        j["category_prompt"] = e.record.garment_category_prompt;
        j["target_prompt"] = e.record.target_prompt;
    } else {
        j["status"] = "failed";
        j["failed_backend"] = e.failed_backend;
        j["error"] = e.error;
    }
    e.json = j.dump();
    return e;
}

}  // namespace

Manifest run_engine(const std::vector<EngineImage>& images, const EngineBackends& backends, const std::string& out_dir,
                    const EngineOptions& options) {
    if (images.empty()) throw ParameterError("run_engine: no input images");
    fs::create_directories(out_dir);
    Manifest m;
    m.entries.resize(images.size());
    const auto n = static_cast<long>(images.size());
    // Records are independent; results land in input order.
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        ManifestEntry e = process(images[static_cast<std::size_t>(i)], backends, options);
        if (e.ok) {
            const fs::path dir(out_dir);
            write_png((dir / e.files["person"]).string(), e.record.person_image.data(), PngKind::image);
            write_png((dir / e.files["garment"]).string(), e.record.garment_image.data(), PngKind::image);
            write_png((dir / e.files["dense"]).string(), e.record.dense_map.data, PngKind::dense);
            write_png((dir / e.files["parse"]).string(), e.record.parse_map, PngKind::parse);
            write_png((dir / e.files["mask"]).string(), e.record.agnostic_mask, PngKind::mask);
        }
        m.entries[static_cast<std::size_t>(i)] = std::move(e);
    }
    std::ofstream out(fs::path(out_dir) / "manifest.jsonl", std::ios::binary);
    if (!out) throw Error("cannot write manifest in '" + out_dir + "'");
    for (const auto& e : m.entries) out << e.json << '\n';
    return m;
}

std::vector<DatasetRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest '" + path + "'");
    const fs::path dir = fs::path(path).parent_path();
    std::vector<DatasetRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("status", "") != "ok") continue;
        auto file = [&](const char* k) { return (dir / j.at(k).get<std::string>()).string(); };
        DatasetRecord r;
        r.id = j.at("id");
        r.person_image = {read_png(file("person"), PngKind::image), Space::pixel};
        r.garment_image = {read_png(file("garment"), PngKind::image), Space::pixel};
        r.dense_map = {read_png(file("dense"), PngKind::dense), PoseKind::dense_coords};
        r.parse_map = read_png(file("parse"), PngKind::parse);
        r.agnostic_mask = read_png(file("mask"), PngKind::mask);
        r.garment_category_prompt = j.at("category_prompt");
        r.target_prompt = j.at("target_prompt");
        r.validate();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace garmentgen
