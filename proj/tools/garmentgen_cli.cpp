// garmentgen: train, generate, tryon, synthesize, evaluate, report.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
// Logs are JSON lines on stderr; artifacts go under --out (default io.out_dir).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "garmentgen/app.hpp"
#include "garmentgen/data_engine.hpp"
#include "garmentgen/evalkit.hpp"
#include "garmentgen/image_io.hpp"
#include "json.hpp"

using namespace garmentgen;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void log(json j) { std::cerr << j.dump() << std::endl; }

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out;
};

struct Resolved {
    AppConfig cfg;
    fs::path out;
    std::uint64_t seed = 0;
};

/// Loads the config, applies overrides and --seed, and snapshots the result.
Resolved resolve(const Common& c, const std::string& command) {
    Resolved r;
    r.cfg = c.config_path.empty() ? default_config() : load_config(c.config_path, c.overrides);
    if (c.config_path.empty()) {
        for (const auto& o : c.overrides) apply_override(r.cfg, o);
        validate(r.cfg);
    }
    if (c.seed) r.cfg.seed = *c.seed;
    r.seed = r.cfg.seed;
    r.out = c.out.empty() ? fs::path(r.cfg.out_dir) : fs::path(c.out);
    fs::create_directories(r.out);
    std::ofstream snap(r.out / (command + "_config.yaml"));
    snap << "# resolved configuration; training.seed is the root seed\n" << to_yaml(r.cfg);
    log({{"event", "config"}, {"command", command}, {"seed", r.seed}, {"snapshot", (r.out / (command + "_config.yaml")).string()}});
    return r;
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
    app->add_option("--config", c.config_path, "YAML config file")->check(CLI::ExistingFile);
    app->add_option("--overrides", c.overrides, "key=value overrides");
    app->add_option("--seed", c.seed, "root seed (overrides training.seed)");
    if (with_out) app->add_option("--out", c.out, "output directory");
}

int cmd_train(const Common& c) {
    Resolved r = resolve(c, "train");
    bool loaded = false;
    ModelBundle bundle = load_or_create(r.cfg, r.seed, &loaded);
    log({{"event", "model"}, {"loaded", loaded}, {"checkpoint", r.cfg.checkpoint}, {"completed_stage", bundle.stage}});
    TrainingConfig tc = training_config(r.cfg, r.cfg.stage);
    auto data = stage_dataset(r.cfg, r.cfg.stage);
    if (std::any_of(data.begin(), data.end(), [](const auto& d) { return d.keypoint_map.data.empty(); }))
        std::erase(tc.pose_kinds, PoseKind::keypoint_render);
    Trainer trainer(bundle, tc, std::move(data));
    std::ofstream steplog(r.out / "train_log.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run([&](const StepStats& s) {
        const std::string line = to_jsonl(s);
        steplog << line << '\n';
        std::cerr << line << std::endl;
    });
    const fs::path ckpt = r.cfg.checkpoint.empty() ? r.out / "checkpoint.sgck" : fs::path(r.cfg.checkpoint);
    if (!ckpt.parent_path().empty()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(ckpt.string(), bundle);
    log({{"event", "done"},
         {"checkpoint", ckpt.string()},
         {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
    return 0;
}

ModelBundle model_for_inference(const Resolved& r) {
    bool loaded = false;
    ModelBundle b = load_or_create(r.cfg, r.seed, &loaded);
    if (!loaded) log({{"event", "warning"}, {"message", "no checkpoint at '" + r.cfg.checkpoint + "'; using untrained weights"}});
    return b;
}

struct InferenceArgs {
    int record = 0;
    bool all_records = false;
};

/// Runs `fn(record)` for the chosen records and writes an evaluation manifest.
int run_inference(const Common& c, const InferenceArgs& a, const std::string& command,
                  const std::function<LatentTensor(const ModelBundle&, const AppConfig&, const DatasetRecord&,
                                                   std::uint64_t)>& fn) {
    Resolved r = resolve(c, command);
    const ModelBundle bundle = model_for_inference(r);
    const auto data = stage_dataset(r.cfg, 1);
    std::vector<std::size_t> which;
    if (a.all_records) {
        for (std::size_t i = 0; i < data.size(); ++i) which.push_back(i);
    } else {
        if (a.record < 0 || static_cast<std::size_t>(a.record) >= data.size())
            throw ConfigError("--record must be in [0, " + std::to_string(data.size()) + ")");
        which.push_back(static_cast<std::size_t>(a.record));
    }
    std::ofstream manifest(r.out / (command + "_results.jsonl"));
    for (std::size_t i : which) {
        const DatasetRecord& rec = data[i];
        const LatentTensor img = fn(bundle, r.cfg, rec, r.seed);
        const std::string stem = command + "_" + rec.id + "_seed" + std::to_string(r.seed);
        write_png((r.out / (stem + ".png")).string(), img.data(), PngKind::image);
        write_png((r.out / (stem + "_reference.png")).string(), rec.person_image.data(), PngKind::image);
        write_png((r.out / (stem + "_garment.png")).string(), rec.garment_image.data(), PngKind::image);
        write_png((r.out / (stem + "_mask.png")).string(), rec.agnostic_mask, PngKind::mask);
        manifest << json{{"method", r.cfg.attention_mode},
                         {"result", stem + ".png"},
                         {"reference", stem + "_reference.png"},
                         {"garment", stem + "_garment.png"},
                         {"mask", stem + "_mask.png"}}
                        .dump()
                 << '\n';
        log({{"event", "image"}, {"record", rec.id}, {"path", (r.out / (stem + ".png")).string()},
             {"mse_vs_reference", mean_squared_diff(img.data(), rec.person_image.data())}});
    }
    return 0;
}

int cmd_synthesize(const Common& c, int count, const std::string& fail_backend, const std::string& fail_image) {
    Resolved r = resolve(c, "synthesize");
    std::mt19937_64 rng(r.seed);
    const auto images = generator_images(count, rng);
    EngineBackends backends = mock_backends(r.seed);
    if (!fail_backend.empty()) inject_fault(backends, fail_backend, fail_image);
    EngineOptions opt;
    opt.agnostic_radius = r.cfg.agnostic_radius;
    const Manifest m = run_engine(images, backends, r.out.string(), opt);
    for (const auto& e : m.entries)
        if (!e.ok) log({{"event", "record_failed"}, {"id", e.id}, {"backend", e.failed_backend}, {"error", e.error}});
    log({{"event", "done"}, {"manifest", (r.out / "manifest.jsonl").string()}, {"records", m.record_count()},
         {"failures", m.failure_count()}});
    return 0;
}

void write_text(const fs::path& p, const std::string& text) {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    std::ofstream o(p, std::ios::binary);
    if (!o) throw Error("cannot write '" + p.string() + "'");
    o << text;
}

ReportFormat format_for(const std::string& requested, const fs::path& out) {
    if (!requested.empty()) return parse_report_format(requested);
    const auto ext = out.extension().string();
    if (ext == ".csv") return ReportFormat::csv;
    if (ext == ".json") return ReportFormat::json;
    return ReportFormat::markdown;
}

int cmd_evaluate(const Common& c, const std::string& manifest, const std::string& out, const std::string& format) {
    Resolved r = resolve(c, "evaluate");
    const Embedder emb = toy_embedder(r.seed);
    EvalReport rep = evaluate_manifest(manifest, emb, r.seed);
    const fs::path dest = out.empty() ? r.out / "report.md" : fs::path(out);
    write_text(dest, emit_report(rep, format_for(format, dest)));
    log({{"event", "done"}, {"report", dest.string()}});
    return 0;
}

int cmd_report(const Common& c, const std::string& study, const std::string& out, const std::string& format) {
    Resolved r = resolve(c, "report");
    std::ifstream in(study);
    if (!in) throw ConfigError("cannot open study responses '" + study + "'");
    std::vector<StudyResponse> responses;
    std::vector<std::string> methods;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        StudyResponse s;
        s.respondent_id = j.at("respondent");
        const std::string aspect = j.at("aspect");
        if (aspect == "identity") s.aspect = StudyAspect::identity;
        else if (aspect == "quality") s.aspect = StudyAspect::quality;
        else if (aspect == "preservation") s.aspect = StudyAspect::preservation;
        else throw ConfigError("unknown study aspect '" + aspect + "'");
        s.ranking = j.at("ranking").get<std::vector<std::string>>();
        if (methods.empty()) methods = s.ranking;
        responses.push_back(std::move(s));
    }
    if (responses.empty()) throw ConfigError("study file '" + study + "' has no responses");
    std::sort(methods.begin(), methods.end());
    EvalReport rep;
    rep.methods = methods;
    rep.study = human_scores(responses, methods, parse_rank_weighting(r.cfg.rank_weighting));
    rep.metadata = {{"dataset", fs::path(study).filename().string()},
                    {"seed", std::to_string(r.seed)},
                    {"embedder", "none"},
                    {"rank_weighting", r.cfg.rank_weighting}};
    const fs::path dest = out.empty() ? r.out / "study.md" : fs::path(out);
    write_text(dest, emit_report(rep, format_for(format, dest)));
    log({{"event", "done"}, {"report", dest.string()}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"garment-conditioned diffusion toolkit"};
    app.require_subcommand(1);
    Common common;

    auto* train = app.add_subcommand("train", "train one stage and write a checkpoint");
    add_common(train, common);

    InferenceArgs inf;
    auto* generate = app.add_subcommand("generate", "garment-conditioned text-to-image");
    add_common(generate, common);
    generate->add_option("--record", inf.record, "dataset record to take garment and prompts from");
    generate->add_flag("--all-records", inf.all_records, "run every record");

    auto* tryon = app.add_subcommand("tryon", "virtual try-on on a dataset record");
    add_common(tryon, common);
    tryon->add_option("--record", inf.record, "dataset record to dress");
    tryon->add_flag("--all-records", inf.all_records, "run every record");

    int count = 4;
    std::string fail_backend, fail_image;
    auto* synth = app.add_subcommand("synthesize", "run the data engine with mock backends");
    add_common(synth, common);
    synth->add_option("--count", count, "generator images to process")->check(CLI::PositiveNumber);
    synth->add_option("--fail-backend", fail_backend, "inject a fault into this backend");
    synth->add_option("--fail-image", fail_image, "image id the injected fault fires on");

    std::string manifest, report_out, format, study;
    auto* evaluate = app.add_subcommand("evaluate", "score an evaluation manifest");
    add_common(evaluate, common, false);
    evaluate->add_option("--manifest", manifest, "evaluation manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", report_out, "report path; extension picks the format");
    evaluate->add_option("--format", format, "markdown, csv or json");

    auto* report = app.add_subcommand("report", "aggregate a ranking study");
    add_common(report, common, false);
    report->add_option("--study", study, "study responses (JSON lines)")->required()->check(CLI::ExistingFile);
    report->add_option("--out", report_out, "report path; extension picks the format");
    report->add_option("--format", format, "markdown, csv or json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        log({{"event", "error"}, {"kind", "usage"}, {"message", e.what()}});
        return 2;
    }

    try {
        if (*train) return cmd_train(common);
        if (*generate)
            return run_inference(common, inf, "generate",
                                 [](const ModelBundle& b, const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed) {
                                     return generate_gc_t2i(b.refs(), generation_request(cfg, rec, seed),
                                                            sampler_options(cfg));
                                 });
        if (*tryon)
            return run_inference(common, inf, "tryon",
                                 [](const ModelBundle& b, const AppConfig& cfg, const DatasetRecord& rec, std::uint64_t seed) {
                                     return garmentgen::tryon(b.refs(), tryon_request(cfg, rec, seed), sampler_options(cfg));
                                 });
        if (*synth) return cmd_synthesize(common, count, fail_backend, fail_image);
        if (*evaluate) {
            common.out = fs::path(report_out.empty() ? "." : report_out).parent_path().string();
            return cmd_evaluate(common, manifest, report_out, format);
        }
        if (*report) {
            common.out = fs::path(report_out.empty() ? "." : report_out).parent_path().string();
            return cmd_report(common, study, report_out, format);
        }
    } catch (const ConfigError& e) {
        log({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        log({{"event", "error"}, {"kind", "runtime"}, {"message", e.what()}});
        return 1;
    }
    return 0;
}
