// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Criteria 6 and 12 share one trained model: a base denoiser is pretrained on
// generic toy records (standing in for a pretrained base model), the garment
// encoder is then overfit on 8 records, and a short control-network stage
// follows for the pose-swap check.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "garmentgen/app.hpp"
#include "garmentgen/data_engine.hpp"
#include "garmentgen/evalkit.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"

using namespace garmentgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Overfit run settings.
constexpr int kBaseRecords = 48;
constexpr int kBaseSteps = 3000;
constexpr double kBaseLr = 2e-3;
constexpr int kOverfitRecords = 8;
constexpr int kOverfitSteps = 2000;
constexpr double kOverfitLr = 3e-3;
constexpr int kBatch = 8;
constexpr int kControlSteps = 150;
constexpr double kControlLr = 1e-3;

// Pinned tolerances.
constexpr double kIdentityTol = 1e-6;
constexpr double kAsaCsaGap = 1e-4;
constexpr double kNeutralityTol = 1e-6;
constexpr double kPreserveMse = 1e-6;
constexpr double kFdRel = 1e-2;
constexpr double kMaReduction = 0.80;
constexpr double kOverfitMinutes = 10.0;
constexpr double kMemorizeMse = 0.05;
constexpr double kDdimTol = 1e-9;
constexpr double kPoseGap = 1e-3;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<DatasetRecord> toy(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return make_toy_dataset(n, rng);
}

GenerationRequest gen_request(const DatasetRecord& r, std::uint64_t seed, int steps = 25) {
    GenerationRequest g;
    g.garment_image = r.garment_image;
    std::tie(g.garment_prompt, g.target_prompt) = dispatch_prompts(r);
    g.seed = seed;
    g.steps = steps;
    return g;
}

TryOnRequest tryon_request(const DatasetRecord& garment, const DatasetRecord& person, const Tensor& mask,
                           std::uint64_t seed, int steps = 25) {
    TryOnRequest r;
    static_cast<GenerationRequest&>(r) = gen_request(garment, seed, steps);
    r.target_prompt = person.target_prompt;
    r.source_image = person.person_image;
    r.mask = mask;
    r.pose = person.dense_map;
    return r;
}

double outside_mse(const Tensor& out, const Tensor& ref, const Tensor& mask) {
    double se = 0.0, n = 0.0;
    for (int c = 0; c < out.dim(0); ++c)
        for (int y = 0; y < out.dim(1); ++y)
            for (int x = 0; x < out.dim(2); ++x)
                if (mask.at(0, y, x) == 0.0) {
                    se += std::pow(out.at(c, y, x) - ref.at(c, y, x), 2);
                    n += 1.0;
                }
    return n > 0 ? se / n : 0.0;
}

bool nonzero_outside(const GradStore& g, const std::string& group) {
    for (const auto& [name, t] : g)
        if (name.rfind(group + ".", 0) != 0)
            for (double v : t.data())
                if (v != 0.0) return true;
    return false;
}

bool nonzero_inside(const GradStore& g, const std::string& group) {
    for (const auto& [name, t] : g)
        if (name.rfind(group + ".", 0) == 0)
            for (double v : t.data())
                if (v != 0.0) return true;
    return false;
}

// ---------------------------------------------------------------------------

void asa_identity(Outcome& o) {
    const auto t0 = Clock::now();
    const AppConfig cfg = default_config();
    const ModelBundle b = ModelBundle::create(cfg, 101);
    const auto data = toy(2, 11);
    SamplerOptions zero_v;
    zero_v.garment_kv_hook = [](GarmentKV& kv) {
        for (auto& [site, p] : kv.sites) p.v = Tensor(p.v.shape());
    };
    GenerationRequest asa_req = gen_request(data[0], 3), none_req = asa_req;
    none_req.attention_mode = AttentionMode::none;
    const double gen_gap = max_abs_diff(generate_gc_t2i(b.refs(), asa_req, zero_v).data(),
                                        generate_gc_t2i(b.refs(), none_req).data());
    TryOnRequest t_asa = tryon_request(data[0], data[1], data[1].agnostic_mask, 3), t_none = t_asa;
    t_none.attention_mode = AttentionMode::none;
    const double tryon_gap =
        max_abs_diff(tryon(b.refs(), t_asa, zero_v).data(), tryon(b.refs(), t_none).data());
    const double secs = seconds_since(t0);
    o.detail << "t2i max|diff| " << gen_gap << ", try-on max|diff| " << tryon_gap << ", " << secs << " s";
    o.require(gen_gap <= kIdentityTol && tryon_gap <= kIdentityTol, "identity");
    o.require(secs < 30.0, "runtime");
}

void asa_vs_csa(Outcome& o) {
    double min_gap = 1e300;
    bool hull = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const Tensor q = Tensor::randn({16, 8}, rng), ku = Tensor::randn({16, 8}, rng), vu = Tensor::randn({16, 8}, rng);
        const Tensor kg = Tensor::randn({12, 8}, rng), vg = Tensor::randn({12, 8}, rng);
        min_gap = std::min(min_gap, max_abs_diff(asa(q, ku, vu, kg, vg), csa(q, ku, vu, kg, vg)));
        const Tensor c = csa(q, ku, vu, kg, vg);
        for (int col = 0; col < 8; ++col) {
            double lo = 1e300, hi = -1e300;
            for (const Tensor* v : {&vu, &vg})
                for (int r = 0; r < v->dim(0); ++r) {
                    lo = std::min(lo, v->at(r, col));
                    hi = std::max(hi, v->at(r, col));
                }
            for (int r = 0; r < c.dim(0); ++r) hull &= c.at(r, col) >= lo - 1e-12 && c.at(r, col) <= hi + 1e-12;
        }
    }
    // Every value row equal to 1: the hull is {1}, asa returns 2.
    std::mt19937_64 rng(99);
    const Tensor q = Tensor::randn({4, 8}, rng), k = Tensor::randn({4, 8}, rng), kg = Tensor::randn({3, 8}, rng);
    const double asa_val = asa(q, k, Tensor({4, 8}, 1.0), kg, Tensor({3, 8}, 1.0)).at(0, 0);
    const double csa_val = csa(q, k, Tensor({4, 8}, 1.0), kg, Tensor({3, 8}, 1.0)).at(0, 0);
    o.detail << "min over 20 seeds of max|asa-csa| " << min_gap << ", csa inside hull " << (hull ? "yes" : "no")
             << ", constructed case asa " << asa_val << " vs hull max 1 (csa " << csa_val << ")";
    o.require(min_gap > kAsaCsaGap, "gap");
    o.require(hull, "csa hull");
    o.require(asa_val > 1.0 + 1e-6, "asa violation");
}

void controlnet_neutrality(Outcome& o) {
    const ModelBundle b = ModelBundle::create(default_config(), 7);
    const auto data = toy(3, 12);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        const TryOnRequest req = tryon_request(data[i], data[(i + 1) % 3], data[(i + 1) % 3].agnostic_mask, 20 + i);
        for (bool composite : {true, false}) {
            SamplerOptions opt;
            opt.pixel_composite = composite;
            worst = std::max(worst, max_abs_diff(tryon(b.refs(), req, opt).data(),
                                                 oracle::tryon_without_control(b.refs(), req, opt.clip_x0, composite)));
        }
    }
    o.detail << "max|with fresh control - without control| " << worst;
    o.require(worst <= kNeutralityTol, "neutrality");
}

void preservation(Outcome& o) {
    const ModelBundle b = ModelBundle::create(default_config(), 5);
    const auto data = toy(2, 13);
    std::vector<Tensor> masks{data[1].agnostic_mask, Tensor({1, 32, 32}), Tensor({1, 32, 32}, 1.0)};
    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.35);
    for (int i = 0; i < 3; ++i) {
        Tensor m({1, 32, 32});
        for (double& v : m.vec()) v = coin(rng) ? 1.0 : 0.0;
        masks.push_back(m);
    }
    double worst_mse = 0.0;
    bool latent_exact = true;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const TryOnRequest req = tryon_request(data[0], data[1], masks[i], 40 + i);
        const Tensor rt = b.codec->decode(b.codec->encode(req.source_image)).data();
        for (bool composite : {true, false}) {
            SamplerOptions opt;
            opt.pixel_composite = composite;
            TryOnTrace tr;
            const Tensor out = tryon(b.refs(), req, opt, &tr).data();
            // Without the pixel composite only whole unmasked latent blocks are guaranteed.
            Tensor region = masks[i];
            if (!composite) {
                const Tensor up = nearest_upsample(tr.mask_latent, 4);
                for (std::size_t k = 0; k < region.size(); ++k) region[k] = std::max(region[k], up[k]);
            }
            worst_mse = std::max(worst_mse, outside_mse(out, rt, region));
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        if (tr.mask_latent.at(0, y, x) == 0.0)
                            latent_exact &= tr.final_latent.at(c, y, x) == tr.source_latent.at(c, y, x);
        }
    }
    o.detail << masks.size() << " masks, worst outside-mask MSE " << worst_mse << ", latent m=0 entries exact "
             << (latent_exact ? "yes" : "no");
    o.require(worst_mse < kPreserveMse, "mse");
    o.require(latent_exact, "latent equality");
}

void gating(Outcome& o) {
    const auto data = toy(4, 14);
    ModelBundle b = ModelBundle::create(default_config(), 9);
    TrainingConfig c1;
    c1.stage = 1;
    c1.batch_size = 2;
    c1.max_steps = 100;
    c1.optimizer = {OptimizerKind::adam, 1e-3};
    c1.augmentations = stage_augmentations(1);
    Trainer t1(b, c1, data);
    std::mt19937_64 rng(3);
    GradStore g1;
    batch_loss(b, 1, draw_batch(data, b, c1, rng), &g1);
    const bool only_garment = nonzero_inside(g1, "garment") && !nonzero_outside(g1, "garment");
    const auto unet0 = b.checksum("unet");
    bool unet_constant = true;
    t1.run([&](const StepStats&) { unet_constant &= b.checksum("unet") == unet0; });
    std::mt19937_64 frng(5);
    const auto fd1 = finite_difference_check(b, 1, draw_batch(data, b, c1, frng), 5, 17);

    TrainingConfig c2 = c1;
    c2.stage = 2;
    c2.max_steps = 20;
    c2.augmentations = stage_augmentations(2);
    Trainer t2(b, c2, data);
    bool only_control_trainable = true;
    for (const char* g : {"unet", "garment", "control"})
        for (const auto& [name, p] : b.params(g).items()) only_control_trainable &= p.trainable == (std::string(g) == "control");
    const auto garment0 = b.checksum("garment"), unet1 = b.checksum("unet");
    bool frozen_constant = true, only_control = true;
    t2.run([&](const StepStats& s) {
        frozen_constant &= b.checksum("garment") == garment0 && b.checksum("unet") == unet1;
        for (const auto& [group, norm] : s.grad_norm) only_control &= group == "control" || norm == 0.0;
    });
    std::mt19937_64 frng2(6);
    const auto fd2 = finite_difference_check(b, 2, draw_batch(data, b, c2, frng2), 5, 18);

    double worst1 = 0.0, worst2 = 0.0;
    for (const auto& r : fd1) worst1 = std::max(worst1, r.rel_error);
    for (const auto& r : fd2) worst2 = std::max(worst2, r.rel_error);
    o.detail << "stage 1 grads only in garment encoder " << (only_garment ? "yes" : "no")
             << ", denoiser checksum constant over 100 steps " << (unet_constant ? "yes" : "no")
             << "; stage 2 only control trainable " << (only_control_trainable && only_control ? "yes" : "no")
             << ", frozen checksums constant " << (frozen_constant ? "yes" : "no") << "; FD worst rel error " << worst1
             << " (" << fd1.size() << " scalars, stage 1), " << worst2 << " (" << fd2.size() << " scalars, stage 2)";
    o.require(only_garment && unet_constant, "stage 1 gating");
    o.require(only_control_trainable && only_control && frozen_constant, "stage 2 gating");
    o.require(fd1.size() == 5 && fd2.size() == 5 && worst1 < kFdRel && worst2 < kFdRel, "finite differences");
}

struct Overfit {
    ModelBundle bundle;
    std::vector<DatasetRecord> records;
};

std::optional<Overfit> g_overfit;

void toy_overfit(Outcome& o) {
    AppConfig cfg = default_config();
    Overfit run{ModelBundle::create(cfg, 42), toy(kOverfitRecords, 0)};

    const auto t0 = Clock::now();
    TrainingConfig base;
    base.stage = 0;
    base.optimizer = {OptimizerKind::adam, kBaseLr};
    base.batch_size = kBatch;
    base.max_steps = kBaseSteps;
    base.seed = 5;
    base.augmentations = {Augmentation::flip};
    Trainer(run.bundle, base, toy(kBaseRecords, 1000)).run();
    const double base_secs = seconds_since(t0);

    TrainingConfig s1 = base;
    s1.stage = 1;
    s1.optimizer.learning_rate = kOverfitLr;
    s1.max_steps = kOverfitSteps;
    s1.seed = 6;
    const auto t1 = Clock::now();
    std::vector<double> losses;
    Trainer(run.bundle, s1, run.records).run([&](const StepStats& s) { losses.push_back(s.loss); });
    const double s1_secs = seconds_since(t1);
    const auto ma = moving_average(losses, 50);
    const double initial = ma[49], final = ma.back();
    const double reduction = 1.0 - final / initial;

    double mse_sum = 0.0, best = 1e300, worst = 0.0;
    for (int k = 0; k < kOverfitRecords; ++k) {
        const auto out = generate_gc_t2i(run.bundle.refs(), gen_request(run.records[k], 1 + k));
        const double m = mean_squared_diff(out.data(), run.records[k].person_image.data());
        mse_sum += m;
        best = std::min(best, m);
        worst = std::max(worst, m);
    }
    const double mean_mse = mse_sum / kOverfitRecords;
    const double total_min = seconds_since(t0) / 60.0;
    o.detail << "50-step MA loss " << initial << " -> " << final << " (reduction " << 100.0 * reduction
             << "%, needs 80%); stage-1 " << s1_secs << " s, base pretraining " << base_secs << " s, total "
             << total_min << " min; generation MSE vs memorized target mean " << mean_mse << " (best " << best
             << ", worst " << worst << ") over all " << kOverfitRecords << " training garments";
    o.require(reduction >= kMaReduction, "loss reduction");
    o.require(total_min < kOverfitMinutes, "runtime");
    o.require(mean_mse < kMemorizeMse, "memorization");
    g_overfit.emplace(std::move(run));
}

void determinism(Outcome& o) {
    const ModelBundle b = ModelBundle::create(default_config(), 3);
    const auto data = toy(2, 15);
    const GenerationRequest g = gen_request(data[0], 77);
    const bool gen_same = generate_gc_t2i(b.refs(), g).data() == generate_gc_t2i(b.refs(), g).data();
    const TryOnRequest t = tryon_request(data[0], data[1], data[1].agnostic_mask, 77);
    const bool tryon_same = tryon(b.refs(), t).data() == tryon(b.refs(), t).data();

    const NoiseSchedule& s = b.schedule;
    std::mt19937_64 rng(8);
    double worst = 0.0;
    const auto ts = ddim_timesteps(s, 25);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int tp = i + 1 < ts.size() ? ts[i + 1] : -1;
        const Tensor x = Tensor::randn({3, 8, 8}, rng), e = Tensor::randn({3, 8, 8}, rng);
        worst = std::max(worst, max_abs_diff(ddim_step(x, e, ts[i], tp, s), oracle::ddim_update(x, e, ts[i], tp, s, 0.0)));
    }
    o.detail << "t2i bitwise repeat " << (gen_same ? "yes" : "no") << ", try-on bitwise repeat "
             << (tryon_same ? "yes" : "no") << ", DDIM vs scalar oracle max|diff| " << worst << " over " << ts.size()
             << " steps";
    o.require(gen_same && tryon_same, "determinism");
    o.require(worst <= kDdimTol, "ddim oracle");
}

void metric_oracles(Outcome& o) {
    const int n = 10000, d = 8;
    const double d0 = 2.0;
    const Eigen::MatrixXd x = oracle::gaussian(n, d, 0.0, 1), y = oracle::gaussian(n, d, d0, 2),
                          z = oracle::gaussian(n, d, 0.0, 3);
    const double fxx = fid(x, x), fxy = fid(x, y), knull = kid(x, z);
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 1, 0, 0, 1;
    b << 1, 1, 0, 0;
    const double khand = kid(a, b);
    // k = (x.y/2 + 1)^3: within-set terms 1 each, cross terms 3.375 + 3.375 + 1 + 1.
    const double khand_expected = 1.0 + 1.0 - 2.0 * (3.375 + 3.375 + 1.0 + 1.0) / 4.0;

    std::mt19937_64 rng(4);
    const Tensor im = Tensor::randn({3, 32, 32}, rng) * 0.5, im2 = Tensor::randn({3, 32, 32}, rng) * 0.5;
    const double s_same = ssim(im, im), s_gap = std::abs(ssim(im, im2) - oracle::ssim_loop(im, im2, {}));
    const Embedder emb = toy_embedder(0);
    Tensor mask({1, 32, 32});
    for (int yy = 8; yy < 24; ++yy)
        for (int xx = 8; xx < 24; ++xx) mask.at(0, yy, xx) = 1.0;
    Tensor masked = im;
    for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < 32; ++yy)
            for (int xx = 0; xx < 32; ++xx) masked.at(c, yy, xx) *= mask.at(0, yy, xx);
    const double dm_full = dino_m(im, Tensor({1, 32, 32}, 1.0), im, emb), dm_masked = dino_m(im, mask, masked, emb);

    o.detail << "fid(X,X) " << fxx << "; fid offset " << d0 << ": " << fxy << " vs " << d0 * d0 << " ("
             << 100.0 * std::abs(fxy - d0 * d0) / (d0 * d0) << "%); kid null " << knull << "; kid 2-point " << khand
             << " vs " << khand_expected << "; ssim(a,a) " << s_same << ", loop gap " << s_gap << "; dino_m "
             << dm_full << ", " << dm_masked;
    o.require(fxx < 1e-6, "fid identity");
    o.require(std::abs(fxy - d0 * d0) <= 0.05 * d0 * d0, "fid offset");
    o.require(std::abs(knull) < 1e-3, "kid null");
    o.require(khand == khand_expected, "kid hand");
    o.require(std::abs(s_same - 1.0) < 1e-12 && s_gap < 1e-6, "ssim");
    o.require(std::abs(dm_full - 1.0) <= 1e-6 && std::abs(dm_masked - 1.0) <= 1e-6, "dino_m");
}

void human_study(Outcome& o) {
    const std::vector<std::string> methods{"A", "B", "C"};
    const std::vector<StudyResponse> rs{{"r1", StudyAspect::identity, {"A", "B", "C"}},
                                        {"r2", StudyAspect::identity, {"A", "B", "C"}},
                                        {"r3", StudyAspect::identity, {"B", "A", "C"}},
                                        {"r1", StudyAspect::quality, {"B", "A", "C"}},
                                        {"r1", StudyAspect::preservation, {"C", "B", "A"}}};
    const StudyScores s = human_scores(rs, methods);
    const double sa = s.by_aspect.at(StudyAspect::identity).at("A").score;
    EvalReport study;
    study.methods = methods;
    study.study = s;
    study.metadata = {{"dataset", "hand"}, {"seed", "0"}, {"embedder", "none"}};
    const std::string md = emit_report(study, ReportFormat::markdown);
    const bool layout = md.find("| Method | Identity Pref. (%) | Identity Score | Quality Pref. (%) | Quality Score | "
                                "Preservation Pref. (%) | Preservation Score |") != std::string::npos;

    EvalReport metrics;
    metrics.methods = {"ours", "base"};
    metrics.metrics.push_back(kid_column({{"ours", 0.0123}, {"base", 0.0456}}));
    metrics.metadata = {{"dataset", "hand"}, {"seed", "0"}, {"embedder", "none"}};
    const std::string kmd = emit_report(metrics, ReportFormat::markdown);
    const bool kid_scaled = kmd.find("KID (x100)") != std::string::npos && kmd.find("**1.23**") != std::string::npos &&
                            kmd.find("4.56") != std::string::npos;
    o.detail << "S_A " << sa << " (expected 8/3 exactly: " << (sa == 8.0 / 3.0 ? "yes" : "no")
             << "), three-aspect table " << (layout ? "yes" : "no") << ", KID shown x100 " << (kid_scaled ? "yes" : "no");
    o.require(sa == 8.0 / 3.0, "S_A");
    o.require(layout, "layout");
    o.require(kid_scaled, "kid scale");
}

void task_table(Outcome& o) {
    const std::vector<std::pair<std::string, TaskConfig>> rows{
        {"GC t2i", {TaskKind::gc_t2i, PipelineKind::text2image, true, "sd-mini", ControlNetChoice::none}},
        {"stylized GC t2i", {TaskKind::stylized_gc_t2i, PipelineKind::text2image, true, "stylized-base", ControlNetChoice::none}},
        {"controllable GC t2i", {TaskKind::controllable_gc_t2i, PipelineKind::text2image, true, "any", ControlNetChoice::any}},
        {"virtual try-on", {TaskKind::virtual_tryon, PipelineKind::inpainting, true, "sd-mini", ControlNetChoice::tryon}},
    };
    int matched = 0;
    for (const auto& [name, want] : rows) {
        const TaskConfig got = resolve_task(name);
        if (got == want) ++matched;
        else o.detail << name << " -> " << to_string(got.pipeline) << "/" << got.base_model_id << "/" << to_string(got.controlnet) << "; ";
    }
    bool unknown_rejected = false;
    try {
        resolve_task("super resolution");
    } catch (const ConfigError&) {
        unknown_rejected = true;
    }
    o.detail << matched << "/4 rows exact, unknown task rejected " << (unknown_rejected ? "yes" : "no");
    o.require(matched == 4 && unknown_rejected, "registry");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void data_engine(Outcome& o) {
    std::mt19937_64 rng(21);
    const auto imgs = generator_images(4, rng);
    const auto b = mock_backends(13);
    const fs::path root = fs::temp_directory_path() / "garmentgen_acceptance";
    fs::remove_all(root);
    const Manifest m = run_engine(imgs, b, (root / "a").string());
    run_engine(imgs, b, (root / "b").string());
    bool valid = true;
    double min_cov = 1.0;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = m.entries[i];
        try {
            e.record.validate();
        } catch (const Error&) {
            valid = false;
        }
        const Tensor& gt = imgs[i].truth->garment_mask;
        double on = 0.0, covered = 0.0;
        for (std::size_t k = 0; k < gt.size(); ++k)
            if (gt[k] == 1.0) {
                on += 1.0;
                covered += e.record.agnostic_mask[k];
            }
        min_cov = std::min(min_cov, covered / on);
    }
    bool identical = true;
    int files = 0;
    for (const auto& f : fs::directory_iterator(root / "a")) {
        identical &= slurp(f.path()) == slurp(root / "b" / f.path().filename());
        ++files;
    }
    const auto loaded = load_manifest((root / "a" / "manifest.jsonl").string());

    auto faulty = mock_backends(13);
    inject_fault(faulty, "inpainter", imgs[1].id);
    const Manifest f = run_engine(imgs, faulty, (root / "c").string());
    o.detail << m.record_count() << " records (" << loaded.size() << " reloaded, all valid " << (valid ? "yes" : "no")
             << "), min garment coverage " << min_cov << ", re-run byte-identical over " << files << " files "
             << (identical ? "yes" : "no") << "; with a fault: " << f.record_count() << " records + "
             << f.failure_count() << " failure";
    o.require(m.record_count() == 4 && loaded.size() == 4 && valid, "records");
    o.require(min_cov >= 0.99, "coverage");
    o.require(identical, "reproducible");
    o.require(f.record_count() == 3 && f.failure_count() == 1, "fault");
    fs::remove_all(root);
}

void pose_swap(Outcome& o) {
    if (!g_overfit) {
        o.require(false, "overfit model unavailable");
        return;
    }
    ModelBundle& b = g_overfit->bundle;
    const auto& recs = g_overfit->records;
    TrainingConfig c2;
    c2.stage = 2;
    c2.optimizer = {OptimizerKind::adam, kControlLr};
    c2.batch_size = kBatch;
    c2.max_steps = kControlSteps;
    c2.seed = 7;
    c2.augmentations = stage_augmentations(2);
    const auto t0 = Clock::now();
    Trainer(b, c2, recs).run();
    const double secs = seconds_since(t0);

    const DatasetRecord& r = recs[0];
    std::vector<Tensor> latents;
    for (PoseKind k : {PoseKind::none, PoseKind::keypoint_render, PoseKind::dense_coords}) {
        TryOnRequest req = tryon_request(r, r, r.agnostic_mask, 11);
        req.pose = record_pose(r, k);
        TryOnTrace tr;
        tryon(b.refs(), req, {}, &tr);
        latents.push_back(tr.final_latent);
    }
    const double d01 = max_abs_diff(latents[0], latents[1]), d02 = max_abs_diff(latents[0], latents[2]),
                 d12 = max_abs_diff(latents[1], latents[2]);
    o.detail << "after " << kControlSteps << " control steps (" << secs << " s): max|diff| none/keypoint " << d01
             << ", none/dense " << d02 << ", keypoint/dense " << d12;
    o.require(std::min({d01, d02, d12}) > kPoseGap, "pose swap");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"ASA identity through the full pipeline", asa_identity},
        {"ASA and CSA are distinguishable", asa_vs_csa},
        {"fresh try-on control network is neutral", controlnet_neutrality},
        {"try-on preserves the unmasked region", preservation},
        {"stage gradient gating and finite differences", gating},
        {"toy overfit", toy_overfit},
        {"sampler determinism and DDIM oracle", determinism},
        {"metric oracles", metric_oracles},
        {"human-score aggregation and report layout", human_study},
        {"task registry", task_table},
        {"data engine with mock backends", data_engine},
        {"pose condition swap changes the output", pose_swap},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str(), seconds_since(t0));
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
