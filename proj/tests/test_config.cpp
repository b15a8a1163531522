// Configuration tree and the glue that turns it into library objects.

#include "doctest.h"
#include "garmentgen/app.hpp"

using namespace garmentgen;

TEST_CASE("config: defaults, overrides, round trip") {
    const AppConfig d = default_config();
    validate(d);
    CHECK(d.sampler_steps == 25);
    CHECK(d.guidance_scale == 3.0);
    CHECK(d.schedule_T == 100);

    AppConfig c = d;
    apply_override(c, "stage=2");
    apply_override(c, "training.max_steps=10");
    apply_override(c, "sampler.guidance_scale=1.5");
    apply_override(c, "training.augmentations=flip,shift");
    CHECK(c.stage == 2);
    CHECK(c.max_steps == 10);
    CHECK(c.guidance_scale == 1.5);
    CHECK(c.augmentations == std::vector<std::string>{"flip", "shift"});

    const AppConfig back = parse_config(to_yaml(c));
    CHECK(to_yaml(back) == to_yaml(c));
    CHECK(parse_config(to_yaml(d)).seed == d.seed);

    const AppConfig y = parse_config("training:\n  stage: 0\n  seed: 9\nsampler:\n  steps: 5\n", {"seed=11"});
    CHECK(y.stage == 0);
    CHECK(y.seed == 11);
    CHECK(y.sampler_steps == 5);
}

TEST_CASE("config: errors are ConfigError") {
    AppConfig c = default_config();
    CHECK_THROWS_AS(apply_override(c, "no_equals"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "nonsense=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "training.stage=two"), ConfigError);
    CHECK_THROWS_AS(parse_config("training: {stage: 3}"), ConfigError);
    CHECK_THROWS_AS(parse_config("sampler: {steps: 0}"), ConfigError);
    CHECK_THROWS_AS(parse_config("bogus: {key: 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("training: [unclosed"), ConfigError);
    CHECK_THROWS_AS(parse_config("tryon: {mask_convention: sideways}"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("app glue builds consistent objects") {
    AppConfig c = default_config();
    c.dataset_size = 3;
    const TrainingConfig t1 = training_config(c, 1);
    CHECK(t1.augmentations == stage_augmentations(1));
    c.augmentations = {"none"};
    CHECK(training_config(c, 2).augmentations.empty());
    CHECK(stage_dataset(c, 1).size() == 3);
    CHECK(stage_dataset(c, 0).size() == static_cast<std::size_t>(c.base_dataset_size));

    const auto rec = stage_dataset(c, 1)[0];
    const TryOnRequest r = tryon_request(c, rec, 4);
    CHECK(r.mask == rec.agnostic_mask);
    CHECK(r.pose.kind == PoseKind::dense_coords);
    CHECK(r.steps == c.sampler_steps);
    const PoseMap none = record_pose(rec, PoseKind::none);
    CHECK(none.kind == PoseKind::none);
    CHECK(none.data.dim(1) == rec.dense_map.data.dim(1));
    CHECK(none.data.dim(2) == rec.dense_map.data.dim(2));

    c.checkpoint = "/nonexistent/ckpt.sgck";
    bool loaded = true;
    load_or_create(c, 1, &loaded);
    CHECK_FALSE(loaded);
}
