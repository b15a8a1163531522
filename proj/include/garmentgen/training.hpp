#pragma once

// Staged training.
//   stage 0  base denoiser on generic toy data (stand-in for a pretrained base)
//   stage 1  garment encoder only; denoiser frozen; additive self-attention
//   stage 2  try-on control network only; encoder and denoiser frozen

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "garmentgen/model_bundle.hpp"
#include "garmentgen/toy_data.hpp"

namespace garmentgen {

struct DatasetRecord {
    std::string id;
    LatentTensor person_image;
    LatentTensor garment_image;
    PoseMap dense_map;
    PoseMap keypoint_map;  // optional second pose rendering (may be empty)
    Tensor parse_map;      // [1,H,W] ParseLabel values
    Tensor agnostic_mask;  // [1,H,W] binary
    std::string garment_category_prompt;
    std::string target_prompt;

    void validate() const;
};

DatasetRecord record_from_scene(const ToyScene& scene, std::string id);
/// Block-constant 32x32 (by default) figures, exact under the toy codec.
std::vector<DatasetRecord> make_toy_dataset(int n, std::mt19937_64& rng, int size = 32, int codec_factor = 4);

/// Downsamples every spatial field by an integer factor so records from a
/// higher-resolution source fit the model: block mean for images and dense
/// coordinates, block majority for parse labels, block max for masks.
DatasetRecord downsample_record(const DatasetRecord& rec, int size);

/// (garment prompt, target prompt): category to the encoder, description to the denoiser.
std::pair<std::string, std::string> dispatch_prompts(const DatasetRecord& rec);

enum class Augmentation { flip, shift, scale };
Augmentation parse_augmentation(const std::string& s);
std::set<Augmentation> stage_augmentations(int stage);

struct AugmentParams {
    bool flip = false;
    int shift_x = 0;
    int shift_y = 0;
    double scale = 1.0;
};

AugmentParams sample_augment(std::mt19937_64& rng, const std::set<Augmentation>& enabled);
/// Applies the same geometric transform to every spatial field.
DatasetRecord apply_augment(const DatasetRecord& rec, const AugmentParams& p);
DatasetRecord augment(const DatasetRecord& rec, std::mt19937_64& rng, int stage,
                      const std::set<Augmentation>& enabled);

// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Updates trainable parameters that have an entry in the gradient store.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
    void step(ParamSet& params, const GradStore& grads);
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::map<std::string, Tensor> m_, v_;
    long steps_ = 0;
};

struct TrainingConfig {
    int stage = 1;
    OptimizerConfig optimizer;
    int batch_size = 4;
    int max_steps = 100;
    std::set<Augmentation> augmentations;  // must be a subset of stage_augmentations(stage)
    std::uint64_t seed = 0;
    double text_dropout = 0.1;
    AttentionMode attention_mode = AttentionMode::asa;
    /// Pose kinds sampled for stage-2 conditions.
    std::vector<PoseKind> pose_kinds{PoseKind::none, PoseKind::keypoint_render, PoseKind::dense_coords};
    /// Encode the garment at t = 0 instead of the sample's t.
    bool cached_garment_t = false;

    void validate() const;
};

/// One fully drawn training example; a fixed list of these is a fixed batch.
struct TrainSample {
    DatasetRecord record;
    int t = 0;
    Tensor eps;
    bool drop_text = false;
    PoseKind pose = PoseKind::dense_coords;
};

std::vector<TrainSample> draw_batch(const std::vector<DatasetRecord>& data, const ModelBundle& bundle,
                                    const TrainingConfig& cfg, std::mt19937_64& rng);

/// Parameter group trained in a stage: "unet", "garment" or "control".
std::string trainable_group(int stage);
/// Sets trainable flags so only the stage's group receives gradients.
void configure_stage(ModelBundle& bundle, int stage);

/// Mean noise-prediction loss over the batch; accumulates parameter
/// gradients into `grads` when given.
double batch_loss(const ModelBundle& bundle, int stage, const std::vector<TrainSample>& batch,
                  GradStore* grads = nullptr, AttentionMode mode = AttentionMode::asa, bool cached_garment_t = false);

struct StepStats {
    int step = 0;
    int stage = 0;
    double loss = 0.0;
    std::map<std::string, double> grad_norm;  // per parameter group
};

std::string to_jsonl(const StepStats& s);

class Trainer {
public:
    /// Prepares the bundle for the stage: stage 1 copies the denoiser into a
    /// garment encoder that has not been trained yet, stage 2 copies it into
    /// the control network. Stage 2 requires a completed stage 1.
    Trainer(ModelBundle& bundle, TrainingConfig cfg, std::vector<DatasetRecord> data);

    StepStats step();
    /// Runs to max_steps; `on_step` sees every step's statistics.
    std::vector<StepStats> run(const std::function<void(const StepStats&)>& on_step = {});
    const TrainingConfig& config() const { return cfg_; }

private:
    ModelBundle& bundle_;
    TrainingConfig cfg_;
    std::vector<DatasetRecord> data_;
    Optimizer opt_;
    std::mt19937_64 rng_;
    int step_ = 0;
};

struct FdResult {
    std::string name;
    std::size_t index;
    double analytic;
    double numeric;
    double rel_error;
};

/// Central finite differences on `count` randomly chosen trainable scalars
/// whose analytic gradient exceeds `min_grad`.
std::vector<FdResult> finite_difference_check(ModelBundle& bundle, int stage, const std::vector<TrainSample>& batch,
                                              int count, std::uint64_t seed, double h = 1e-3, double min_grad = 1e-6);

/// Moving average with the given window (first entries use what is available).
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

}  // namespace garmentgen
