#pragma once

// Synthetic data engine: parser -> agnostic mask -> tagger -> drawer, with
// pluggable backends and a JSON-lines manifest.
//
// Real backends are expected to be thin adapters around services that speak
// this JSON shape (images as base64 PNG using the image_io channel rules):
//   segmenter       {"image"}                          -> {"parse"}
//   pose_estimator  {"image"}                          -> {"dense"}
//   captioner       {"image"}                          -> {"description"}
//   template_source {"description"}                    -> {"prompt"}
//   inpainter       {"image","mask","dense","prompt",
//                    "seed"}                           -> {"image"}
// Only the deterministic mocks below ship.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "garmentgen/toy_data.hpp"
#include "garmentgen/training.hpp"

namespace garmentgen {

inline constexpr const char* kEngineVersion = "engine-1.0";

/// One engine input: a person photo, its product shot, and (for generator
/// images) the ground truth that mocks read instead of running a model.
struct EngineImage {
    std::string id;
    LatentTensor person;
    LatentTensor garment;
    std::optional<ToyScene> truth;
};

/// Generator images rendered at one pixel per cell. The default 64 px keeps
/// the radius-3 agnostic mask within 1.8x the garment area for every shape.
std::vector<EngineImage> generator_images(int n, std::mt19937_64& rng, int size = 64);

/// Passed to every backend call: the image being processed and the seed the
/// call must honour.
struct CallContext {
    std::string image_id;
    std::uint64_t seed = 0;
};

template <class Fn>
struct Backend {
    std::string id;
    std::uint64_t seed = 0;
    std::function<Fn> fn;
};

struct EngineBackends {
    Backend<Tensor(const CallContext&, const EngineImage&)> segmenter;  // [1,H,W] labels
    Backend<PoseMap(const CallContext&, const EngineImage&)> pose_estimator;
    Backend<std::string(const CallContext&, const EngineImage&)> captioner;
    Backend<std::string(const CallContext&, const std::string& description)> template_source;
    Backend<Tensor(const CallContext&, const Tensor& image, const Tensor& mask, const PoseMap& dense,
                   const std::string& prompt)>
        inpainter;
};

EngineBackends mock_backends(std::uint64_t seed = 0);

/// Makes the named backend throw on the image with the given id.
void inject_fault(EngineBackends& backends, const std::string& backend, const std::string& image_id);

struct ParseResult {
    Tensor parse;
    PoseMap dense;
};
ParseResult parse(const EngineImage& image, const EngineBackends& backends);

struct AgnosticResult {
    Tensor mask;          // [1,H,W]
    Tensor masked_image;  // [3,H,W]
};
/// Garment region dilated by `radius` (Chebyshev), intersected with the
/// non-background region. Throws ParameterError when there is no garment.
AgnosticResult derive_agnostic(const Tensor& image, const Tensor& parse_map, const PoseMap& dense, int radius = 3,
                               MaskConvention convention = MaskConvention::complement);

struct TagResult {
    std::string description;
    std::string inpaint_prompt;
};
TagResult tag(const EngineImage& image, const EngineBackends& backends);

/// Seed the drawer uses for an image on a given attempt.
std::uint64_t draw_seed(const EngineBackends& backends, const std::string& image_id, int attempt);

/// Inpaints inside the mask; pixels outside the mask are copied from the input.
Tensor draw(const Tensor& image, const Tensor& mask, const PoseMap& dense, const std::string& prompt,
            const EngineBackends& backends, const CallContext& ctx);

/// Fills "{color}" and "{pattern}" slots with attributes found in a description.
std::string fill_template(const std::string& tmpl, const std::string& description);

struct EngineSample {
    DatasetRecord record;
    TagResult tags;
};

struct EngineOptions {
    int agnostic_radius = 3;
    int max_attempts = 3;
    /// Decides whether a drawn sample is good enough; the default wants a
    /// non-empty mask and caption.
    std::function<bool(const EngineSample&)> accept;
};

struct ManifestEntry {
    std::string id;
    bool ok = false;
    DatasetRecord record;                 // when ok
    std::map<std::string, std::string> files;  // field -> relative path
    std::string failed_backend, error;    // when failed
    int attempts = 0;
    std::string json;                     // the manifest line
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::size_t record_count() const;
    std::size_t failure_count() const;
};

/// Processes every image, writes PNGs plus manifest.jsonl under out_dir and
/// returns the manifest. Failures become manifest entries; the run goes on.
Manifest run_engine(const std::vector<EngineImage>& images, const EngineBackends& backends, const std::string& out_dir,
                    const EngineOptions& options = {});

/// Loads the records of a manifest written by run_engine (failures skipped).
std::vector<DatasetRecord> load_manifest(const std::string& path);

}  // namespace garmentgen
