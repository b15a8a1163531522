#pragma once

// Evaluation metrics, user-study aggregation and report rendering.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "garmentgen/tensor.hpp"

namespace garmentgen {

struct Embedder {
    std::string id;
    int dim = 0;
    std::function<std::vector<double>(const Tensor& image)> embed_image;
    std::function<std::vector<double>(const std::string& text)> embed_text;  // optional
};

/// 8x average pool, then a fixed seeded gaussian projection to `dim`,
/// L2-normalized. Text goes through a hashed bag of words of the same width,
/// so image-text scores only exercise the plumbing.
Embedder toy_embedder(std::uint64_t seed = 0, int dim = 64, int pool = 8);

/// Pluggable slots for metrics that need pretrained networks.
using PerceptualDistance = std::function<double(const Tensor&, const Tensor&)>;
using AestheticScorer = std::function<double(const Tensor&)>;

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Cosine between emb(tryon * mask) and emb(garment); the mask is applied
/// elementwise on the full frame.
double dino_m(const Tensor& tryon_image, const Tensor& mask, const Tensor& garment_image, const Embedder& emb);

/// Image-image and image-text cosine similarity; the latter needs embed_text.
double embedding_similarity(const Tensor& a, const Tensor& b, const Embedder& emb);
double embedding_similarity(const Tensor& image, const std::string& text, const Embedder& emb);

struct SsimOptions {
    double data_range = 2.0;  // images live in [-1,1]
    double k1 = 0.01;
    double k2 = 0.03;
    int window = 11;
    double sigma = 1.5;
};

/// Luma for 3-channel images, identity for 1-channel.
Tensor to_gray(const Tensor& img);
std::vector<double> gaussian_window(int size, double sigma);
/// Mean SSIM over all window positions that fit inside the image.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});

/// Rows are samples.
double fid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);
/// Unbiased MMD^2 with k(x,y) = (x.y/d + 1)^3. May be slightly negative.
double kid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);
/// Same estimator as kid, computed with a plain serial loop.
double kid_serial(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

enum class StudyAspect { identity, quality, preservation };
std::string to_string(StudyAspect a);

struct StudyResponse {
    std::string respondent_id;
    StudyAspect aspect = StudyAspect::identity;
    std::vector<std::string> ranking;  // best first
};

/// W(r) for rank r of M: linear M - r + 1, or inverse M / r.
enum class RankWeighting { linear, inverse };
std::string to_string(RankWeighting w);
RankWeighting parse_rank_weighting(const std::string& s);

struct AspectScore {
    double preference_pct = 0.0;
    double score = 0.0;
};

struct StudyScores {
    RankWeighting weighting = RankWeighting::linear;
    std::vector<std::string> methods;
    std::map<StudyAspect, std::map<std::string, AspectScore>> by_aspect;
    std::map<StudyAspect, int> responses;
};

/// S = sum_r f(r) W(r) / N per method and aspect.
StudyScores human_scores(const std::vector<StudyResponse>& responses, const std::vector<std::string>& methods,
                         RankWeighting weighting = RankWeighting::linear);

struct MetricColumn {
    std::string name;
    bool lower_is_better = false;
    double display_scale = 1.0;  // KID is shown x100
    std::map<std::string, double> values;
};

MetricColumn kid_column(std::map<std::string, double> raw_values);

struct EvalReport {
    std::vector<std::string> methods;
    std::vector<MetricColumn> metrics;
    std::optional<StudyScores> study;
    std::map<std::string, std::string> metadata;  // needs dataset, seed, embedder

    void validate() const;
};

enum class ReportFormat { markdown, csv, json };
ReportFormat parse_report_format(const std::string& s);
std::string emit_report(const EvalReport& report, ReportFormat format);

/// Scores an evaluation manifest: one JSON object per line with
/// {method, result, reference, garment, mask?} PNG paths relative to the file.
EvalReport evaluate_manifest(const std::string& path, const Embedder& emb, std::uint64_t seed);

}  // namespace garmentgen
