#include "garmentgen/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "garmentgen/backbone.hpp"
#include "garmentgen/controlnet.hpp"
#include "garmentgen/image_io.hpp"
#include "json.hpp"

namespace garmentgen {

using json = nlohmann::json;

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
    return v;
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite features");
}

}  // namespace

Embedder toy_embedder(std::uint64_t seed, int dim, int pool) {
    if (dim < 1 || pool < 1) throw ParameterError("toy_embedder: dim and pool must be positive");
    Embedder e;
    e.id = "toy-pool" + std::to_string(pool) + "-proj" + std::to_string(dim) + "-" + std::to_string(seed);
    e.dim = dim;
    e.embed_image = [seed, dim, pool](const Tensor& img) {
        if (img.rank() != 3 || img.dim(1) % pool != 0 || img.dim(2) % pool != 0)
            throw ShapeError("toy embedder needs [C,H,W] with H, W divisible by " + std::to_string(pool));
        const int c = img.dim(0), h = img.dim(1) / pool, w = img.dim(2) / pool;
        std::vector<double> pooled(static_cast<std::size_t>(c) * h * w, 0.0);
        for (int k = 0; k < c; ++k)
            for (int y = 0; y < img.dim(1); ++y)
                for (int x = 0; x < img.dim(2); ++x)
                    pooled[(static_cast<std::size_t>(k) * h + y / pool) * w + x / pool] += img.at(k, y, x);
        for (double& v : pooled) v /= pool * pool;
        // The projection depends only on the seed and the input width.
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * pooled.size()));
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
        for (int i = 0; i < dim; ++i)
            for (double p : pooled) out[static_cast<std::size_t>(i)] += n(rng) * p;
        return normalized(std::move(out));
    };
    auto text = std::make_shared<HashedTextEmbedder>(dim, seed);
    e.embed_text = [text, dim](const std::string& s) {
        const TextEmbedding t = text->embed(s);
        std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
        for (int r = 0; r < t.vectors.dim(0); ++r)
            for (int c = 0; c < dim; ++c) out[static_cast<std::size_t>(c)] += t.vectors.at(r, c);
        return normalized(std::move(out));
    };
    return e;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("cosine_similarity: embedding sizes differ");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw NumericalError("non-finite embedding");
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw NumericalError("similarity undefined for a zero-norm embedding");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

namespace {
std::vector<double> embed_checked(const Embedder& emb, const Tensor& img) {
    auto v = emb.embed_image(img);
    if (static_cast<int>(v.size()) != emb.dim) throw ShapeError("embedder '" + emb.id + "' returned the wrong width");
    return v;
}
}  // namespace

double dino_m(const Tensor& tryon_image, const Tensor& mask, const Tensor& garment_image, const Embedder& emb) {
    require_binary_mask(mask);
    if (tryon_image.rank() != 3 || tryon_image.dim(1) != mask.dim(1) || tryon_image.dim(2) != mask.dim(2))
        throw ShapeError("dino_m: mask dims differ from the try-on image");
    Tensor masked = tryon_image;
    for (int c = 0; c < masked.dim(0); ++c)
        for (int y = 0; y < masked.dim(1); ++y)
            for (int x = 0; x < masked.dim(2); ++x) masked.at(c, y, x) *= mask.at(0, y, x);
    return cosine_similarity(embed_checked(emb, masked), embed_checked(emb, garment_image));
}

double embedding_similarity(const Tensor& a, const Tensor& b, const Embedder& emb) {
    return cosine_similarity(embed_checked(emb, a), embed_checked(emb, b));
}

double embedding_similarity(const Tensor& image, const std::string& text, const Embedder& emb) {
    if (!emb.embed_text) throw ParameterError("embedder '" + emb.id + "' has no text encoder");
    return cosine_similarity(embed_checked(emb, image), emb.embed_text(text));
}

Tensor to_gray(const Tensor& img) {
    if (img.rank() != 3) throw ShapeError("to_gray: expected [C,H,W]");
    if (img.dim(0) == 1) return img;
    if (img.dim(0) != 3) throw ShapeError("to_gray: expected 1 or 3 channels");
    Tensor g({1, img.dim(1), img.dim(2)});
    for (int y = 0; y < img.dim(1); ++y)
        for (int x = 0; x < img.dim(2); ++x)
            g.at(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    return g;
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - (size - 1) / 2.0;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt) {
    if (a.shape() != b.shape()) throw ShapeError("ssim: image dims differ");
    const Tensor ga = to_gray(a), gb = to_gray(b);
    const int h = ga.dim(1), w = ga.dim(2), n = opt.window;
    if (h < n || w < n) throw ShapeError("ssim: image smaller than the window");
    const auto g = gaussian_window(n, opt.sigma);
    const double c1 = std::pow(opt.k1 * opt.data_range, 2), c2 = std::pow(opt.k2 * opt.data_range, 2);

    // Separable filtering of the five moment images, valid region only.
    const int oh = h - n + 1, ow = w - n + 1;
    auto filter = [&](auto&& value) {
        std::vector<double> rows(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) s += g[static_cast<std::size_t>(k)] * value(y, x + k);
                rows[static_cast<std::size_t>(y) * ow + x] = s;
            }
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) s += g[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(y + k) * ow + x];
                out[static_cast<std::size_t>(y) * ow + x] = s;
            }
        return out;
    };
    const auto ma = filter([&](int y, int x) { return ga.at(0, y, x); });
    const auto mb = filter([&](int y, int x) { return gb.at(0, y, x); });
    const auto aa = filter([&](int y, int x) { return ga.at(0, y, x) * ga.at(0, y, x); });
    const auto bb = filter([&](int y, int x) { return gb.at(0, y, x) * gb.at(0, y, x); });
    const auto ab = filter([&](int y, int x) { return ga.at(0, y, x) * gb.at(0, y, x); });
    double total = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double va = aa[i] - ma[i] * ma[i], vb = bb[i] - mb[i] * mb[i], cov = ab[i] - ma[i] * mb[i];
        total += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    return total / static_cast<double>(ma.size());
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
    const Eigen::MatrixXd c = x.rowwise() - mean;
    return (c.transpose() * c) / static_cast<double>(std::max<Eigen::Index>(1, x.rows() - 1));
}

constexpr double kEigenTolerance = -1e-8;

/// Symmetric PSD square root; eigenvalues down to -1e-8 are treated as zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double* trace = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < kEigenTolerance) throw NumericalError("matrix square root: eigenvalue below tolerance");
        ev(i) = std::sqrt(std::max(0.0, ev(i)));
    }
    if (trace) *trace = ev.sum();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    require_finite(a, "fid");
    require_finite(b, "fid");
    if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw ShapeError("fid: need >= 2 rows of equal width");
    const Eigen::RowVectorXd ma = a.colwise().mean(), mb = b.colwise().mean();
    const Eigen::MatrixXd sa = covariance(a, ma), sb = covariance(b, mb);
    // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), and the inner product is symmetric.
    const Eigen::MatrixXd ra = psd_sqrt(sa);
    double tr_cross = 0.0;
    psd_sqrt(ra * sb * ra, &tr_cross);
    const double v = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_cross;
    return std::max(0.0, v);
}

namespace {

struct KidSums {
    double xx = 0.0, yy = 0.0, xy = 0.0;
};

double kid_from(const KidSums& s, double m, double n) {
    return s.xx / (m * (m - 1)) + s.yy / (n * (n - 1)) - 2.0 * s.xy / (m * n);
}

void check_kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    require_finite(a, "kid");
    require_finite(b, "kid");
    if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw ShapeError("kid: need >= 2 rows of equal width");
}

}  // namespace

double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_kid(a, b);
    const double d = static_cast<double>(a.cols());
    // Gram matrices through Eigen's blocked GEMM, then the cubic kernel elementwise.
    auto off_diagonal_sum = [d](const Eigen::MatrixXd& g) {
        const Eigen::ArrayXXd u = g.array() / d + 1.0;
        const Eigen::ArrayXd diag = u.matrix().diagonal().array();
        return (u * u * u).sum() - (diag * diag * diag).sum();
    };
    const Eigen::ArrayXXd uxy = (a * b.transpose()).array() / d + 1.0;
    const KidSums s{off_diagonal_sum(a * a.transpose()), off_diagonal_sum(b * b.transpose()), (uxy * uxy * uxy).sum()};
    return kid_from(s, static_cast<double>(a.rows()), static_cast<double>(b.rows()));
}

double kid_serial(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_kid(a, b);
    const long m = a.rows(), n = b.rows(), d = a.cols();
    auto k = [d](const Eigen::MatrixXd& p, long i, const Eigen::MatrixXd& q, long j) {
        double s = 0.0;
        for (long c = 0; c < d; ++c) s += p(i, c) * q(j, c);
        const double u = s / static_cast<double>(d) + 1.0;
        return u * u * u;
    };
    KidSums s;
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < m; ++j)
            if (i != j) s.xx += k(a, i, a, j);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (i != j) s.yy += k(b, i, b, j);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j) s.xy += k(a, i, b, j);
    return kid_from(s, static_cast<double>(m), static_cast<double>(n));
}

std::string to_string(StudyAspect a) {
    switch (a) {
        case StudyAspect::identity: return "identity";
        case StudyAspect::quality: return "quality";
        case StudyAspect::preservation: return "preservation";
    }
    return "?";
}

std::string to_string(RankWeighting w) { return w == RankWeighting::linear ? "linear" : "inverse"; }

RankWeighting parse_rank_weighting(const std::string& s) {
    if (s == "linear") return RankWeighting::linear;
    if (s == "inverse") return RankWeighting::inverse;
    throw ConfigError("unknown rank weighting '" + s + "'");
}

StudyScores human_scores(const std::vector<StudyResponse>& responses, const std::vector<std::string>& methods,
                         RankWeighting weighting) {
    const std::set<std::string> method_set(methods.begin(), methods.end());
    if (methods.empty() || method_set.size() != methods.size()) throw ParameterError("methods must be distinct and non-empty");
    const double m = static_cast<double>(methods.size());
    StudyScores out;
    out.weighting = weighting;
    out.methods = methods;
    std::map<StudyAspect, std::map<std::string, std::pair<double, double>>> acc;  // (firsts, weighted sum)
    for (const auto& r : responses) {
        const std::set<std::string> ranked(r.ranking.begin(), r.ranking.end());
        if (r.ranking.size() != methods.size() || ranked != method_set)
            throw ParameterError("response from '" + r.respondent_id + "' is not a complete ranking");
        ++out.responses[r.aspect];
        for (std::size_t i = 0; i < r.ranking.size(); ++i) {
            const double rank = static_cast<double>(i + 1);
            auto& a = acc[r.aspect][r.ranking[i]];
            if (i == 0) a.first += 1.0;
            a.second += weighting == RankWeighting::linear ? m - rank + 1.0 : m / rank;
        }
    }
    for (const auto& [aspect, n] : out.responses)
        for (const auto& method : methods) {
            const auto [firsts, weighted] = acc[aspect][method];
            out.by_aspect[aspect][method] = {100.0 * firsts / n, weighted / n};
        }
    return out;
}

MetricColumn kid_column(std::map<std::string, double> raw_values) {
    return {"KID", true, 100.0, std::move(raw_values)};
}

void EvalReport::validate() const {
    for (const char* k : {"dataset", "seed", "embedder"})
        if (!metadata.count(k)) throw ParameterError(std::string("report metadata is missing '") + k + "'");
    for (const auto& col : metrics)
        for (const auto& [method, v] : col.values) {
            if (!std::isfinite(v)) throw NumericalError("report value " + col.name + "/" + method + " is not finite");
            if (std::find(methods.begin(), methods.end(), method) == methods.end())
                throw ParameterError("report value for unknown method '" + method + "'");
        }
    if (study)
        for (const auto& [aspect, scores] : study->by_aspect)
            for (const auto& [method, s] : scores)
                if (!std::isfinite(s.score) || !std::isfinite(s.preference_pct))
                    throw NumericalError("study score is not finite");
}

ReportFormat parse_report_format(const std::string& s) {
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ConfigError("unknown report format '" + s + "'");
}

namespace {

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

/// Bold for the best value, underline for the runner-up; ties share a mark.
std::string marked(double v, const std::vector<double>& column, bool lower_is_better) {
    std::vector<double> distinct = column;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!lower_is_better) std::reverse(distinct.begin(), distinct.end());
    const std::string s = fmt(v);
    if (column.size() < 2) return s;
    if (v == distinct[0]) return "**" + s + "**";
    if (distinct.size() > 1 && v == distinct[1]) return "<u>" + s + "</u>";
    return s;
}

std::string column_title(const MetricColumn& c) {
    std::string t = c.name;
    if (c.display_scale != 1.0) t += " (x" + fmt(c.display_scale) + ")";
    return t + (c.lower_is_better ? " ↓" : " ↑");
}

const std::vector<StudyAspect> kAspects{StudyAspect::identity, StudyAspect::quality, StudyAspect::preservation};

std::string aspect_title(StudyAspect a) {
    std::string s = to_string(a);
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string markdown(const EvalReport& r) {
    std::ostringstream o;
    if (!r.metrics.empty()) {
        o << "| Method |";
        for (const auto& c : r.metrics) o << ' ' << column_title(c) << " |";
        o << "\n|---|";
        for (std::size_t i = 0; i < r.metrics.size(); ++i) o << "---|";
        o << '\n';
        for (const auto& m : r.methods) {
            o << "| " << m << " |";
            for (const auto& c : r.metrics) {
                std::vector<double> col;
                for (const auto& [_, v] : c.values) col.push_back(v * c.display_scale);
                auto it = c.values.find(m);
                o << ' ' << (it == c.values.end() ? "-" : marked(it->second * c.display_scale, col, c.lower_is_better))
                  << " |";
            }
            o << '\n';
        }
    }
    if (r.study) {
        const auto& s = *r.study;
        if (!r.metrics.empty()) o << '\n';
        o << "| Method |";
        for (auto a : kAspects) o << ' ' << aspect_title(a) << " Pref. (%) | " << aspect_title(a) << " Score |";
        o << "\n|---|";
        for (std::size_t i = 0; i < 2 * kAspects.size(); ++i) o << "---|";
        o << '\n';
        for (const auto& m : s.methods) {
            o << "| " << m << " |";
            for (auto a : kAspects) {
                auto ait = s.by_aspect.find(a);
                if (ait == s.by_aspect.end()) {
                    o << " - | - |";
                    continue;
                }
                std::vector<double> pref, score;
                for (const auto& [_, v] : ait->second) pref.push_back(v.preference_pct), score.push_back(v.score);
                const auto& v = ait->second.at(m);
                o << ' ' << marked(v.preference_pct, pref, false) << " | " << marked(v.score, score, false) << " |";
            }
            o << '\n';
        }
        o << "\nScore weighting: " << to_string(s.weighting) << '\n';
    }
    if (!r.metadata.empty()) {
        o << '\n';
        for (const auto& [k, v] : r.metadata) o << "- " << k << ": " << v << '\n';
    }
    return o.str();
}

std::string csv(const EvalReport& r) {
    std::ostringstream o;
    o << "method";
    for (const auto& c : r.metrics) o << ',' << c.name << (c.display_scale != 1.0 ? "_x" + fmt(c.display_scale) : "");
    if (r.study)
        for (auto a : kAspects) o << ',' << to_string(a) << "_pref," << to_string(a) << "_score";
    o << '\n';
    for (const auto& m : r.methods) {
        o << m;
        for (const auto& c : r.metrics) {
            auto it = c.values.find(m);
            o << ',' << (it == c.values.end() ? "" : fmt(it->second * c.display_scale, "%.17g"));
        }
        if (r.study)
            for (auto a : kAspects) {
                auto ait = r.study->by_aspect.find(a);
                if (ait == r.study->by_aspect.end()) {
                    o << ",,";
                    continue;
                }
                const auto& v = ait->second.at(m);
                o << ',' << fmt(v.preference_pct, "%.17g") << ',' << fmt(v.score, "%.17g");
            }
        o << '\n';
    }
    return o.str();
}

std::string as_json(const EvalReport& r) {
    json j;
    j["methods"] = r.methods;
    j["metadata"] = r.metadata;
    json metrics = json::object();
    for (const auto& c : r.metrics)
        metrics[c.name] = {{"lower_is_better", c.lower_is_better}, {"display_scale", c.display_scale}, {"values", c.values}};
    j["metrics"] = metrics;
    if (r.study) {
        json s = {{"weighting", to_string(r.study->weighting)}};
        for (const auto& [aspect, scores] : r.study->by_aspect) {
            json a = json::object();
            for (const auto& [m, v] : scores) a[m] = {{"preference_pct", v.preference_pct}, {"score", v.score}};
            s["aspects"][to_string(aspect)] = {{"responses", r.study->responses.at(aspect)}, {"scores", a}};
        }
        j["study"] = s;
    }
    return j.dump(2) + "\n";
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
    report.validate();
    switch (format) {
        case ReportFormat::markdown: return markdown(report);
        case ReportFormat::csv: return csv(report);
        case ReportFormat::json: return as_json(report);
    }
    return {};
}

EvalReport evaluate_manifest(const std::string& path, const Embedder& emb, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open evaluation manifest '" + path + "'");
    const fs::path dir = fs::path(path).parent_path();
    struct Row {
        Tensor result, reference, garment, mask;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::vector<std::string> order;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        auto img = [&](const char* k) { return read_png((dir / j.at(k).get<std::string>()).string(), PngKind::image); };
        Row r{img("result"), img("reference"), img("garment"), {}};
        r.mask = j.contains("mask") ? read_png((dir / j.at("mask").get<std::string>()).string(), PngKind::mask)
                                    : Tensor({1, r.result.dim(1), r.result.dim(2)}, 1.0);
        const std::string method = j.at("method");
        if (!rows.count(method)) order.push_back(method);
        rows[method].push_back(std::move(r));
    }
    if (order.empty()) throw ConfigError("evaluation manifest '" + path + "' is empty");

    EvalReport rep;
    rep.methods = order;
    MetricColumn c_ssim{"SSIM", false, 1.0, {}}, c_dino{"DINO-M", false, 1.0, {}}, c_clipi{"CLIP-I", false, 1.0, {}},
        c_fid{"FID", true, 1.0, {}};
    std::map<std::string, double> kids;
    for (const auto& m : order) {
        const auto& rs = rows[m];
        const auto n = static_cast<Eigen::Index>(rs.size());
        Eigen::MatrixXd fa(n, emb.dim), fb(n, emb.dim);
        double s = 0.0, d = 0.0, ci = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Row& r = rs[static_cast<std::size_t>(i)];
            s += ssim(r.result, r.reference);
            d += dino_m(r.result, r.mask, r.garment, emb);
            ci += embedding_similarity(r.result, r.reference, emb);
            const auto ea = emb.embed_image(r.result), eb = emb.embed_image(r.reference);
            for (int k = 0; k < emb.dim; ++k) fa(i, k) = ea[static_cast<std::size_t>(k)], fb(i, k) = eb[static_cast<std::size_t>(k)];
        }
        c_ssim.values[m] = s / static_cast<double>(n);
        c_dino.values[m] = d / static_cast<double>(n);
        c_clipi.values[m] = ci / static_cast<double>(n);
        if (n >= 2) {
            c_fid.values[m] = fid(fa, fb);
            kids[m] = kid(fa, fb);
        }
    }
    rep.metrics = {c_fid, kid_column(kids), c_ssim, c_dino, c_clipi};
    rep.metadata = {{"dataset", fs::path(path).filename().string()},
                    {"seed", std::to_string(seed)},
                    {"embedder", emb.id},
                    {"dino_m_masking", "elementwise, full frame"}};
    return rep;
}

}  // namespace garmentgen
