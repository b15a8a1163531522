#include <cmath>
#include <sstream>

#include "doctest.h"
#include "garmentgen/evalkit.hpp"
#include "json.hpp"
#include "metric_oracles.hpp"

using namespace garmentgen;
using oracle::gaussian;
using oracle::ssim_loop;

namespace {

/// Embedder returning hand-set vectors keyed by the first pixel value.
Embedder stub(std::map<double, std::vector<double>> table, int dim) {
    Embedder e;
    e.id = "stub";
    e.dim = dim;
    e.embed_image = [table](const Tensor& img) { return table.at(img[0]); };
    return e;
}

Tensor constant(double v, int c = 1, int h = 16, int w = 16) { return Tensor({c, h, w}, v); }

}  // namespace

TEST_CASE("dino_m and embedding similarity oracles") {
    std::mt19937_64 rng(1);
    const Tensor g = Tensor::randn({3, 32, 32}, rng);
    const Embedder toy = toy_embedder(3);
    CHECK(dino_m(g, Tensor({1, 32, 32}, 1.0), g, toy) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(embedding_similarity(g, g, toy) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dino_m(g, Tensor({1, 32, 32}, 1.0), g, toy) == dino_m(g, Tensor({1, 32, 32}, 1.0), g, toy));

    const Embedder orth = stub({{1.0, {1, 0, 0, 0}}, {2.0, {0, 1, 0, 0}}}, 4);
    CHECK(dino_m(constant(1.0, 3), Tensor({1, 16, 16}, 1.0), constant(2.0, 3), orth) == 0.0);
    const Embedder half = stub({{1.0, {1, 0, 0, 0}}, {2.0, {1, 1, 0, 0}}}, 4);
    CHECK(dino_m(constant(1.0, 3), Tensor({1, 16, 16}, 1.0), constant(2.0, 3), half) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(embedding_similarity(constant(1.0), constant(2.0), stub({{1.0, {0, 1}}, {2.0, {1, 0}}}, 2)) == 0.0);
    CHECK(embedding_similarity(constant(1.0), constant(2.0), stub({{1.0, {3, 4}}, {2.0, {4, 3}}}, 2)) ==
          doctest::Approx(24.0 / 25.0).epsilon(1e-15));
    CHECK_THROWS_AS(embedding_similarity(constant(1.0), std::string("x"), half), ParameterError);
    CHECK_THROWS_AS(dino_m(constant(1.0, 3), Tensor({1, 16, 16}, 1.0), constant(0.0, 3),
                           stub({{1.0, {1, 0}}, {0.0, {0, 0}}}, 2)),
                    NumericalError);
    const double it = embedding_similarity(g, std::string("a red t-shirt"), toy);
    CHECK((it >= -1.0 && it <= 1.0));
}

TEST_CASE("ssim oracles") {
    std::mt19937_64 rng(2);
    const Tensor a = Tensor::randn({3, 24, 20}, rng), b = Tensor::randn({3, 24, 20}, rng);
    const SsimOptions o;
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ssim(a, b) - ssim_loop(a, b, o)) < 1e-6);
    CHECK(std::abs(ssim(a, a * 0.5 + b * 0.5) - ssim_loop(a, a * 0.5 + b * 0.5, o)) < 1e-6);
    // Constant images 0 and L: only the stabilising constants survive.
    const double L = o.data_range, c1 = std::pow(o.k1 * L, 2);
    CHECK(ssim(constant(0.0), constant(L)) == doctest::Approx(c1 / (L * L + c1)).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(constant(0.0, 1, 8, 8), constant(0.0, 1, 8, 8)), ShapeError);
    CHECK_THROWS_AS(ssim(constant(0.0), constant(0.0, 1, 16, 17)), ShapeError);
}

TEST_CASE("fid oracles") {
    const Eigen::MatrixXd x = gaussian(500, 4, 0.0, 1), y = gaussian(400, 4, 0.7, 2);
    CHECK(fid(x, x) < 1e-6);
    CHECK(std::abs(fid(x, y) - fid(y, x)) < 1e-8);
    CHECK(fid(x, y) > 0.0);

    // d = 1 reduces to (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2.
    const Eigen::MatrixXd a = gaussian(300, 1, 0.0, 3) * 1.5, b = gaussian(200, 1, 2.0, 4);
    auto stats = [](const Eigen::MatrixXd& m) {
        const double mu = m.mean();
        const double var = (m.array() - mu).square().sum() / static_cast<double>(m.rows() - 1);
        return std::pair{mu, std::sqrt(var)};
    };
    const auto [ma, sa] = stats(a);
    const auto [mb, sb] = stats(b);
    CHECK(fid(a, b) == doctest::Approx((ma - mb) * (ma - mb) + (sa - sb) * (sa - sb)).epsilon(1e-9));

    Eigen::MatrixXd bad = x;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(fid(bad, x), NumericalError);
}

TEST_CASE("kid oracles") {
    Eigen::MatrixXd x(2, 2), y(2, 2);
    x << 1, 0, 0, 1;
    y << 1, 1, 0, 0;
    // k = (x.y/2 + 1)^3: XX and YY cross terms are 1, XY sums to 8.75.
    CHECK(kid(x, y) == -2.375);
    CHECK(kid_serial(x, y) == -2.375);
    const Eigen::MatrixXd a = gaussian(300, 5, 0.0, 7), b = gaussian(250, 5, 0.3, 8);
    CHECK(kid(a, b) == doctest::Approx(kid_serial(a, b)).epsilon(1e-12));
    CHECK(kid(a, b) > 0.0);
    Eigen::MatrixXd one(1, 2);
    one << 1, 1;
    CHECK_THROWS_AS(kid(one, x), ShapeError);
}

TEST_CASE("human score aggregation") {
    const std::vector<std::string> abc{"A", "B", "C"};
    const std::vector<StudyResponse> rs{{"r1", StudyAspect::identity, {"A", "B", "C"}},
                                        {"r2", StudyAspect::identity, {"A", "B", "C"}},
                                        {"r3", StudyAspect::identity, {"B", "A", "C"}}};
    const StudyScores s = human_scores(rs, abc);
    const auto& id = s.by_aspect.at(StudyAspect::identity);
    CHECK(id.at("A").score == 8.0 / 3.0);
    CHECK(id.at("A").preference_pct == doctest::Approx(200.0 / 3.0));
    CHECK(id.at("B").score == 7.0 / 3.0);
    CHECK(id.at("C").score == 1.0);
    double firsts = 0.0;
    for (const auto& [m, v] : id) firsts += v.preference_pct;
    CHECK(firsts == doctest::Approx(100.0));

    auto reversed = rs;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(human_scores(reversed, abc).by_aspect.at(StudyAspect::identity).at("A").score == id.at("A").score);

    const StudyScores inv = human_scores(rs, abc, RankWeighting::inverse);
    CHECK(inv.by_aspect.at(StudyAspect::identity).at("A").score == doctest::Approx((3.0 + 3.0 + 1.5) / 3.0));

    const std::vector<std::string> five{"X", "P", "Q", "R", "S"};
    std::vector<StudyResponse> unanimous;
    for (int i = 0; i < 4; ++i) unanimous.push_back({"u", StudyAspect::quality, {"X", "P", "Q", "R", "S"}});
    const auto u = human_scores(unanimous, five).by_aspect.at(StudyAspect::quality).at("X");
    CHECK(u.preference_pct == 100.0);
    CHECK(u.score == 5.0);

    CHECK_THROWS_AS(human_scores({{"bad", StudyAspect::identity, {"A", "B"}}}, abc), ParameterError);
    CHECK_THROWS_AS(human_scores({{"dup", StudyAspect::identity, {"A", "A", "C"}}}, abc), ParameterError);
}

TEST_CASE("report rendering") {
    EvalReport r;
    r.methods = {"ours", "baseline"};
    r.metrics = {{"FID", true, 1.0, {{"ours", 7.98}, {"baseline", 8.19}}},
                 kid_column({{"ours", 0.0123}, {"baseline", 0.0456}}),
                 {"SSIM", false, 1.0, {{"ours", 0.7}, {"baseline", 0.8}}}};
    r.metadata = {{"dataset", "toy"}, {"seed", "1"}, {"embedder", "toy"}};
    const std::string md = emit_report(r, ReportFormat::markdown);
    CHECK(md.find("**7.98**") != std::string::npos);
    CHECK(md.find("<u>8.19</u>") != std::string::npos);
    CHECK(md.find("**1.23**") != std::string::npos);  // KID x100
    CHECK(md.find("KID (x100)") != std::string::npos);
    CHECK(md.find("**0.8**") != std::string::npos);
    CHECK(emit_report(r, ReportFormat::markdown) == md);

    const std::string csv = emit_report(r, ReportFormat::csv);
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "method,FID,KID_x100,SSIM");
    std::getline(in, row);
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0] == "ours");
    CHECK(std::stod(cells[1]) == 7.98);
    CHECK(std::stod(cells[2]) == 0.0123 * 100.0);

    const auto j = nlohmann::json::parse(emit_report(r, ReportFormat::json));
    CHECK(j.at("metrics").at("FID").at("values").at("ours").get<double>() == 7.98);

    EvalReport one;
    one.methods = {"solo"};
    one.metrics = {{"FID", true, 1.0, {{"solo", 3.0}}}};
    one.metadata = r.metadata;
    const std::string md1 = emit_report(one, ReportFormat::markdown);
    CHECK(std::count(md1.begin(), md1.end(), '\n') >= 3);
    CHECK(md1.find("| solo | 3 |") != std::string::npos);

    EvalReport missing = one;
    missing.metadata.erase("seed");
    CHECK_THROWS_AS(emit_report(missing, ReportFormat::csv), ParameterError);
}

TEST_CASE("study table uses the three-aspect layout") {
    const std::vector<std::string> ms{"ours", "other"};
    std::vector<StudyResponse> rs;
    for (auto a : {StudyAspect::identity, StudyAspect::quality, StudyAspect::preservation}) {
        rs.push_back({"1", a, {"ours", "other"}});
        rs.push_back({"2", a, {"other", "ours"}});
        rs.push_back({"3", a, {"ours", "other"}});
    }
    EvalReport r;
    r.methods = ms;
    r.study = human_scores(rs, ms);
    r.metadata = {{"dataset", "study"}, {"seed", "0"}, {"embedder", "none"}};
    const std::string md = emit_report(r, ReportFormat::markdown);
    CHECK(md.find("| Method | Identity Pref. (%) | Identity Score | Quality Pref. (%) | Quality Score | "
                  "Preservation Pref. (%) | Preservation Score |") != std::string::npos);
    CHECK(md.find("Score weighting: linear") != std::string::npos);
    const std::string csv = emit_report(r, ReportFormat::csv);
    CHECK(csv.rfind("method,identity_pref,identity_score,quality_pref,quality_score,preservation_pref,preservation_score",
                    0) == 0);
}
