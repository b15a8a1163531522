// Parallel kernels against the serial reference, and the serial backward
// kernels against central finite differences of their forward passes.

#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "garmentgen/kernels.hpp"

namespace k = garmentgen::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Checks d<f(x), probe>/dx against `analytic` on a handful of coordinates.
void check_fd(std::vector<double>& x, const std::function<std::vector<double>()>& f, const std::vector<double>& probe,
              const std::vector<double>& analytic) {
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(1, x.size() / 7)) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = dot(f(), probe);
        x[i] = saved - h;
        const double down = dot(f(), probe);
        x[i] = saved;
        CHECK(analytic[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    }
}

}  // namespace

TEST_CASE("conv2d: parallel matches serial and finite differences") {
    std::mt19937_64 rng(1);
    for (int kernel : {1, 3}) {
        const k::ConvGeom g{5, 7, 6, 4, kernel};
        const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
        auto x = rand_vec(g.in_channels * hw, rng);
        auto w = rand_vec(static_cast<std::size_t>(g.out_channels) * g.in_channels * kernel * kernel, rng);
        auto b = rand_vec(g.out_channels, rng);
        std::vector<double> ys(g.out_channels * hw), yp(ys.size());
        k::serial::conv2d_forward(g, x.data(), w.data(), b.data(), ys.data());
        k::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), yp.data());
        CHECK(max_diff(ys, yp) < 1e-12);

        auto dout = rand_vec(ys.size(), rng);
        std::vector<double> dxs(x.size()), dws(w.size()), dbs(b.size());
        std::vector<double> dxp(x.size()), dwp(w.size()), dbp(b.size());
        k::serial::conv2d_backward(g, x.data(), w.data(), dout.data(), dxs.data(), dws.data(), dbs.data());
        k::parallel::conv2d_backward(g, x.data(), w.data(), dout.data(), dxp.data(), dwp.data(), dbp.data());
        CHECK(max_diff(dxs, dxp) < 1e-12);
        CHECK(max_diff(dws, dwp) < 1e-12);
        CHECK(max_diff(dbs, dbp) < 1e-12);

        auto fwd = [&] {
            std::vector<double> y(ys.size());
            k::serial::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
            return y;
        };
        check_fd(x, fwd, dout, dxs);
        check_fd(w, fwd, dout, dws);
        check_fd(b, fwd, dout, dbs);
    }
}

TEST_CASE("linear: parallel matches serial and finite differences") {
    std::mt19937_64 rng(2);
    const int rows = 9, in = 6, out = 5;
    auto x = rand_vec(rows * in, rng), w = rand_vec(out * in, rng), b = rand_vec(out, rng);
    std::vector<double> ys(rows * out), yp(ys.size());
    k::serial::linear_forward(rows, in, out, x.data(), w.data(), b.data(), ys.data());
    k::parallel::linear_forward(rows, in, out, x.data(), w.data(), b.data(), yp.data());
    CHECK(max_diff(ys, yp) < 1e-12);
    auto dy = rand_vec(ys.size(), rng);
    std::vector<double> dxs(x.size()), dws(w.size()), dbs(b.size()), dxp(x.size()), dwp(w.size()), dbp(b.size());
    k::serial::linear_backward(rows, in, out, x.data(), w.data(), dy.data(), dxs.data(), dws.data(), dbs.data());
    k::parallel::linear_backward(rows, in, out, x.data(), w.data(), dy.data(), dxp.data(), dwp.data(), dbp.data());
    CHECK(max_diff(dxs, dxp) < 1e-12);
    CHECK(max_diff(dws, dwp) < 1e-12);
    CHECK(max_diff(dbs, dbp) < 1e-12);
    auto fwd = [&] {
        std::vector<double> y(ys.size());
        k::serial::linear_forward(rows, in, out, x.data(), w.data(), b.data(), y.data());
        return y;
    };
    check_fd(x, fwd, dy, dxs);
    check_fd(w, fwd, dy, dws);
}

TEST_CASE("attention: parallel matches serial and finite differences") {
    std::mt19937_64 rng(3);
    for (int heads : {1, 2}) {
        const k::AttnGeom g{5, 7, 4, heads};
        auto q = rand_vec(g.q_len * g.dim, rng), kk = rand_vec(g.kv_len * g.dim, rng),
             v = rand_vec(g.kv_len * g.dim, rng);
        std::vector<double> os(g.q_len * g.dim), op(os.size());
        std::vector<double> ps(static_cast<std::size_t>(heads) * g.q_len * g.kv_len), pp(ps.size());
        k::serial::attention_forward(g, q.data(), kk.data(), v.data(), os.data(), ps.data());
        k::parallel::attention_forward(g, q.data(), kk.data(), v.data(), op.data(), pp.data());
        CHECK(max_diff(os, op) < 1e-12);
        CHECK(max_diff(ps, pp) < 1e-12);
        auto dout = rand_vec(os.size(), rng);
        std::vector<double> dqs(q.size()), dks(kk.size()), dvs(v.size()), dqp(q.size()), dkp(kk.size()), dvp(v.size());
        k::serial::attention_backward(g, q.data(), kk.data(), v.data(), ps.data(), dout.data(), dqs.data(), dks.data(),
                                      dvs.data());
        k::parallel::attention_backward(g, q.data(), kk.data(), v.data(), pp.data(), dout.data(), dqp.data(),
                                        dkp.data(), dvp.data());
        CHECK(max_diff(dqs, dqp) < 1e-12);
        CHECK(max_diff(dks, dkp) < 1e-12);
        CHECK(max_diff(dvs, dvp) < 1e-12);
        auto fwd = [&] {
            std::vector<double> o(os.size()), p(ps.size());
            k::serial::attention_forward(g, q.data(), kk.data(), v.data(), o.data(), p.data());
            return o;
        };
        check_fd(q, fwd, dout, dqs);
        check_fd(kk, fwd, dout, dks);
        check_fd(v, fwd, dout, dvs);
    }
}

TEST_CASE("group norm: parallel matches serial and finite differences") {
    std::mt19937_64 rng(4);
    const k::NormGeom g{8, 10, 4, 1e-5};
    auto x = rand_vec(g.channels * g.spatial, rng), gamma = rand_vec(g.channels, rng),
         beta = rand_vec(g.channels, rng);
    std::vector<double> ys(x.size()), yp(x.size()), ms(g.groups), rs(g.groups), mp(g.groups), rp(g.groups);
    k::serial::group_norm_forward(g, x.data(), gamma.data(), beta.data(), ys.data(), ms.data(), rs.data());
    k::parallel::group_norm_forward(g, x.data(), gamma.data(), beta.data(), yp.data(), mp.data(), rp.data());
    CHECK(max_diff(ys, yp) < 1e-12);
    auto dout = rand_vec(x.size(), rng);
    std::vector<double> dxs(x.size()), dgs(g.channels), dbs(g.channels), dxp(x.size()), dgp(g.channels),
        dbp(g.channels);
    k::serial::group_norm_backward(g, x.data(), gamma.data(), ms.data(), rs.data(), dout.data(), dxs.data(),
                                   dgs.data(), dbs.data());
    k::parallel::group_norm_backward(g, x.data(), gamma.data(), mp.data(), rp.data(), dout.data(), dxp.data(),
                                     dgp.data(), dbp.data());
    CHECK(max_diff(dxs, dxp) < 1e-12);
    CHECK(max_diff(dgs, dgp) < 1e-12);
    CHECK(max_diff(dbs, dbp) < 1e-12);
    auto fwd = [&] {
        std::vector<double> y(x.size()), m(g.groups), r(g.groups);
        k::serial::group_norm_forward(g, x.data(), gamma.data(), beta.data(), y.data(), m.data(), r.data());
        return y;
    };
    check_fd(x, fwd, dout, dxs);
    check_fd(gamma, fwd, dout, dgs);
}

TEST_CASE("backward kernels accumulate and skip null outputs") {
    std::mt19937_64 rng(5);
    const int rows = 3, in = 2, out = 2;
    auto x = rand_vec(rows * in, rng), w = rand_vec(out * in, rng), dy = rand_vec(rows * out, rng);
    std::vector<double> dw1(w.size()), dw2(w.size(), 0.0);
    k::parallel::linear_backward(rows, in, out, x.data(), w.data(), dy.data(), nullptr, dw1.data(), nullptr);
    k::parallel::linear_backward(rows, in, out, x.data(), w.data(), dy.data(), nullptr, dw2.data(), nullptr);
    k::parallel::linear_backward(rows, in, out, x.data(), w.data(), dy.data(), nullptr, dw2.data(), nullptr);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(dw2[i] == doctest::Approx(2 * dw1[i]));
}
