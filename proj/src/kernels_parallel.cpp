#include <algorithm>
#include <cmath>
#include <vector>

#include "garmentgen/kernels.hpp"

namespace garmentgen::kernels::parallel {

namespace {

// cols[(ci*k + ky)*k + kx][y*W + x] = x[ci][y+ky-pad][x+kx-pad] (0 outside)
void im2col(const ConvGeom& g, const double* x, double* cols) {
    const int pad = g.kernel / 2;
    const int hw = g.height * g.width;
    const int rows = g.in_channels * g.kernel * g.kernel;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int kx = r % g.kernel;
        const int ky = (r / g.kernel) % g.kernel;
        const int ci = r / (g.kernel * g.kernel);
        double* dst = cols + static_cast<std::size_t>(r) * hw;
        for (int y = 0; y < g.height; ++y) {
            const int yi = y + ky - pad;
            for (int xo = 0; xo < g.width; ++xo) {
                const int xi = xo + kx - pad;
                dst[y * g.width + xo] = (yi < 0 || yi >= g.height || xi < 0 || xi >= g.width)
                                            ? 0.0
                                            : x[(ci * g.height + yi) * g.width + xi];
            }
        }
    }
}

// Each input channel only receives from its own k*k rows, so channels are
// independent.
void col2im_add(const ConvGeom& g, const double* cols, double* dx) {
    const int pad = g.kernel / 2;
    const int hw = g.height * g.width;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.in_channels; ++ci) {
        for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
                const double* src = cols + static_cast<std::size_t>((ci * g.kernel + ky) * g.kernel + kx) * hw;
                for (int y = 0; y < g.height; ++y) {
                    const int yi = y + ky - pad;
                    if (yi < 0 || yi >= g.height) continue;
                    for (int xo = 0; xo < g.width; ++xo) {
                        const int xi = xo + kx - pad;
                        if (xi < 0 || xi >= g.width) continue;
                        dx[(ci * g.height + yi) * g.width + xi] += src[y * g.width + xo];
                    }
                }
            }
    }
}

std::vector<double>& scratch(int slot, std::size_t n) {
    thread_local std::vector<double> bufs[2];
    auto& b = bufs[slot];
    if (b.size() < n) b.resize(n);
    return b;
}

}  // namespace

void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* out) {
    const int hw = g.height * g.width;
    const int kk = g.in_channels * g.kernel * g.kernel;
    const double* cols = x;
    if (g.kernel != 1) {
        auto& buf = scratch(0, static_cast<std::size_t>(kk) * hw);
        im2col(g, x, buf.data());
        cols = buf.data();
    }
#pragma omp parallel for schedule(static)
    for (int co = 0; co < g.out_channels; ++co) {
        double* o = out + static_cast<std::size_t>(co) * hw;
        const double bias = b ? b[co] : 0.0;
        for (int j = 0; j < hw; ++j) o[j] = bias;
        const double* wr = w + static_cast<std::size_t>(co) * kk;
        for (int r = 0; r < kk; ++r) {
            const double a = wr[r];
            const double* c = cols + static_cast<std::size_t>(r) * hw;
            for (int j = 0; j < hw; ++j) o[j] += a * c[j];
        }
    }
}

void conv2d_backward(const ConvGeom& g, const double* x, const double* w, const double* dout, double* dx, double* dw,
                     double* db) {
    const int hw = g.height * g.width;
    const int kk = g.in_channels * g.kernel * g.kernel;
    if (db) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < g.out_channels; ++co) {
            double s = 0.0;
            for (int j = 0; j < hw; ++j) s += dout[static_cast<std::size_t>(co) * hw + j];
            db[co] += s;
        }
    }
    if (dw) {
        const double* cols = x;
        if (g.kernel != 1) {
            auto& buf = scratch(0, static_cast<std::size_t>(kk) * hw);
            im2col(g, x, buf.data());
            cols = buf.data();
        }
#pragma omp parallel for schedule(static)
        for (int co = 0; co < g.out_channels; ++co) {
            const double* go = dout + static_cast<std::size_t>(co) * hw;
            double* wr = dw + static_cast<std::size_t>(co) * kk;
            for (int r = 0; r < kk; ++r) {
                const double* c = cols + static_cast<std::size_t>(r) * hw;
                double s = 0.0;
                for (int j = 0; j < hw; ++j) s += go[j] * c[j];
                wr[r] += s;
            }
        }
    }
    if (dx) {
        double* dcols = dx;
        std::vector<double>* buf = nullptr;
        if (g.kernel != 1) {
            buf = &scratch(1, static_cast<std::size_t>(kk) * hw);
            dcols = buf->data();
        }
#pragma omp parallel for schedule(static)
        for (int r = 0; r < kk; ++r) {
            double* d = dcols + static_cast<std::size_t>(r) * hw;
            if (g.kernel != 1) std::fill(d, d + hw, 0.0);
            for (int co = 0; co < g.out_channels; ++co) {
                const double a = w[static_cast<std::size_t>(co) * kk + r];
                const double* go = dout + static_cast<std::size_t>(co) * hw;
                for (int j = 0; j < hw; ++j) d[j] += a * go[j];
            }
        }
        if (g.kernel != 1) col2im_add(g, dcols, dx);
    }
}

void linear_forward(int rows, int in, int out, const double* x, const double* w, const double* b, double* y) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* xr = x + static_cast<std::size_t>(r) * in;
        for (int o = 0; o < out; ++o) {
            const double* wr = w + static_cast<std::size_t>(o) * in;
            double acc = 0.0;
            for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
            y[static_cast<std::size_t>(r) * out + o] = acc + (b ? b[o] : 0.0);
        }
    }
}

void linear_backward(int rows, int in, int out, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* db) {
    if (dx) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r) {
            double* dxr = dx + static_cast<std::size_t>(r) * in;
            for (int o = 0; o < out; ++o) {
                const double g = dy[static_cast<std::size_t>(r) * out + o];
                const double* wr = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) dxr[i] += g * wr[i];
            }
        }
    }
    if (dw || db) {
#pragma omp parallel for schedule(static)
        for (int o = 0; o < out; ++o) {
            double* dwr = dw ? dw + static_cast<std::size_t>(o) * in : nullptr;
            double bsum = 0.0;
            for (int r = 0; r < rows; ++r) {
                const double g = dy[static_cast<std::size_t>(r) * out + o];
                bsum += g;
                if (dwr) {
                    const double* xr = x + static_cast<std::size_t>(r) * in;
                    for (int i = 0; i < in; ++i) dwr[i] += g * xr[i];
                }
            }
            if (db) db[o] += bsum;
        }
    }
}

void attention_forward(const AttnGeom& g, const double* q, const double* k, const double* v, double* out,
                       double* probs) {
    const int dh = g.dim / g.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int total = g.heads * g.q_len;
#pragma omp parallel for schedule(static)
    for (int hi = 0; hi < total; ++hi) {
        const int h = hi / g.q_len;
        const int i = hi % g.q_len;
        const int off = h * dh;
        std::vector<double>& row = scratch(0, static_cast<std::size_t>(g.kv_len));
        const double* qi = q + static_cast<std::size_t>(i) * g.dim + off;
        double m = -INFINITY;
        for (int j = 0; j < g.kv_len; ++j) {
            const double* kj = k + static_cast<std::size_t>(j) * g.dim + off;
            double s = 0.0;
            for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
            row[j] = s * scale;
            m = std::max(m, row[j]);
        }
        double z = 0.0;
        for (int j = 0; j < g.kv_len; ++j) {
            row[j] = std::exp(row[j] - m);
            z += row[j];
        }
        double* oi = out + static_cast<std::size_t>(i) * g.dim + off;
        for (int c = 0; c < dh; ++c) oi[c] = 0.0;
        for (int j = 0; j < g.kv_len; ++j) {
            row[j] /= z;
            if (probs) probs[static_cast<std::size_t>(hi) * g.kv_len + j] = row[j];
            const double* vj = v + static_cast<std::size_t>(j) * g.dim + off;
            for (int c = 0; c < dh; ++c) oi[c] += row[j] * vj[c];
        }
    }
}

void attention_backward(const AttnGeom& g, const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, double* dq, double* dk, double* dv) {
    const int dh = g.dim / g.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    // dS[h,i,j] = P (dP - <dP,P>) * scale
    std::vector<double> ds(static_cast<std::size_t>(g.heads) * g.q_len * g.kv_len);
    const int total = g.heads * g.q_len;
#pragma omp parallel for schedule(static)
    for (int hi = 0; hi < total; ++hi) {
        const int h = hi / g.q_len;
        const int i = hi % g.q_len;
        const int off = h * dh;
        const double* p = probs + static_cast<std::size_t>(hi) * g.kv_len;
        double* dsr = ds.data() + static_cast<std::size_t>(hi) * g.kv_len;
        const double* go = dout + static_cast<std::size_t>(i) * g.dim + off;
        double dot = 0.0;
        for (int j = 0; j < g.kv_len; ++j) {
            const double* vj = v + static_cast<std::size_t>(j) * g.dim + off;
            double s = 0.0;
            for (int c = 0; c < dh; ++c) s += go[c] * vj[c];
            dsr[j] = s;
            dot += s * p[j];
        }
        for (int j = 0; j < g.kv_len; ++j) dsr[j] = p[j] * (dsr[j] - dot) * scale;
        if (dq) {
            double* dqi = dq + static_cast<std::size_t>(i) * g.dim + off;
            for (int j = 0; j < g.kv_len; ++j) {
                const double* kj = k + static_cast<std::size_t>(j) * g.dim + off;
                for (int c = 0; c < dh; ++c) dqi[c] += dsr[j] * kj[c];
            }
        }
    }
    if (!dk && !dv) return;
    const int total_kv = g.heads * g.kv_len;
#pragma omp parallel for schedule(static)
    for (int hj = 0; hj < total_kv; ++hj) {
        const int h = hj / g.kv_len;
        const int j = hj % g.kv_len;
        const int off = h * dh;
        double* dkj = dk ? dk + static_cast<std::size_t>(j) * g.dim + off : nullptr;
        double* dvj = dv ? dv + static_cast<std::size_t>(j) * g.dim + off : nullptr;
        for (int i = 0; i < g.q_len; ++i) {
            const std::size_t pij = (static_cast<std::size_t>(h) * g.q_len + i) * g.kv_len + j;
            if (dkj) {
                const double* qi = q + static_cast<std::size_t>(i) * g.dim + off;
                for (int c = 0; c < dh; ++c) dkj[c] += ds[pij] * qi[c];
            }
            if (dvj) {
                const double* go = dout + static_cast<std::size_t>(i) * g.dim + off;
                for (int c = 0; c < dh; ++c) dvj[c] += probs[pij] * go[c];
            }
        }
    }
}

void group_norm_forward(const NormGeom& g, const double* x, const double* gamma, const double* beta, double* out,
                        double* mean, double* rstd) {
    const int cpg = g.channels / g.groups;
    const std::size_t n = static_cast<std::size_t>(cpg) * g.spatial;
#pragma omp parallel for schedule(static)
    for (int grp = 0; grp < g.groups; ++grp) {
        const double* xs = x + grp * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += xs[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (xs[i] - mu) * (xs[i] - mu);
        var /= static_cast<double>(n);
        const double rs = 1.0 / std::sqrt(var + g.eps);
        mean[grp] = mu;
        rstd[grp] = rs;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c) {
            const double a = rs * gamma[c];
            const double bb = beta[c] - mu * a;
            const double* xc = x + static_cast<std::size_t>(c) * g.spatial;
            double* oc = out + static_cast<std::size_t>(c) * g.spatial;
            for (int s = 0; s < g.spatial; ++s) oc[s] = xc[s] * a + bb;
        }
    }
}

void group_norm_backward(const NormGeom& g, const double* x, const double* gamma, const double* mean,
                         const double* rstd, const double* dout, double* dx, double* dgamma, double* dbeta) {
    const int cpg = g.channels / g.groups;
    const double n = static_cast<double>(cpg) * g.spatial;
#pragma omp parallel for schedule(static)
    for (int grp = 0; grp < g.groups; ++grp) {
        const double mu = mean[grp];
        const double rs = rstd[grp];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c) {
            const double* xc = x + static_cast<std::size_t>(c) * g.spatial;
            const double* gc = dout + static_cast<std::size_t>(c) * g.spatial;
            double sg = 0.0;
            double sgx = 0.0;
            for (int s = 0; s < g.spatial; ++s) {
                const double xhat = (xc[s] - mu) * rs;
                sg += gc[s];
                sgx += gc[s] * xhat;
            }
            if (dgamma) dgamma[c] += sgx;
            if (dbeta) dbeta[c] += sg;
            sum_dxhat += sg * gamma[c];
            sum_dxhat_xhat += sgx * gamma[c];
        }
        if (!dx) continue;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c) {
            const double* xc = x + static_cast<std::size_t>(c) * g.spatial;
            const double* gc = dout + static_cast<std::size_t>(c) * g.spatial;
            double* dxc = dx + static_cast<std::size_t>(c) * g.spatial;
            for (int s = 0; s < g.spatial; ++s) {
                const double xhat = (xc[s] - mu) * rs;
                dxc[s] += rs * (gc[s] * gamma[c] - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
            }
        }
    }
}

}  // namespace garmentgen::kernels::parallel
