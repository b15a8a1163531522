#include <algorithm>
#include <cmath>
#include <vector>

#include "garmentgen/kernels.hpp"

namespace garmentgen::kernels::serial {

void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* out) {
    const int pad = g.kernel / 2;
    for (int co = 0; co < g.out_channels; ++co) {
        for (int y = 0; y < g.height; ++y) {
            for (int xo = 0; xo < g.width; ++xo) {
                double acc = b ? b[co] : 0.0;
                for (int ci = 0; ci < g.in_channels; ++ci) {
                    for (int ky = 0; ky < g.kernel; ++ky) {
                        const int yi = y + ky - pad;
                        if (yi < 0 || yi >= g.height) continue;
                        for (int kx = 0; kx < g.kernel; ++kx) {
                            const int xi = xo + kx - pad;
                            if (xi < 0 || xi >= g.width) continue;
                            acc += w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] *
                                   x[(ci * g.height + yi) * g.width + xi];
                        }
                    }
                }
                out[(co * g.height + y) * g.width + xo] = acc;
            }
        }
    }
}

void conv2d_backward(const ConvGeom& g, const double* x, const double* w, const double* dout, double* dx, double* dw,
                     double* db) {
    const int pad = g.kernel / 2;
    for (int co = 0; co < g.out_channels; ++co) {
        for (int y = 0; y < g.height; ++y) {
            for (int xo = 0; xo < g.width; ++xo) {
                const double go = dout[(co * g.height + y) * g.width + xo];
                if (db) db[co] += go;
                for (int ci = 0; ci < g.in_channels; ++ci) {
                    for (int ky = 0; ky < g.kernel; ++ky) {
                        const int yi = y + ky - pad;
                        if (yi < 0 || yi >= g.height) continue;
                        for (int kx = 0; kx < g.kernel; ++kx) {
                            const int xi = xo + kx - pad;
                            if (xi < 0 || xi >= g.width) continue;
                            const int wi = ((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx;
                            const int xi_flat = (ci * g.height + yi) * g.width + xi;
                            if (dw) dw[wi] += go * x[xi_flat];
                            if (dx) dx[xi_flat] += go * w[wi];
                        }
                    }
                }
            }
        }
    }
}

void linear_forward(int rows, int in, int out, const double* x, const double* w, const double* b, double* y) {
    for (int r = 0; r < rows; ++r) {
        for (int o = 0; o < out; ++o) {
            double acc = b ? b[o] : 0.0;
            for (int i = 0; i < in; ++i) acc += x[r * in + i] * w[o * in + i];
            y[r * out + o] = acc;
        }
    }
}

void linear_backward(int rows, int in, int out, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* db) {
    for (int r = 0; r < rows; ++r) {
        for (int o = 0; o < out; ++o) {
            const double g = dy[r * out + o];
            if (db) db[o] += g;
            for (int i = 0; i < in; ++i) {
                if (dx) dx[r * in + i] += g * w[o * in + i];
                if (dw) dw[o * in + i] += g * x[r * in + i];
            }
        }
    }
}

void attention_forward(const AttnGeom& g, const double* q, const double* k, const double* v, double* out,
                       double* probs) {
    const int dh = g.dim / g.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> row(static_cast<std::size_t>(g.kv_len));
    for (int h = 0; h < g.heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < g.q_len; ++i) {
            double m = -INFINITY;
            for (int j = 0; j < g.kv_len; ++j) {
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += q[i * g.dim + off + c] * k[j * g.dim + off + c];
                row[j] = s * scale;
                m = std::max(m, row[j]);
            }
            double z = 0.0;
            for (int j = 0; j < g.kv_len; ++j) {
                row[j] = std::exp(row[j] - m);
                z += row[j];
            }
            for (int j = 0; j < g.kv_len; ++j) {
                row[j] /= z;
                if (probs) probs[(static_cast<std::size_t>(h) * g.q_len + i) * g.kv_len + j] = row[j];
            }
            for (int c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (int j = 0; j < g.kv_len; ++j) acc += row[j] * v[j * g.dim + off + c];
                out[i * g.dim + off + c] = acc;
            }
        }
    }
}

void attention_backward(const AttnGeom& g, const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, double* dq, double* dk, double* dv) {
    const int dh = g.dim / g.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dp(static_cast<std::size_t>(g.kv_len));
    for (int h = 0; h < g.heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < g.q_len; ++i) {
            const double* p = probs + (static_cast<std::size_t>(h) * g.q_len + i) * g.kv_len;
            double dot = 0.0;
            for (int j = 0; j < g.kv_len; ++j) {
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += dout[i * g.dim + off + c] * v[j * g.dim + off + c];
                dp[j] = s;
                dot += s * p[j];
            }
            for (int j = 0; j < g.kv_len; ++j) {
                const double ds = p[j] * (dp[j] - dot) * scale;
                for (int c = 0; c < dh; ++c) {
                    if (dq) dq[i * g.dim + off + c] += ds * k[j * g.dim + off + c];
                    if (dk) dk[j * g.dim + off + c] += ds * q[i * g.dim + off + c];
                    if (dv) dv[j * g.dim + off + c] += p[j] * dout[i * g.dim + off + c];
                }
            }
        }
    }
}

void group_norm_forward(const NormGeom& g, const double* x, const double* gamma, const double* beta, double* out,
                        double* mean, double* rstd) {
    const int cpg = g.channels / g.groups;
    const double n = static_cast<double>(cpg) * g.spatial;
    for (int grp = 0; grp < g.groups; ++grp) {
        const double* xs = x + static_cast<std::size_t>(grp) * cpg * g.spatial;
        double mu = 0.0;
        for (int i = 0; i < cpg * g.spatial; ++i) mu += xs[i];
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < cpg * g.spatial; ++i) var += (xs[i] - mu) * (xs[i] - mu);
        var /= n;
        const double rs = 1.0 / std::sqrt(var + g.eps);
        mean[grp] = mu;
        rstd[grp] = rs;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c)
            for (int s = 0; s < g.spatial; ++s) {
                const std::size_t idx = static_cast<std::size_t>(c) * g.spatial + s;
                out[idx] = (x[idx] - mu) * rs * gamma[c] + beta[c];
            }
    }
}

void group_norm_backward(const NormGeom& g, const double* x, const double* gamma, const double* mean,
                         const double* rstd, const double* dout, double* dx, double* dgamma, double* dbeta) {
    const int cpg = g.channels / g.groups;
    const double n = static_cast<double>(cpg) * g.spatial;
    for (int grp = 0; grp < g.groups; ++grp) {
        const double mu = mean[grp];
        const double rs = rstd[grp];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c)
            for (int s = 0; s < g.spatial; ++s) {
                const std::size_t idx = static_cast<std::size_t>(c) * g.spatial + s;
                const double xhat = (x[idx] - mu) * rs;
                if (dgamma) dgamma[c] += dout[idx] * xhat;
                if (dbeta) dbeta[c] += dout[idx];
                const double dxhat = dout[idx] * gamma[c];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
        if (!dx) continue;
        for (int c = grp * cpg; c < (grp + 1) * cpg; ++c)
            for (int s = 0; s < g.spatial; ++s) {
                const std::size_t idx = static_cast<std::size_t>(c) * g.spatial + s;
                const double xhat = (x[idx] - mu) * rs;
                const double dxhat = dout[idx] * gamma[c];
                dx[idx] += rs * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
            }
    }
}

}  // namespace garmentgen::kernels::serial
