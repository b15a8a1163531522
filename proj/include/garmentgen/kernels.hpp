#pragma once

// Dense numeric kernels used by the autograd ops.
//
// Two implementations share one signature set:
//   kernels::serial    straightforward loops; the reference the tests trust
//   kernels::parallel  im2col/GEMM formulations with OpenMP over independent
//                      output rows (each output element is reduced by exactly
//                      one thread in a fixed order, so results do not depend
//                      on the thread count)
// Backward kernels accumulate into their outputs (+=). Null pointers skip a
// gradient.

#include <span>

namespace garmentgen::kernels {

struct ConvGeom {
    int in_channels;
    int out_channels;
    int height;
    int width;
    int kernel;  // odd, "same" padding, stride 1
};

struct AttnGeom {
    int q_len;
    int kv_len;
    int dim;
    int heads;
};

struct NormGeom {
    int channels;
    int spatial;
    int groups;
    double eps;
};

#define GARMENTGEN_KERNEL_DECLS                                                                                       \
    void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* out);           \
    void conv2d_backward(const ConvGeom& g, const double* x, const double* w, const double* dout, double* dx,         \
                         double* dw, double* db);                                                                     \
    void linear_forward(int rows, int in, int out, const double* x, const double* w, const double* b, double* y);     \
    void linear_backward(int rows, int in, int out, const double* x, const double* w, const double* dy, double* dx,   \
                         double* dw, double* db);                                                                     \
    void attention_forward(const AttnGeom& g, const double* q, const double* k, const double* v, double* out,         \
                           double* probs);                                                                            \
    void attention_backward(const AttnGeom& g, const double* q, const double* k, const double* v,                     \
                            const double* probs, const double* dout, double* dq, double* dk, double* dv);             \
    void group_norm_forward(const NormGeom& g, const double* x, const double* gamma, const double* beta, double* out, \
                            double* mean, double* rstd);                                                              \
    void group_norm_backward(const NormGeom& g, const double* x, const double* gamma, const double* mean,            \
                             const double* rstd, const double* dout, double* dx, double* dgamma, double* dbeta);

namespace serial {
GARMENTGEN_KERNEL_DECLS
}  // namespace serial

namespace parallel {
GARMENTGEN_KERNEL_DECLS
}  // namespace parallel

#undef GARMENTGEN_KERNEL_DECLS

// Kernels the model code calls.
namespace active = parallel;

}  // namespace garmentgen::kernels
