#pragma once

#include <cstddef>
#include <cstdint>

namespace birf::kernels {

// Batched numeric primitives behind the training/render hot loops.
// Matrix operands use a samples-last layout: X[in_w][batch], Y[out_w][batch],
// rows contiguous, with batch a multiple of 8 (callers pad with zero columns).
// Weights are row-major W[out_w][in_w].
//
// Two implementations exist: a plain scalar reference and an AVX2+FMA variant.
// active() picks one at process start (env BIRF_KERNELS=scalar|avx2 overrides
// CPU detection). Elementwise kernels are bit-identical across variants;
// matrix kernels may differ by FMA/reassociation rounding and are
// equivalence-tested against the scalar reference under a relative tolerance.
struct Ops {
    const char* name;

    // Y = W * X + bias (bias broadcast over the batch).
    void (*matmul_bias)(const float* w, const float* bias, const float* x, float* y,
                        int out_w, int in_w, int batch);
    // dX = W^T * dY (overwrites dX).
    void (*matmul_grad_input)(const float* w, const float* dy, float* dx,
                              int out_w, int in_w, int batch);
    // dW += dY * X^T ; dbias += row sums of dY.
    void (*matmul_grad_params)(const float* x, const float* dy, float* dw, float* dbias,
                               int out_w, int in_w, int batch);
    // x = max(x, 0)
    void (*relu)(float* x, std::size_t n);
    // dy *= (y > 0), y being the post-activation values
    void (*relu_mask_grad)(const float* y, float* dy, std::size_t n);
    // grad *= (|latent| <= 1)
    void (*ste_mask)(const float* latent, float* grad, std::size_t n);
    // Bias-corrected Adam update; zeroes grads afterwards. bc1 = 1/(1-b1^t), bc2 likewise.
    void (*adam_update)(float* values, float* grads, float* m, float* v, std::size_t n,
                        float lr, float beta1, float beta2, float eps, float bc1, float bc2);
    // bit i of bytes = (latent[i] >= 0), LSB-first; trailing pad bits zero.
    void (*pack_signs)(const float* latent, uint8_t* bytes, std::size_t n);
    bool (*all_finite)(const float* x, std::size_t n);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the CPU lacks AVX2/FMA
const Ops& active();

}  // namespace birf::kernels
