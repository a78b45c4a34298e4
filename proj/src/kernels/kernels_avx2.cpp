// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must gate on runtime CPU support (see kernels.cpp).

#include "birf/kernels/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace birf::kernels {
namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// Y = W X + bias, batch % 8 == 0. Register-blocked 4 outputs x 16 columns.
void matmul_bias(const float* w, const float* bias, const float* x, float* y,
                 int out_w, int in_w, int batch) {
    const std::size_t bb = static_cast<std::size_t>(batch);
    int o = 0;
    for (; o + 4 <= out_w; o += 4) {
        const float* w0 = w + static_cast<std::size_t>(o + 0) * in_w;
        const float* w1 = w + static_cast<std::size_t>(o + 1) * in_w;
        const float* w2 = w + static_cast<std::size_t>(o + 2) * in_w;
        const float* w3 = w + static_cast<std::size_t>(o + 3) * in_w;
        int j = 0;
        for (; j + 16 <= batch; j += 16) {
            __m256 a00 = _mm256_setzero_ps(), a01 = _mm256_setzero_ps();
            __m256 a10 = _mm256_setzero_ps(), a11 = _mm256_setzero_ps();
            __m256 a20 = _mm256_setzero_ps(), a21 = _mm256_setzero_ps();
            __m256 a30 = _mm256_setzero_ps(), a31 = _mm256_setzero_ps();
            const float* xj = x + j;
            for (int i = 0; i < in_w; ++i) {
                const __m256 x0 = _mm256_loadu_ps(xj + i * bb);
                const __m256 x1 = _mm256_loadu_ps(xj + i * bb + 8);
                const __m256 v0 = _mm256_broadcast_ss(w0 + i);
                const __m256 v1 = _mm256_broadcast_ss(w1 + i);
                const __m256 v2 = _mm256_broadcast_ss(w2 + i);
                const __m256 v3 = _mm256_broadcast_ss(w3 + i);
                a00 = _mm256_fmadd_ps(v0, x0, a00);
                a01 = _mm256_fmadd_ps(v0, x1, a01);
                a10 = _mm256_fmadd_ps(v1, x0, a10);
                a11 = _mm256_fmadd_ps(v1, x1, a11);
                a20 = _mm256_fmadd_ps(v2, x0, a20);
                a21 = _mm256_fmadd_ps(v2, x1, a21);
                a30 = _mm256_fmadd_ps(v3, x0, a30);
                a31 = _mm256_fmadd_ps(v3, x1, a31);
            }
            const __m256 b0 = _mm256_broadcast_ss(bias + o + 0);
            const __m256 b1 = _mm256_broadcast_ss(bias + o + 1);
            const __m256 b2 = _mm256_broadcast_ss(bias + o + 2);
            const __m256 b3 = _mm256_broadcast_ss(bias + o + 3);
            float* yj = y + j;
            _mm256_storeu_ps(yj + (o + 0) * bb, _mm256_add_ps(a00, b0));
            _mm256_storeu_ps(yj + (o + 0) * bb + 8, _mm256_add_ps(a01, b0));
            _mm256_storeu_ps(yj + (o + 1) * bb, _mm256_add_ps(a10, b1));
            _mm256_storeu_ps(yj + (o + 1) * bb + 8, _mm256_add_ps(a11, b1));
            _mm256_storeu_ps(yj + (o + 2) * bb, _mm256_add_ps(a20, b2));
            _mm256_storeu_ps(yj + (o + 2) * bb + 8, _mm256_add_ps(a21, b2));
            _mm256_storeu_ps(yj + (o + 3) * bb, _mm256_add_ps(a30, b3));
            _mm256_storeu_ps(yj + (o + 3) * bb + 8, _mm256_add_ps(a31, b3));
        }
        for (; j < batch; j += 8) {
            __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
            __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
            const float* xj = x + j;
            for (int i = 0; i < in_w; ++i) {
                const __m256 xv = _mm256_loadu_ps(xj + i * bb);
                a0 = _mm256_fmadd_ps(_mm256_broadcast_ss(w0 + i), xv, a0);
                a1 = _mm256_fmadd_ps(_mm256_broadcast_ss(w1 + i), xv, a1);
                a2 = _mm256_fmadd_ps(_mm256_broadcast_ss(w2 + i), xv, a2);
                a3 = _mm256_fmadd_ps(_mm256_broadcast_ss(w3 + i), xv, a3);
            }
            float* yj = y + j;
            _mm256_storeu_ps(yj + (o + 0) * bb, _mm256_add_ps(a0, _mm256_broadcast_ss(bias + o + 0)));
            _mm256_storeu_ps(yj + (o + 1) * bb, _mm256_add_ps(a1, _mm256_broadcast_ss(bias + o + 1)));
            _mm256_storeu_ps(yj + (o + 2) * bb, _mm256_add_ps(a2, _mm256_broadcast_ss(bias + o + 2)));
            _mm256_storeu_ps(yj + (o + 3) * bb, _mm256_add_ps(a3, _mm256_broadcast_ss(bias + o + 3)));
        }
    }
    for (; o < out_w; ++o) {
        const float* wo = w + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < batch; j += 8) {
            __m256 acc = _mm256_setzero_ps();
            const float* xj = x + j;
            for (int i = 0; i < in_w; ++i)
                acc = _mm256_fmadd_ps(_mm256_broadcast_ss(wo + i), _mm256_loadu_ps(xj + i * bb), acc);
            _mm256_storeu_ps(y + static_cast<std::size_t>(o) * bb + j,
                             _mm256_add_ps(acc, _mm256_broadcast_ss(bias + o)));
        }
    }
}

// dX = W^T dY. Weight access strides over rows; the broadcast hides it.
void matmul_grad_input(const float* w, const float* dy, float* dx,
                       int out_w, int in_w, int batch) {
    const std::size_t bb = static_cast<std::size_t>(batch);
    for (int i = 0; i < in_w; ++i) {
        const float* wcol = w + i;
        for (int j = 0; j < batch; j += 8) {
            __m256 acc = _mm256_setzero_ps();
            const float* dyj = dy + j;
            for (int o = 0; o < out_w; ++o)
                acc = _mm256_fmadd_ps(_mm256_broadcast_ss(wcol + static_cast<std::size_t>(o) * in_w),
                                      _mm256_loadu_ps(dyj + o * bb), acc);
            _mm256_storeu_ps(dx + static_cast<std::size_t>(i) * bb + j, acc);
        }
    }
}

// dW += dY X^T ; dbias += row sums. One output row at a time, 4 input rows blocked.
void matmul_grad_params(const float* x, const float* dy, float* dw, float* dbias,
                        int out_w, int in_w, int batch) {
    const std::size_t bb = static_cast<std::size_t>(batch);
    for (int o = 0; o < out_w; ++o) {
        const float* dyo = dy + static_cast<std::size_t>(o) * bb;
        __m256 bacc = _mm256_setzero_ps();
        for (int j = 0; j < batch; j += 8) bacc = _mm256_add_ps(bacc, _mm256_loadu_ps(dyo + j));
        dbias[o] += hsum8(bacc);

        float* dwo = dw + static_cast<std::size_t>(o) * in_w;
        int i = 0;
        for (; i + 4 <= in_w; i += 4) {
            __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
            __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
            const float* x0 = x + static_cast<std::size_t>(i + 0) * bb;
            const float* x1 = x + static_cast<std::size_t>(i + 1) * bb;
            const float* x2 = x + static_cast<std::size_t>(i + 2) * bb;
            const float* x3 = x + static_cast<std::size_t>(i + 3) * bb;
            for (int j = 0; j < batch; j += 8) {
                const __m256 d = _mm256_loadu_ps(dyo + j);
                a0 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x0 + j), a0);
                a1 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x1 + j), a1);
                a2 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x2 + j), a2);
                a3 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x3 + j), a3);
            }
            dwo[i + 0] += hsum8(a0);
            dwo[i + 1] += hsum8(a1);
            dwo[i + 2] += hsum8(a2);
            dwo[i + 3] += hsum8(a3);
        }
        for (; i < in_w; ++i) {
            __m256 acc = _mm256_setzero_ps();
            const float* xi = x + static_cast<std::size_t>(i) * bb;
            for (int j = 0; j < batch; j += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(dyo + j), _mm256_loadu_ps(xi + j), acc);
            dwo[i] += hsum8(acc);
        }
    }
}

void relu(float* x, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_mask_grad(const float* y, float* dy, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dy + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
    }
    for (; i < n; ++i)
        if (!(y[i] > 0.f)) dy[i] = 0.f;
}

void ste_mask(const float* latent, float* grad, std::size_t n) {
    const __m256 absmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
    const __m256 one = _mm256_set1_ps(1.f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 a = _mm256_and_ps(_mm256_loadu_ps(latent + i), absmask);
        const __m256 keep = _mm256_cmp_ps(a, one, _CMP_LE_OQ);
        _mm256_storeu_ps(grad + i, _mm256_and_ps(_mm256_loadu_ps(grad + i), keep));
    }
    for (; i < n; ++i)
        if (!(std::fabs(latent[i]) <= 1.f)) grad[i] = 0.f;
}

void adam_update(float* values, float* grads, float* m, float* v, std::size_t n,
                 float lr, float beta1, float beta2, float eps, float bc1, float bc2) {
    const __m256 vb1 = _mm256_set1_ps(beta1), vnb1 = _mm256_set1_ps(1.f - beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2), vnb2 = _mm256_set1_ps(1.f - beta2);
    const __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
    const __m256 vbc1 = _mm256_set1_ps(bc1), vbc2 = _mm256_set1_ps(bc2);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grads + i);
        __m256 mi = _mm256_loadu_ps(m + i);
        __m256 vi = _mm256_loadu_ps(v + i);
        mi = _mm256_add_ps(_mm256_mul_ps(vb1, mi), _mm256_mul_ps(vnb1, g));
        vi = _mm256_add_ps(_mm256_mul_ps(vb2, vi), _mm256_mul_ps(vnb2, _mm256_mul_ps(g, g)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_mul_ps(mi, vbc1);
        const __m256 vhat = _mm256_mul_ps(vi, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(values + i, _mm256_sub_ps(_mm256_loadu_ps(values + i), step));
        _mm256_storeu_ps(grads + i, zero);
    }
    for (; i < n; ++i) {
        const float g = grads[i];
        m[i] = beta1 * m[i] + (1.f - beta1) * g;
        v[i] = beta2 * v[i] + (1.f - beta2) * g * g;
        values[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
        grads[i] = 0.f;
    }
}

void pack_signs(const float* latent, uint8_t* bytes, std::size_t n) {
    if (n == 0) return;
    std::memset(bytes, 0, (n + 7) / 8);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    // movemask collects one comparison bit per lane, already LSB-first.
    for (; i + 8 <= n; i += 8) {
        const int mask = _mm256_movemask_ps(_mm256_cmp_ps(_mm256_loadu_ps(latent + i), zero, _CMP_GE_OQ));
        bytes[i / 8] = static_cast<uint8_t>(mask);
    }
    for (; i < n; ++i)
        if (latent[i] >= 0.f) bytes[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
}

bool all_finite(const float* x, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // x*0 is 0 for finite x, NaN for inf/NaN inputs.
        const __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(x + i), zero);
        const __m256 ok = _mm256_cmp_ps(prod, zero, _CMP_EQ_OQ);
        if (_mm256_movemask_ps(ok) != 0xff) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

const Ops* avx2_ops_impl() {
    static const Ops ops = {
        "avx2",
        matmul_bias,
        matmul_grad_input,
        matmul_grad_params,
        relu,
        relu_mask_grad,
        ste_mask,
        adam_update,
        pack_signs,
        all_finite,
    };
    return &ops;
}

}  // namespace birf::kernels
