#include "birf/kernels/kernels.hpp"

#include <cmath>
#include <cstring>

namespace birf::kernels {
namespace {

void matmul_bias(const float* w, const float* bias, const float* x, float* y,
                 int out_w, int in_w, int batch) {
    for (int o = 0; o < out_w; ++o) {
        float* yo = y + static_cast<std::size_t>(o) * batch;
        const float b = bias ? bias[o] : 0.f;
        for (int j = 0; j < batch; ++j) yo[j] = b;
        const float* wo = w + static_cast<std::size_t>(o) * in_w;
        for (int i = 0; i < in_w; ++i) {
            const float wv = wo[i];
            const float* xi = x + static_cast<std::size_t>(i) * batch;
            for (int j = 0; j < batch; ++j) yo[j] += wv * xi[j];
        }
    }
}

void matmul_grad_input(const float* w, const float* dy, float* dx,
                       int out_w, int in_w, int batch) {
    for (int i = 0; i < in_w; ++i) {
        float* dxi = dx + static_cast<std::size_t>(i) * batch;
        std::memset(dxi, 0, sizeof(float) * batch);
        for (int o = 0; o < out_w; ++o) {
            const float wv = w[static_cast<std::size_t>(o) * in_w + i];
            const float* dyo = dy + static_cast<std::size_t>(o) * batch;
            for (int j = 0; j < batch; ++j) dxi[j] += wv * dyo[j];
        }
    }
}

void matmul_grad_params(const float* x, const float* dy, float* dw, float* dbias,
                        int out_w, int in_w, int batch) {
    for (int o = 0; o < out_w; ++o) {
        const float* dyo = dy + static_cast<std::size_t>(o) * batch;
        float bsum = 0.f;
        for (int j = 0; j < batch; ++j) bsum += dyo[j];
        dbias[o] += bsum;
        float* dwo = dw + static_cast<std::size_t>(o) * in_w;
        for (int i = 0; i < in_w; ++i) {
            const float* xi = x + static_cast<std::size_t>(i) * batch;
            float acc = 0.f;
            for (int j = 0; j < batch; ++j) acc += dyo[j] * xi[j];
            dwo[i] += acc;
        }
    }
}

void relu(float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_mask_grad(const float* y, float* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(y[i] > 0.f)) dy[i] = 0.f;
}

void ste_mask(const float* latent, float* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(std::fabs(latent[i]) <= 1.f)) grad[i] = 0.f;
}

void adam_update(float* values, float* grads, float* m, float* v, std::size_t n,
                 float lr, float beta1, float beta2, float eps, float bc1, float bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grads[i];
        m[i] = beta1 * m[i] + (1.f - beta1) * g;
        v[i] = beta2 * v[i] + (1.f - beta2) * g * g;
        const float mhat = m[i] * bc1;
        const float vhat = v[i] * bc2;
        values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        grads[i] = 0.f;
    }
}

void pack_signs(const float* latent, uint8_t* bytes, std::size_t n) {
    if (n == 0) return;
    std::memset(bytes, 0, (n + 7) / 8);
    for (std::size_t i = 0; i < n; ++i)
        if (latent[i] >= 0.f) bytes[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
}

bool all_finite(const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
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
    return ops;
}

}  // namespace birf::kernels
