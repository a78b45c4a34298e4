#include "birf/nn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "birf/kernels/kernels.hpp"

namespace birf::nn {

ParamTensor ParamTensor::zeros(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.values.assign(n, 0.f);
    t.grads.assign(n, 0.f);
    return t;
}

std::size_t MlpSpec::param_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_weight_layers(); ++l)
        n += static_cast<std::size_t>(layer_out(l)) * layer_in(l) + layer_out(l);
    return n;
}

void MlpSpec::validate() const {
    if (input_width <= 0 || hidden_width <= 0 || output_width <= 0 || hidden_layers < 0)
        throw ConfigError("invalid MLP spec: widths must be positive");
}

Mlp::Mlp(MlpSpec spec, std::string name) : spec_(spec) {
    spec_.validate();
    params_ = ParamTensor::zeros(std::move(name), {static_cast<int>(spec_.param_count())});
    std::size_t off = 0;
    for (int l = 0; l < spec_.num_weight_layers(); ++l) {
        w_off_.push_back(off);
        off += static_cast<std::size_t>(spec_.layer_out(l)) * spec_.layer_in(l);
        b_off_.push_back(off);
        off += spec_.layer_out(l);
    }
}

void Mlp::init_params(std::mt19937_64& rng) {
    for (int l = 0; l < spec_.num_weight_layers(); ++l) {
        const float s = 1.f / std::sqrt(static_cast<float>(spec_.layer_in(l)));
        std::uniform_real_distribution<float> dist(-s, s);
        float* w = weights_mut(l);
        const std::size_t nw = static_cast<std::size_t>(spec_.layer_out(l)) * spec_.layer_in(l);
        for (std::size_t i = 0; i < nw; ++i) w[i] = dist(rng);
        std::memset(biases_mut(l), 0, sizeof(float) * spec_.layer_out(l));
    }
}

namespace {

void apply_output_activation(OutputActivation act, float* y, std::size_t n) {
    if (act == OutputActivation::sigmoid)
        for (std::size_t i = 0; i < n; ++i) y[i] = 1.f / (1.f + std::exp(-y[i]));
}

}  // namespace

std::vector<float> Mlp::forward(std::span<const float> input, ForwardCache* cache) const {
    if (static_cast<int>(input.size()) != spec_.input_width)
        throw ConfigError("mlp '" + params_.name + "': input width " + std::to_string(input.size()) +
                          " != spec " + std::to_string(spec_.input_width));
    // Runs through the batched kernels with a zero-padded batch of 8; lane 0
    // carries the sample, the zero lanes cannot affect it.
    constexpr int B = 8;
    std::vector<float> x(static_cast<std::size_t>(spec_.input_width) * B, 0.f);
    for (int i = 0; i < spec_.input_width; ++i) x[static_cast<std::size_t>(i) * B] = input[i];

    if (cache) {
        cache->acts.assign(spec_.num_weight_layers() + 1, {});
        cache->acts[0].assign(input.begin(), input.end());
    }

    const auto& k = kernels::active();
    std::vector<float> y;
    for (int l = 0; l < spec_.num_weight_layers(); ++l) {
        y.assign(static_cast<std::size_t>(spec_.layer_out(l)) * B, 0.f);
        k.matmul_bias(weights(l), biases(l), x.data(), y.data(), spec_.layer_out(l), spec_.layer_in(l), B);
        if (l < spec_.num_weight_layers() - 1)
            k.relu(y.data(), y.size());
        else
            apply_output_activation(spec_.output_activation, y.data(), y.size());
        if (cache) {
            auto& a = cache->acts[l + 1];
            a.resize(spec_.layer_out(l));
            for (int i = 0; i < spec_.layer_out(l); ++i) a[i] = y[static_cast<std::size_t>(i) * B];
        }
        x = y;
    }
    if (cache) cache->valid = true;

    std::vector<float> out(spec_.output_width);
    for (int i = 0; i < spec_.output_width; ++i) out[i] = y[static_cast<std::size_t>(i) * B];
    return out;
}

std::vector<float> Mlp::backward(const ForwardCache& cache, std::span<const float> upstream_grad) {
    if (!cache.valid) throw UsageError("mlp '" + params_.name + "': backward without a forward cache");
    if (static_cast<int>(upstream_grad.size()) != spec_.output_width)
        throw ConfigError("mlp '" + params_.name + "': upstream gradient width mismatch");

    const auto& k = kernels::active();
    const int L = spec_.num_weight_layers();
    std::vector<float> dy(upstream_grad.begin(), upstream_grad.end());

    if (spec_.output_activation == OutputActivation::sigmoid) {
        const auto& y = cache.acts[L];
        for (int i = 0; i < spec_.output_width; ++i) dy[i] *= y[i] * (1.f - y[i]);
    }

    constexpr int B = 8;
    std::vector<float> dyb, dxb, xb;
    for (int l = L - 1; l >= 0; --l) {
        const int in_w = spec_.layer_in(l), out_w = spec_.layer_out(l);
        if (l < L - 1) {
            // dy is w.r.t. post-ReLU output of layer l
            const auto& y = cache.acts[l + 1];
            for (int i = 0; i < out_w; ++i)
                if (!(y[i] > 0.f)) dy[i] = 0.f;
        }
        const auto& xin = cache.acts[l];
        xb.assign(static_cast<std::size_t>(in_w) * B, 0.f);
        for (int i = 0; i < in_w; ++i) xb[static_cast<std::size_t>(i) * B] = xin[i];
        dyb.assign(static_cast<std::size_t>(out_w) * B, 0.f);
        for (int i = 0; i < out_w; ++i) dyb[static_cast<std::size_t>(i) * B] = dy[i];

        k.matmul_grad_params(xb.data(), dyb.data(),
                             params_.grads.data() + w_off_[l], params_.grads.data() + b_off_[l],
                             out_w, in_w, B);
        dxb.assign(static_cast<std::size_t>(in_w) * B, 0.f);
        k.matmul_grad_input(weights(l), dyb.data(), dxb.data(), out_w, in_w, B);
        dy.resize(in_w);
        for (int i = 0; i < in_w; ++i) dy[i] = dxb[static_cast<std::size_t>(i) * B];
    }
    return dy;
}

void Mlp::forward_batch(const float* x, float* y, int batch, BatchCache* cache) const {
    const auto& k = kernels::active();
    const int L = spec_.num_weight_layers();
    if (cache) {
        cache->acts.resize(L);
        cache->batch = batch;
    }
    std::vector<float> tmp_a, tmp_b;
    const float* cur = x;
    for (int l = 0; l < L; ++l) {
        const std::size_t out_n = static_cast<std::size_t>(spec_.layer_out(l)) * batch;
        float* dst;
        if (l == L - 1) {
            dst = y;
        } else if (cache) {
            cache->acts[l].resize(out_n);
            dst = cache->acts[l].data();
        } else {
            auto& t = (l % 2 == 0) ? tmp_a : tmp_b;
            t.resize(out_n);
            dst = t.data();
        }
        k.matmul_bias(weights(l), biases(l), cur, dst, spec_.layer_out(l), spec_.layer_in(l), batch);
        if (l < L - 1)
            k.relu(dst, out_n);
        else
            apply_output_activation(spec_.output_activation, dst, out_n);
        cur = dst;
    }
    if (cache && L > 0) {
        // keep the final post-activation output too (sigmoid backward needs it)
        cache->acts[L - 1].assign(y, y + static_cast<std::size_t>(spec_.output_width) * batch);
    }
}

void Mlp::backward_batch(const BatchCache& cache, const float* x, const float* dy_in, float* dx, int batch) {
    if (cache.batch != batch) throw UsageError("mlp '" + params_.name + "': batch cache mismatch");
    const auto& k = kernels::active();
    const int L = spec_.num_weight_layers();

    std::vector<float> dy(dy_in, dy_in + static_cast<std::size_t>(spec_.output_width) * batch);
    if (spec_.output_activation == OutputActivation::sigmoid) {
        const float* y = cache.acts[L - 1].data();
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] * (1.f - y[i]);
    }

    std::vector<float> dx_tmp;
    for (int l = L - 1; l >= 0; --l) {
        const int in_w = spec_.layer_in(l), out_w = spec_.layer_out(l);
        if (l < L - 1) k.relu_mask_grad(cache.acts[l].data(), dy.data(), dy.size());
        const float* xin = (l == 0) ? x : cache.acts[l - 1].data();
        k.matmul_grad_params(xin, dy.data(),
                             params_.grads.data() + w_off_[l], params_.grads.data() + b_off_[l],
                             out_w, in_w, batch);
        const bool last = (l == 0);
        float* dst = last ? dx : (dx_tmp.resize(static_cast<std::size_t>(in_w) * batch), dx_tmp.data());
        if (last && !dx) break;
        k.matmul_grad_input(weights(l), dy.data(), dst, out_w, in_w, batch);
        if (!last) dy.assign(dst, dst + static_cast<std::size_t>(in_w) * batch);
    }
}

AdamState AdamState::for_params(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.f);
    s.v.assign(n, 0.f);
    return s;
}

void adam_step(const std::string& name, std::span<float> values, std::span<float> grads,
               AdamState& state, float lr) {
    if (values.size() != grads.size() || state.m.size() != values.size())
        throw ConfigError("adam: shape mismatch for block '" + name + "'");
    const auto& k = kernels::active();
    if (!k.all_finite(grads.data(), grads.size()))
        throw Error("non-finite gradient in parameter block '" + name + "'");
    state.step_count++;
    const float bc1 = 1.f / (1.f - std::pow(state.beta1, static_cast<float>(state.step_count)));
    const float bc2 = 1.f / (1.f - std::pow(state.beta2, static_cast<float>(state.step_count)));
    k.adam_update(values.data(), grads.data(), state.m.data(), state.v.data(), values.size(),
                  lr, state.beta1, state.beta2, state.eps, bc1, bc2);
}

void adam_step(ParamTensor& params, AdamState& state, float lr) {
    adam_step(params.name, params.values, params.grads, state, lr);
}

float lr_at(const LrSchedule& s, int64_t iter) {
    if (iter < s.warmup_iters)
        return s.base_lr * static_cast<float>(iter + 1) / static_cast<float>(s.warmup_iters);
    int k = 0;
    for (int p : s.decay_points)
        if (p <= iter) ++k;
    return s.base_lr * std::pow(s.decay_factor, static_cast<float>(k));
}

int positional_encode_width(int freqs) { return 3 + 6 * freqs; }

void positional_encode(const Vec3& x, int freqs, float* out) {
    out[0] = x.x;
    out[1] = x.y;
    out[2] = x.z;
    int o = 3;
    float scale = static_cast<float>(M_PI);
    for (int k = 0; k < freqs; ++k) {
        for (int a = 0; a < 3; ++a) out[o + a] = std::sin(scale * x[a]);
        for (int a = 0; a < 3; ++a) out[o + 3 + a] = std::cos(scale * x[a]);
        o += 6;
        scale *= 2.f;
    }
}

void sh_encode(const Vec3& d, float* out) {
    Vec3 u = d;
    const float n = norm(u);
    if (n == 0.f) throw UsageError("sh_encode: zero direction");
    u = u / n;
    const float x = u.x, y = u.y, z = u.z;
    const float xx = x * x, yy = y * y, zz = z * z;

    out[0] = 0.28209479177387814f;
    out[1] = 0.4886025119029199f * y;
    out[2] = 0.4886025119029199f * z;
    out[3] = 0.4886025119029199f * x;
    out[4] = 1.0925484305920792f * x * y;
    out[5] = 1.0925484305920792f * y * z;
    out[6] = 0.31539156525252005f * (3.f * zz - 1.f);
    out[7] = 1.0925484305920792f * x * z;
    out[8] = 0.5462742152960396f * (xx - yy);
    out[9] = 0.5900435899266435f * y * (3.f * xx - yy);
    out[10] = 2.890611442640554f * x * y * z;
    out[11] = 0.4570457994644658f * y * (5.f * zz - 1.f);
    out[12] = 0.3731763325901154f * z * (5.f * zz - 3.f);
    out[13] = 0.4570457994644658f * x * (5.f * zz - 1.f);
    out[14] = 1.445305721320277f * z * (xx - yy);
    out[15] = 0.5900435899266435f * x * (xx - 3.f * yy);
}

}  // namespace birf::nn
