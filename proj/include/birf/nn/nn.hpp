#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "birf/common.hpp"

namespace birf::nn {

struct ParamTensor {
    std::string name;
    std::vector<float> values;
    std::vector<float> grads;
    std::vector<int> shape;

    std::size_t size() const { return values.size(); }

    static ParamTensor zeros(std::string name, std::vector<int> shape);
};

enum class OutputActivation : uint8_t { none = 0, sigmoid = 1 };

struct MlpSpec {
    int input_width = 0;
    int hidden_width = 128;
    int hidden_layers = 1;
    int output_width = 0;
    OutputActivation output_activation = OutputActivation::none;

    int num_weight_layers() const { return hidden_layers + 1; }
    int layer_in(int l) const { return l == 0 ? input_width : hidden_width; }
    int layer_out(int l) const { return l == num_weight_layers() - 1 ? output_width : hidden_width; }
    std::size_t param_count() const;
    void validate() const;
};

// Dense ReLU MLP with explicit gradients. Parameters live in one ParamTensor,
// layer by layer: weights (row-major [out][in]) then bias.
class Mlp {
public:
    Mlp() = default;
    Mlp(MlpSpec spec, std::string name);

    void init_params(std::mt19937_64& rng);

    const MlpSpec& spec() const { return spec_; }
    ParamTensor& params() { return params_; }
    const ParamTensor& params() const { return params_; }

    const float* weights(int layer) const { return params_.values.data() + w_off_[layer]; }
    const float* biases(int layer) const { return params_.values.data() + b_off_[layer]; }
    float* weights_mut(int layer) { return params_.values.data() + w_off_[layer]; }
    float* biases_mut(int layer) { return params_.values.data() + b_off_[layer]; }

    struct ForwardCache {
        std::vector<std::vector<float>> acts;  // acts[0]=input, acts[l+1]=post layer l
        bool valid = false;
    };

    std::vector<float> forward(std::span<const float> input, ForwardCache* cache = nullptr) const;
    // Accumulates into params().grads, returns gradient w.r.t. the input.
    std::vector<float> backward(const ForwardCache& cache, std::span<const float> upstream_grad);

    // Batched path used by the field pipeline. Layout [width][batch], batch % 8 == 0.
    struct BatchCache {
        std::vector<std::vector<float>> acts;
        int batch = 0;
    };
    // x: [input_width][batch]; y (output of last layer, activation applied): [output_width][batch]
    void forward_batch(const float* x, float* y, int batch, BatchCache* cache = nullptr) const;
    // dy: [output_width][batch] gradient w.r.t. post-activation output; dx optional out [input_width][batch]
    void backward_batch(const BatchCache& cache, const float* x, const float* dy, float* dx, int batch);

private:
    MlpSpec spec_;
    ParamTensor params_;
    std::vector<std::size_t> w_off_, b_off_;
};

struct AdamState {
    std::vector<float> m, v;
    int64_t step_count = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    static AdamState for_params(std::size_t n);
};

// One bias-corrected Adam step; grads are zeroed afterwards.
// Throws on non-finite gradients, naming the parameter block.
void adam_step(ParamTensor& params, AdamState& state, float lr);
void adam_step(const std::string& name, std::span<float> values, std::span<float> grads,
               AdamState& state, float lr);

struct LrSchedule {
    float base_lr = 0.01f;
    int warmup_iters = 1000;
    std::vector<int> decay_points = {15000, 18000};
    float decay_factor = 0.33f;
};

float lr_at(const LrSchedule& schedule, int64_t iter);

// Sinusoidal positional encoding: [x, sin(2^k pi x), cos(2^k pi x)] for
// k = 0..freqs-1, per axis. Output length 3 + 6*freqs.
int positional_encode_width(int freqs);
void positional_encode(const Vec3& x, int freqs, float* out);

// Real spherical harmonics basis through degree 3 (16 values). Non-unit
// directions are normalized internally.
inline constexpr int kShWidth = 16;
void sh_encode(const Vec3& d, float* out);

}  // namespace birf::nn
