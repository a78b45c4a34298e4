#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "birf/grid/grid.hpp"
#include "birf/nn/nn.hpp"

namespace birf::field {

// Batched field queries; the render/sampler layers only see these shapes.
using FieldFn = std::function<void(std::span<const Vec3> pos, std::span<const Vec3> dir,
                                   std::span<float> sigma, std::span<Rgb> rgb)>;
using DensityFn = std::function<void(std::span<const Vec3> pos, std::span<float> sigma)>;

struct FieldConfig {
    int pe_freqs = 4;          // sinusoidal positional encoding frequencies
    int embedding_width = 15;  // density head emits 1 raw density + this many embedding values
    int hidden_width = 128;
    float density_exp_clamp = 15.f;  // raw density clamped to [-c, c] before exp
};

class FieldModel {
public:
    FieldModel() = default;
    FieldModel(grid::GridConfig grid_config, FieldConfig cfg);

    void init_params(std::mt19937_64& rng);

    const FieldConfig& config() const { return cfg_; }
    grid::HybridGrid& grid() { return grid_; }
    const grid::HybridGrid& grid() const { return grid_; }
    nn::Mlp& density_mlp() { return density_mlp_; }
    const nn::Mlp& density_mlp() const { return density_mlp_; }
    nn::Mlp& color_mlp() { return color_mlp_; }
    const nn::Mlp& color_mlp() const { return color_mlp_; }

    int density_input_width() const;
    int color_input_width() const;

    float activate_density(float raw) const;

    // Single-point queries (reference path; the batched pipeline is
    // column-for-column identical).
    std::pair<float, std::vector<float>> query_density(const Vec3& x) const;
    Rgb query_color(std::span<const float> embedding, const Vec3& d) const;

private:
    grid::HybridGrid grid_;
    nn::Mlp density_mlp_, color_mlp_;
    FieldConfig cfg_;
};

// Block-based forward/backward over samples. Forward stores only sigma/rgb;
// backward recomputes the block with caches, so per-sample memory stays flat.
class FieldPipeline {
public:
    static constexpr int kBlock = 64;

    explicit FieldPipeline(const FieldModel& model) : model_(&model) {}
    explicit FieldPipeline(FieldModel& model) : model_(&model), mut_(&model) {}

    // n up to kBlock. dir/rgb may be omitted for density-only queries.
    void forward_block(std::span<const Vec3> pos, std::span<const Vec3> dir,
                       std::span<float> sigma, std::span<Rgb> rgb);
    void density_block(std::span<const Vec3> pos, std::span<float> sigma);

    // Recomputes the block and accumulates gradients into the MLP params and
    // grid latents. dsigma is d(loss)/d(sigma) (post-activation).
    void backward_block(std::span<const Vec3> pos, std::span<const Vec3> dir,
                        std::span<const float> dsigma, std::span<const Rgb> drgb);

    // Convenience wrappers over arbitrary-length spans.
    void forward(std::span<const Vec3> pos, std::span<const Vec3> dir,
                 std::span<float> sigma, std::span<Rgb> rgb);
    void density(std::span<const Vec3> pos, std::span<float> sigma);
    void backward(std::span<const Vec3> pos, std::span<const Vec3> dir,
                  std::span<const float> dsigma, std::span<const Rgb> drgb);

    FieldFn field_fn() { return [this](auto p, auto d, auto s, auto c) { forward(p, d, s, c); }; }
    DensityFn density_fn() { return [this](auto p, auto s) { density(p, s); }; }

private:
    void encode_inputs(std::span<const Vec3> pos, int nb);
    void run_density(int nb, bool cache);

    const FieldModel* model_;
    FieldModel* mut_ = nullptr;  // required for backward
    std::vector<float> xd_, yd_, xc_, yc_;
    std::vector<float> dyd_, dxc_, dyc_, dxd_;
    std::vector<float> raw_, scratch_;
    nn::Mlp::BatchCache dcache_, ccache_;
};

}  // namespace birf::field
