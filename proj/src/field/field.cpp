#include "birf/field/field.hpp"

#include <cmath>
#include <cstring>

namespace birf::field {

FieldModel::FieldModel(grid::GridConfig grid_config, FieldConfig cfg)
    : grid_(std::move(grid_config)), cfg_(cfg) {
    nn::MlpSpec dspec;
    dspec.input_width = density_input_width();
    dspec.hidden_width = cfg_.hidden_width;
    dspec.hidden_layers = 1;
    dspec.output_width = 1 + cfg_.embedding_width;
    dspec.output_activation = nn::OutputActivation::none;
    density_mlp_ = nn::Mlp(dspec, "density_mlp");

    nn::MlpSpec cspec;
    cspec.input_width = color_input_width();
    cspec.hidden_width = cfg_.hidden_width;
    cspec.hidden_layers = 2;
    cspec.output_width = 3;
    cspec.output_activation = nn::OutputActivation::sigmoid;
    color_mlp_ = nn::Mlp(cspec, "color_mlp");
}

int FieldModel::density_input_width() const {
    return nn::positional_encode_width(cfg_.pe_freqs) + grid_.feature_width();
}

int FieldModel::color_input_width() const { return cfg_.embedding_width + nn::kShWidth; }

void FieldModel::init_params(std::mt19937_64& rng) {
    grid_.init(rng);
    density_mlp_.init_params(rng);
    color_mlp_.init_params(rng);
}

float FieldModel::activate_density(float raw) const {
    const float c = cfg_.density_exp_clamp;
    const float clamped = raw < -c ? -c : (raw > c ? c : raw);
    return std::exp(clamped);
}

std::pair<float, std::vector<float>> FieldModel::query_density(const Vec3& x) const {
    std::vector<float> in(density_input_width());
    nn::positional_encode(x, cfg_.pe_freqs, in.data());
    grid_.encode(x, in.data() + nn::positional_encode_width(cfg_.pe_freqs));
    std::vector<float> out = density_mlp_.forward(in);
    const float sigma = activate_density(out[0]);
    std::vector<float> embedding(out.begin() + 1, out.end());
    return {sigma, std::move(embedding)};
}

Rgb FieldModel::query_color(std::span<const float> embedding, const Vec3& d) const {
    std::vector<float> in(color_input_width());
    std::memcpy(in.data(), embedding.data(), sizeof(float) * cfg_.embedding_width);
    nn::sh_encode(d, in.data() + cfg_.embedding_width);
    std::vector<float> out = color_mlp_.forward(in);
    return {out[0], out[1], out[2]};
}

namespace {

inline int padded(int n) { return (n + 7) / 8 * 8; }

}  // namespace

void FieldPipeline::encode_inputs(std::span<const Vec3> pos, int nb) {
    const auto& cfg = model_->config();
    const int din = model_->density_input_width();
    const int pe_w = nn::positional_encode_width(cfg.pe_freqs);
    const int fw = model_->grid().feature_width();
    xd_.assign(static_cast<std::size_t>(din) * nb, 0.f);

    scratch_.resize(din);
    float* tmp = scratch_.data();
    for (std::size_t s = 0; s < pos.size(); ++s) {
        nn::positional_encode(pos[s], cfg.pe_freqs, tmp);
        model_->grid().encode(pos[s], tmp + pe_w);
        float* col = xd_.data() + s;
        for (int i = 0; i < pe_w + fw; ++i) col[static_cast<std::size_t>(i) * nb] = tmp[i];
    }
}

void FieldPipeline::run_density(int nb, bool cache) {
    const int dout = 1 + model_->config().embedding_width;
    yd_.resize(static_cast<std::size_t>(dout) * nb);
    model_->density_mlp().forward_batch(xd_.data(), yd_.data(), nb, cache ? &dcache_ : nullptr);
}

void FieldPipeline::density_block(std::span<const Vec3> pos, std::span<float> sigma) {
    const int n = static_cast<int>(pos.size());
    const int nb = padded(n);
    encode_inputs(pos, nb);
    run_density(nb, false);
    for (int s = 0; s < n; ++s) sigma[s] = model_->activate_density(yd_[s]);
}

void FieldPipeline::forward_block(std::span<const Vec3> pos, std::span<const Vec3> dir,
                                  std::span<float> sigma, std::span<Rgb> rgb) {
    const int n = static_cast<int>(pos.size());
    const int nb = padded(n);
    const int emb_w = model_->config().embedding_width;
    encode_inputs(pos, nb);
    run_density(nb, false);
    for (int s = 0; s < n; ++s) sigma[s] = model_->activate_density(yd_[s]);

    const int cin = model_->color_input_width();
    xc_.assign(static_cast<std::size_t>(cin) * nb, 0.f);
    // embedding rows follow the raw-density row of the density head output
    for (int e = 0; e < emb_w; ++e)
        std::memcpy(xc_.data() + static_cast<std::size_t>(e) * nb,
                    yd_.data() + static_cast<std::size_t>(1 + e) * nb, sizeof(float) * n);
    float sh[nn::kShWidth];
    for (int s = 0; s < n; ++s) {
        nn::sh_encode(dir[s], sh);
        float* col = xc_.data() + s;
        for (int i = 0; i < nn::kShWidth; ++i)
            col[static_cast<std::size_t>(emb_w + i) * nb] = sh[i];
    }
    yc_.resize(static_cast<std::size_t>(3) * nb);
    model_->color_mlp().forward_batch(xc_.data(), yc_.data(), nb, nullptr);
    for (int s = 0; s < n; ++s)
        rgb[s] = {yc_[s], yc_[static_cast<std::size_t>(nb) + s], yc_[static_cast<std::size_t>(2) * nb + s]};
}

void FieldPipeline::backward_block(std::span<const Vec3> pos, std::span<const Vec3> dir,
                                   std::span<const float> dsigma, std::span<const Rgb> drgb) {
    if (!mut_) throw UsageError("field pipeline built from a const model cannot run backward");
    const int n = static_cast<int>(pos.size());
    const int nb = padded(n);
    const auto& cfg = model_->config();
    const int emb_w = cfg.embedding_width;
    const int din = model_->density_input_width();
    const int cin = model_->color_input_width();
    const int dout = 1 + emb_w;

    // replay the forward with caches
    encode_inputs(pos, nb);
    run_density(nb, true);
    raw_.assign(yd_.begin(), yd_.begin() + nb);

    xc_.assign(static_cast<std::size_t>(cin) * nb, 0.f);
    for (int e = 0; e < emb_w; ++e)
        std::memcpy(xc_.data() + static_cast<std::size_t>(e) * nb,
                    yd_.data() + static_cast<std::size_t>(1 + e) * nb, sizeof(float) * n);
    float sh[nn::kShWidth];
    for (int s = 0; s < n; ++s) {
        nn::sh_encode(dir[s], sh);
        float* col = xc_.data() + s;
        for (int i = 0; i < nn::kShWidth; ++i)
            col[static_cast<std::size_t>(emb_w + i) * nb] = sh[i];
    }
    yc_.resize(static_cast<std::size_t>(3) * nb);
    model_->color_mlp().forward_batch(xc_.data(), yc_.data(), nb, &ccache_);

    // color head backward
    dyc_.assign(static_cast<std::size_t>(3) * nb, 0.f);
    for (int s = 0; s < n; ++s) {
        dyc_[s] = drgb[s].r;
        dyc_[static_cast<std::size_t>(nb) + s] = drgb[s].g;
        dyc_[static_cast<std::size_t>(2) * nb + s] = drgb[s].b;
    }
    dxc_.assign(static_cast<std::size_t>(cin) * nb, 0.f);
    mut_->color_mlp().backward_batch(ccache_, xc_.data(), dyc_.data(), dxc_.data(), nb);

    // density head backward: raw density row + embedding rows from the color head
    dyd_.assign(static_cast<std::size_t>(dout) * nb, 0.f);
    for (int s = 0; s < n; ++s) {
        const float raw = raw_[s];
        float g = 0.f;
        if (std::fabs(raw) < cfg.density_exp_clamp)
            g = dsigma[s] * model_->activate_density(raw);
        dyd_[s] = g;
    }
    for (int e = 0; e < emb_w; ++e)
        std::memcpy(dyd_.data() + static_cast<std::size_t>(1 + e) * nb,
                    dxc_.data() + static_cast<std::size_t>(e) * nb, sizeof(float) * n);
    dxd_.assign(static_cast<std::size_t>(din) * nb, 0.f);
    mut_->density_mlp().backward_batch(dcache_, xd_.data(), dyd_.data(), dxd_.data(), nb);

    // grid scatter through the straight-through mask
    const int pe_w = nn::positional_encode_width(cfg.pe_freqs);
    const int fw = model_->grid().feature_width();
    std::vector<float> up(fw);
    for (int s = 0; s < n; ++s) {
        const float* col = dxd_.data() + s;
        for (int i = 0; i < fw; ++i) up[i] = col[static_cast<std::size_t>(pe_w + i) * nb];
        mut_->grid().encode_backward(pos[s], up.data());
    }
}

void FieldPipeline::forward(std::span<const Vec3> pos, std::span<const Vec3> dir,
                            std::span<float> sigma, std::span<Rgb> rgb) {
    for (std::size_t off = 0; off < pos.size(); off += kBlock) {
        const std::size_t n = std::min<std::size_t>(kBlock, pos.size() - off);
        forward_block(pos.subspan(off, n), dir.subspan(off, n),
                      sigma.subspan(off, n), rgb.subspan(off, n));
    }
}

void FieldPipeline::density(std::span<const Vec3> pos, std::span<float> sigma) {
    for (std::size_t off = 0; off < pos.size(); off += kBlock) {
        const std::size_t n = std::min<std::size_t>(kBlock, pos.size() - off);
        density_block(pos.subspan(off, n), sigma.subspan(off, n));
    }
}

void FieldPipeline::backward(std::span<const Vec3> pos, std::span<const Vec3> dir,
                             std::span<const float> dsigma, std::span<const Rgb> drgb) {
    for (std::size_t off = 0; off < pos.size(); off += kBlock) {
        const std::size_t n = std::min<std::size_t>(kBlock, pos.size() - off);
        backward_block(pos.subspan(off, n), dir.subspan(off, n),
                       dsigma.subspan(off, n), drgb.subspan(off, n));
    }
}

}  // namespace birf::field
