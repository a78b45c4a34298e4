#include "birf/binarize/binarize.hpp"

#include <cmath>

#include "birf/kernels/kernels.hpp"

namespace birf::binarize {

BinaryTensor BinaryTensor::create(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    BinaryTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.latent.assign(n, 0.f);
    t.grads.assign(n, 0.f);
    return t;
}

void BinaryTensor::init(std::mt19937_64& rng, float scale) {
    std::uniform_real_distribution<float> dist(-scale, scale);
    for (auto& v : latent) v = dist(rng);
}

void sign_forward(std::span<const float> latent, std::span<float> out) {
    for (std::size_t i = 0; i < latent.size(); ++i) {
        if (std::isnan(latent[i]))
            throw Error("sign_forward: NaN at index " + std::to_string(i));
        out[i] = sign_of(latent[i]);
    }
}

std::vector<float> sign_forward(std::span<const float> latent) {
    std::vector<float> out(latent.size());
    sign_forward(latent, out);
    return out;
}

std::vector<float> ste_backward(std::span<const float> upstream, std::span<const float> latent) {
    if (upstream.size() != latent.size())
        throw ConfigError("ste_backward: shape mismatch");
    std::vector<float> out(upstream.begin(), upstream.end());
    kernels::active().ste_mask(latent.data(), out.data(), out.size());
    return out;
}

PackedBits pack_bits(std::span<const float> signs) {
    for (std::size_t i = 0; i < signs.size(); ++i)
        if (signs[i] != 1.f && signs[i] != -1.f)
            throw Error("pack_bits: entry " + std::to_string(i) + " is not +-1");
    return pack_latent_signs(signs);
}

PackedBits pack_latent_signs(std::span<const float> latent) {
    PackedBits p;
    p.bit_count = latent.size();
    p.bytes.assign((latent.size() + 7) / 8, 0);
    if (!latent.empty())
        kernels::active().pack_signs(latent.data(), p.bytes.data(), latent.size());
    return p;
}

std::vector<float> unpack_bits(const PackedBits& p) {
    if (p.bytes.size() != (p.bit_count + 7) / 8)
        throw FormatError("unpack_bits: byte length " + std::to_string(p.bytes.size()) +
                          " inconsistent with bit count " + std::to_string(p.bit_count));
    std::vector<float> out(p.bit_count);
    for (uint64_t i = 0; i < p.bit_count; ++i)
        out[i] = (p.bytes[i / 8] >> (i % 8)) & 1u ? 1.f : -1.f;
    return out;
}

}  // namespace birf::binarize
