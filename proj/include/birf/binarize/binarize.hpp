#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "birf/common.hpp"

namespace birf::binarize {

// Real-valued latent parameters whose forward view is sign(latent) in {-1,+1}.
// Latents are never clamped; the straight-through mask in the backward pass
// zeroes gradients where |latent| > 1.
struct BinaryTensor {
    std::string name;
    std::vector<float> latent;
    std::vector<float> grads;
    std::vector<int> shape;

    std::size_t size() const { return latent.size(); }

    static BinaryTensor create(std::string name, std::vector<int> shape);
    // Small symmetric init keeps initial signs diverse and every latent
    // inside the straight-through pass-band.
    void init(std::mt19937_64& rng, float scale = 1e-4f);
};

inline float sign_of(float v) { return v >= 0.f ? 1.f : -1.f; }

// sign(latent) elementwise; +1 at 0. Throws on NaN entries.
std::vector<float> sign_forward(std::span<const float> latent);
void sign_forward(std::span<const float> latent, std::span<float> out);

// Straight-through estimator: upstream * 1[|latent| <= 1], boundary inclusive.
std::vector<float> ste_backward(std::span<const float> upstream, std::span<const float> latent);

// Bit-packed {-1,+1} array: +1 -> 1, -1 -> 0, LSB-first within each byte,
// trailing pad bits zero.
struct PackedBits {
    uint64_t bit_count = 0;
    std::vector<uint8_t> bytes;
};

PackedBits pack_bits(std::span<const float> signs);  // entries must be exactly +-1
// Packs sign(latent) directly (save path); no +-1 precondition.
PackedBits pack_latent_signs(std::span<const float> latent);
std::vector<float> unpack_bits(const PackedBits& p);

}  // namespace birf::binarize
