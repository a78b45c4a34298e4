#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "birf/binarize/binarize.hpp"
#include "birf/common.hpp"

namespace birf::grid {

struct GridLevelConfig {
    int dim = 3;              // 2 or 3
    int resolution = 16;      // cells per axis; vertices per axis = resolution + 1
    uint64_t table_size = 1;  // power of two
    int feature_dim = 1;

    uint64_t dense_vertex_count() const;
    uint64_t entries() const;  // min(dense_vertex_count, table_size)
    bool hashed() const { return dense_vertex_count() > table_size; }
};

struct GridConfig {
    int feature_dim = 2;
    std::vector<GridLevelConfig> levels_3d;
    std::vector<GridLevelConfig> levels_2d;  // shared by the three planes

    int feature_width() const {
        return static_cast<int>(levels_3d.size() + 3 * levels_2d.size()) * feature_dim;
    }

    static GridConfig make(int levels_3d, int n3_min, int n3_max, uint64_t t3,
                           int levels_2d, int n2_min, int n2_max, uint64_t t2,
                           int feature_dim);
    // 16 3D levels 16..1024 (table 2^19), 4 2D levels 64..512 (table 2^17).
    static GridConfig base(int feature_dim);
};

// Geometric resolution schedule n_min..n_max over `levels` levels.
std::vector<int> resolution_schedule(int levels, int n_min, int n_max);

// Vertex index within a level: dense row-major when the level fits its table,
// otherwise a spatial XOR hash with primes (1, 2654435761, 805459861) in
// 64-bit arithmetic, reduced mod table_size.
uint64_t grid_index(const GridLevelConfig& level, std::span<const int> corner);

// Total packed payload in bits for a config (structure only).
uint64_t payload_bits(const GridConfig& config);

// One 3D multi-level grid plus three 2D plane grids (xy, xz, yz) over
// binarized latents.
class HybridGrid {
public:
    HybridGrid() = default;
    explicit HybridGrid(GridConfig config);

    void init(std::mt19937_64& rng);

    const GridConfig& config() const { return config_; }
    int feature_width() const { return config_.feature_width(); }

    binarize::BinaryTensor& level_3d(int l) { return grid_3d_[l]; }
    const binarize::BinaryTensor& level_3d(int l) const { return grid_3d_[l]; }
    binarize::BinaryTensor& plane(int p, int m) { return planes_[p][m]; }
    const binarize::BinaryTensor& plane(int p, int m) const { return planes_[p][m]; }

    std::vector<binarize::BinaryTensor*> all_tensors();
    std::vector<const binarize::BinaryTensor*> all_tensors() const;

    // Features at x (clamped into [0,1]^3): tri-/bi-linear interpolation of
    // sign(latent), concatenated [3D levels | xy levels | xz levels | yz levels],
    // feature-dim innermost. Writes feature_width() floats.
    void encode(const Vec3& x, float* out) const;
    // 3D-part only (length levels_3d * F).
    void encode_3d(const Vec3& x, float* out) const;
    // One plane's features (p: 0=xy, 1=xz, 2=yz; length levels_2d * F).
    void encode_plane(int p, const Vec3& x, float* out) const;

    // Scatters upstream feature gradients back onto the latents through the
    // straight-through mask, weighted by the interpolation weights.
    void encode_backward(const Vec3& x, const float* upstream);

private:
    GridConfig config_;
    std::vector<binarize::BinaryTensor> grid_3d_;
    std::array<std::vector<binarize::BinaryTensor>, 3> planes_;
};

}  // namespace birf::grid
