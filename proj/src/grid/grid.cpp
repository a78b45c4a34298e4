#include "birf/grid/grid.hpp"

#include <cmath>
#include <cstring>

namespace birf::grid {

namespace {

constexpr uint64_t kHashPrimes[3] = {1ull, 2654435761ull, 805459861ull};

inline bool is_pow2(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

uint64_t GridLevelConfig::dense_vertex_count() const {
    uint64_t n = 1;
    for (int i = 0; i < dim; ++i) n *= static_cast<uint64_t>(resolution) + 1;
    return n;
}

uint64_t GridLevelConfig::entries() const {
    const uint64_t dense = dense_vertex_count();
    return dense <= table_size ? dense : table_size;
}

std::vector<int> resolution_schedule(int levels, int n_min, int n_max) {
    if (levels < 1 || n_min < 1 || n_max < n_min)
        throw ConfigError("invalid resolution schedule");
    if (levels == 1) return {n_max};
    const double b = std::exp((std::log(double(n_max)) - std::log(double(n_min))) / (levels - 1));
    std::vector<int> out(levels);
    for (int l = 0; l < levels; ++l) {
        // tiny epsilon keeps the endpoints exact under floating-point rounding
        out[l] = static_cast<int>(std::floor(double(n_min) * std::pow(b, l) + 1e-6));
    }
    return out;
}

GridConfig GridConfig::make(int levels_3d, int n3_min, int n3_max, uint64_t t3,
                            int levels_2d, int n2_min, int n2_max, uint64_t t2,
                            int feature_dim) {
    if (feature_dim != 1 && feature_dim != 2 && feature_dim != 4 && feature_dim != 8)
        throw ConfigError("feature_dim must be one of 1, 2, 4, 8 (got " +
                          std::to_string(feature_dim) + ")");
    if (!is_pow2(t3) || !is_pow2(t2))
        throw ConfigError("hash table sizes must be powers of two");
    GridConfig cfg;
    cfg.feature_dim = feature_dim;
    for (int n : resolution_schedule(levels_3d, n3_min, n3_max))
        cfg.levels_3d.push_back({3, n, t3, feature_dim});
    for (int n : resolution_schedule(levels_2d, n2_min, n2_max))
        cfg.levels_2d.push_back({2, n, t2, feature_dim});
    return cfg;
}

GridConfig GridConfig::base(int feature_dim) {
    return make(16, 16, 1024, uint64_t(1) << 19, 4, 64, 512, uint64_t(1) << 17, feature_dim);
}

uint64_t grid_index(const GridLevelConfig& level, std::span<const int> corner) {
    if (static_cast<int>(corner.size()) != level.dim)
        throw ConfigError("grid_index: corner dimensionality mismatch");
    for (int i = 0; i < level.dim; ++i)
        if (corner[i] < 0 || corner[i] > level.resolution)
            throw Error("grid_index: corner out of range");
    if (!level.hashed()) {
        const uint64_t vpa = static_cast<uint64_t>(level.resolution) + 1;
        uint64_t idx = 0, stride = 1;
        for (int i = 0; i < level.dim; ++i) {
            idx += static_cast<uint64_t>(corner[i]) * stride;
            stride *= vpa;
        }
        return idx;
    }
    uint64_t h = 0;
    for (int i = 0; i < level.dim; ++i) h ^= static_cast<uint64_t>(corner[i]) * kHashPrimes[i];
    return h & (level.table_size - 1);
}

uint64_t payload_bits(const GridConfig& config) {
    uint64_t bits = 0;
    for (const auto& l : config.levels_3d) bits += l.entries() * l.feature_dim;
    for (const auto& l : config.levels_2d) bits += 3 * l.entries() * l.feature_dim;
    return bits;
}

HybridGrid::HybridGrid(GridConfig config) : config_(std::move(config)) {
    for (std::size_t l = 0; l < config_.levels_3d.size(); ++l) {
        const auto& lv = config_.levels_3d[l];
        grid_3d_.push_back(binarize::BinaryTensor::create(
            "grid3d_L" + std::to_string(l),
            {static_cast<int>(lv.entries()), lv.feature_dim}));
    }
    static const char* plane_names[3] = {"xy", "xz", "yz"};
    for (int p = 0; p < 3; ++p)
        for (std::size_t m = 0; m < config_.levels_2d.size(); ++m) {
            const auto& lv = config_.levels_2d[m];
            planes_[p].push_back(binarize::BinaryTensor::create(
                std::string("plane_") + plane_names[p] + "_L" + std::to_string(m),
                {static_cast<int>(lv.entries()), lv.feature_dim}));
        }
}

void HybridGrid::init(std::mt19937_64& rng) {
    for (auto* t : all_tensors()) t->init(rng);
}

std::vector<binarize::BinaryTensor*> HybridGrid::all_tensors() {
    std::vector<binarize::BinaryTensor*> out;
    for (auto& t : grid_3d_) out.push_back(&t);
    for (auto& pl : planes_)
        for (auto& t : pl) out.push_back(&t);
    return out;
}

std::vector<const binarize::BinaryTensor*> HybridGrid::all_tensors() const {
    std::vector<const binarize::BinaryTensor*> out;
    for (const auto& t : grid_3d_) out.push_back(&t);
    for (const auto& pl : planes_)
        for (const auto& t : pl) out.push_back(&t);
    return out;
}

namespace {

inline float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

// Cell location at a given resolution: base vertex and fractional offsets.
// x == 1 lands on the last cell with frac 1 so interpolation stays exact at
// the domain boundary.
inline void locate(float x, int res, int& base, float& frac) {
    const float pos = clamp01(x) * res;
    base = static_cast<int>(pos);
    if (base >= res) base = res - 1;
    if (base < 0) base = 0;
    frac = pos - base;
}

struct Corner3 {
    uint64_t idx;
    float w;
};

inline int gather_corners_3d(const GridLevelConfig& lv, const Vec3& x, Corner3 out[8]) {
    int bx, by, bz;
    float fx, fy, fz;
    locate(x.x, lv.resolution, bx, fx);
    locate(x.y, lv.resolution, by, fy);
    locate(x.z, lv.resolution, bz, fz);
    const float wx[2] = {1.f - fx, fx};
    const float wy[2] = {1.f - fy, fy};
    const float wz[2] = {1.f - fz, fz};
    int n = 0;
    for (int cz = 0; cz < 2; ++cz)
        for (int cy = 0; cy < 2; ++cy)
            for (int cx = 0; cx < 2; ++cx) {
                const int corner[3] = {bx + cx, by + cy, bz + cz};
                out[n].idx = grid_index(lv, corner);
                out[n].w = wx[cx] * wy[cy] * wz[cz];
                ++n;
            }
    return n;
}

inline int gather_corners_2d(const GridLevelConfig& lv, float u, float v, Corner3 out[4]) {
    int bu, bv;
    float fu, fv;
    locate(u, lv.resolution, bu, fu);
    locate(v, lv.resolution, bv, fv);
    const float wu[2] = {1.f - fu, fu};
    const float wv[2] = {1.f - fv, fv};
    int n = 0;
    for (int cv = 0; cv < 2; ++cv)
        for (int cu = 0; cu < 2; ++cu) {
            const int corner[2] = {bu + cu, bv + cv};
            out[n].idx = grid_index(lv, corner);
            out[n].w = wu[cu] * wv[cv];
            ++n;
        }
    return n;
}

inline void plane_coords(int p, const Vec3& x, float& u, float& v) {
    switch (p) {
        case 0: u = x.x; v = x.y; break;  // xy
        case 1: u = x.x; v = x.z; break;  // xz
        default: u = x.y; v = x.z; break;  // yz
    }
}

}  // namespace

void HybridGrid::encode_3d(const Vec3& x, float* out) const {
    const int F = config_.feature_dim;
    Corner3 corners[8];
    for (std::size_t l = 0; l < config_.levels_3d.size(); ++l) {
        const int nc = gather_corners_3d(config_.levels_3d[l], x, corners);
        const float* lat = grid_3d_[l].latent.data();
        float* o = out + l * F;
        for (int f = 0; f < F; ++f) o[f] = 0.f;
        for (int c = 0; c < nc; ++c) {
            const float w = corners[c].w;
            const float* entry = lat + corners[c].idx * F;
            for (int f = 0; f < F; ++f) o[f] += w * binarize::sign_of(entry[f]);
        }
    }
}

void HybridGrid::encode_plane(int p, const Vec3& x, float* out) const {
    const int F = config_.feature_dim;
    float u, v;
    plane_coords(p, x, u, v);
    Corner3 corners[4];
    for (std::size_t m = 0; m < config_.levels_2d.size(); ++m) {
        const int nc = gather_corners_2d(config_.levels_2d[m], u, v, corners);
        const float* lat = planes_[p][m].latent.data();
        float* o = out + m * F;
        for (int f = 0; f < F; ++f) o[f] = 0.f;
        for (int c = 0; c < nc; ++c) {
            const float w = corners[c].w;
            const float* entry = lat + corners[c].idx * F;
            for (int f = 0; f < F; ++f) o[f] += w * binarize::sign_of(entry[f]);
        }
    }
}

void HybridGrid::encode(const Vec3& x, float* out) const {
    const int F = config_.feature_dim;
    encode_3d(x, out);
    float* o = out + config_.levels_3d.size() * F;
    for (int p = 0; p < 3; ++p) {
        encode_plane(p, x, o);
        o += config_.levels_2d.size() * F;
    }
}

void HybridGrid::encode_backward(const Vec3& x, const float* upstream) {
    const int F = config_.feature_dim;
    Corner3 corners[8];
    for (std::size_t l = 0; l < config_.levels_3d.size(); ++l) {
        const int nc = gather_corners_3d(config_.levels_3d[l], x, corners);
        auto& tensor = grid_3d_[l];
        const float* up = upstream + l * F;
        for (int c = 0; c < nc; ++c) {
            const float w = corners[c].w;
            const std::size_t off = corners[c].idx * F;
            for (int f = 0; f < F; ++f)
                if (std::fabs(tensor.latent[off + f]) <= 1.f)
                    tensor.grads[off + f] += w * up[f];
        }
    }
    const float* up_plane = upstream + config_.levels_3d.size() * F;
    for (int p = 0; p < 3; ++p) {
        float u, v;
        plane_coords(p, x, u, v);
        for (std::size_t m = 0; m < config_.levels_2d.size(); ++m) {
            const int nc = gather_corners_2d(config_.levels_2d[m], u, v, corners);
            auto& tensor = planes_[p][m];
            const float* up = up_plane + m * F;
            for (int c = 0; c < nc; ++c) {
                const float w = corners[c].w;
                const std::size_t off = corners[c].idx * F;
                for (int f = 0; f < F; ++f)
                    if (std::fabs(tensor.latent[off + f]) <= 1.f)
                        tensor.grads[off + f] += w * up[f];
            }
        }
        up_plane += config_.levels_2d.size() * F;
    }
}

}  // namespace birf::grid
