#include "birf/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace birf::sampler {

OccupancyGrid::OccupancyGrid(OccupancyConfig cfg) : cfg_(cfg) {
    const std::size_t n = static_cast<std::size_t>(cfg_.resolution) * cfg_.resolution * cfg_.resolution;
    occ_.assign(n, 0.f);
    bits_.assign((n + 7) / 8, 0xff);  // everything occupied until told otherwise
}

bool OccupancyGrid::occupied_cell(int cx, int cy, int cz) const {
    const int r = cfg_.resolution;
    const std::size_t idx = (static_cast<std::size_t>(cz) * r + cy) * r + cx;
    return (bits_[idx / 8] >> (idx % 8)) & 1u;
}

float OccupancyGrid::occ_value(int cx, int cy, int cz) const {
    const int r = cfg_.resolution;
    return occ_[(static_cast<std::size_t>(cz) * r + cy) * r + cx];
}

bool OccupancyGrid::occupied(const Vec3& p) const {
    const int r = cfg_.resolution;
    const int cx = std::clamp(static_cast<int>(p.x * r), 0, r - 1);
    const int cy = std::clamp(static_cast<int>(p.y * r), 0, r - 1);
    const int cz = std::clamp(static_cast<int>(p.z * r), 0, r - 1);
    return occupied_cell(cx, cy, cz);
}

void OccupancyGrid::refresh_cells(const field::DensityFn& density, std::span<const uint32_t> cells,
                                  std::mt19937_64& rng) {
    const int r = cfg_.resolution;
    const float cell = 1.f / r;
    const float diag = std::sqrt(3.f) * cell;
    std::uniform_real_distribution<float> u(0.f, 1.f);

    constexpr std::size_t kChunk = 4096;
    std::vector<Vec3> pts;
    std::vector<float> sigma;
    for (std::size_t off = 0; off < cells.size(); off += kChunk) {
        const std::size_t n = std::min(kChunk, cells.size() - off);
        pts.resize(n);
        sigma.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const uint32_t idx = cells[off + i];
            const int cx = idx % r, cy = (idx / r) % r, cz = idx / (r * r);
            pts[i] = {(cx + u(rng)) * cell, (cy + u(rng)) * cell, (cz + u(rng)) * cell};
        }
        density(pts, sigma);
        for (std::size_t i = 0; i < n; ++i) {
            const float alpha = 1.f - std::exp(-sigma[i] * diag);
            float& o = occ_[cells[off + i]];
            o = std::max(o, alpha);
        }
    }
}

void OccupancyGrid::rebuild_bitfield(bool force_all) {
    std::fill(bits_.begin(), bits_.end(), 0);
    if (force_all) {
        std::fill(bits_.begin(), bits_.end(), 0xff);
        return;
    }
    for (std::size_t i = 0; i < occ_.size(); ++i)
        if (occ_[i] > cfg_.threshold) bits_[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
}

void OccupancyGrid::update(const field::DensityFn& density, int iter, std::mt19937_64& rng) {
    const std::size_t total = occ_.size();
    for (auto& o : occ_) o *= cfg_.decay;

    const bool warmup = iter < cfg_.warmup_iters;
    std::vector<uint32_t> cells;
    const bool full_sweep = cfg_.candidate_fraction >= 1.f || (!warmup && warmup_active_);
    if (full_sweep) {
        // every cell; also runs once on the first update past warmup
        cells.resize(total);
        for (std::size_t i = 0; i < total; ++i) cells[i] = static_cast<uint32_t>(i);
        if (!warmup) warmup_active_ = false;
    } else {
        const std::size_t n = static_cast<std::size_t>(std::ceil(cfg_.candidate_fraction * total));
        cells.resize(std::min(n, total));
        for (auto& c : cells) c = static_cast<uint32_t>(rng() % total);
    }
    refresh_cells(density, cells, rng);
    rebuild_bitfield(warmup);
}

void OccupancyGrid::rebuild(const field::DensityFn& density, int passes) {
    std::fill(occ_.begin(), occ_.end(), 0.f);
    std::mt19937_64 rng(0x0b1cfULL);
    std::vector<uint32_t> cells(occ_.size());
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<uint32_t>(i);
    for (int p = 0; p < passes; ++p) {
        for (auto& o : occ_) o *= cfg_.decay;
        refresh_cells(density, cells, rng);
    }
    warmup_active_ = false;
    rebuild_bitfield(false);
}

void OccupancyGrid::set_all_occupied() {
    std::fill(bits_.begin(), bits_.end(), 0xff);
    warmup_active_ = true;
}

void OccupancyGrid::clear_cell(int cx, int cy, int cz) {
    const int r = cfg_.resolution;
    const std::size_t idx = (static_cast<std::size_t>(cz) * r + cy) * r + cx;
    bits_[idx / 8] &= static_cast<uint8_t>(~(1u << (idx % 8)));
}

float OccupancyGrid::occupied_fraction() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < occ_.size(); ++i)
        if ((bits_[i / 8] >> (i % 8)) & 1u) ++n;
    return static_cast<float>(n) / static_cast<float>(occ_.size());
}

namespace {

// Slab intersection with the unit cube; false on a miss.
bool intersect_unit_cube(const Vec3& o, const Vec3& d, float& t0, float& t1) {
    t0 = 0.f;
    t1 = std::numeric_limits<float>::max();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.f) {
            if (o[a] < 0.f || o[a] > 1.f) return false;
            continue;
        }
        const float inv = 1.f / d[a];
        float ta = (0.f - o[a]) * inv;
        float tb = (1.f - o[a]) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

void march_ray(const OccupancyGrid& occ, const Vec3& origin, const Vec3& dir, float step,
               float t_near, float t_far, float t_jitter, std::vector<RaySample>& out) {
    if (norm(dir) == 0.f) throw UsageError("march_ray: zero direction");
    if (step <= 0.f) throw ConfigError("march_ray: step must be positive");

    float t0, t1;
    if (!intersect_unit_cube(origin, dir, t0, t1)) return;
    t0 = std::max(t0, t_near);
    t1 = std::min(t1, t_far);
    if (t0 >= t1) return;

    float t = t0 + t_jitter * step;
    while (t < t1) {
        const float te = std::min(t + step, t1);
        if (te - t > 1e-9f) {
            const float tm = 0.5f * (t + te);
            const Vec3 p = origin + dir * tm;
            if (occ.occupied(p)) out.push_back({t, te});
        }
        t += step;
    }
}

std::vector<RaySample> march_ray(const OccupancyGrid& occ, const Vec3& origin, const Vec3& dir,
                                 float step, float t_near, float t_far) {
    std::vector<RaySample> out;
    march_ray(occ, origin, dir, step, t_near, t_far, 0.f, out);
    return out;
}

}  // namespace birf::sampler
