#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "birf/common.hpp"
#include "birf/field/field.hpp"

namespace birf::sampler {

struct OccupancyConfig {
    int resolution = 128;
    int update_period = 16;
    float decay = 0.95f;
    float threshold = 0.01f;
    int warmup_iters = 256;        // all cells treated as occupied early on
    float candidate_fraction = 0.25f;  // fraction of cells refreshed per update
};

struct RaySample {
    float t_start = 0.f;
    float t_end = 0.f;

    float delta() const { return t_end - t_start; }
    float t_mid() const { return 0.5f * (t_start + t_end); }
};

// Coarse binary occupancy over the unit cube: EMA of cell alphas plus a
// thresholded bitfield consulted during marching.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    explicit OccupancyGrid(OccupancyConfig cfg);

    const OccupancyConfig& config() const { return cfg_; }
    std::size_t cell_count() const { return occ_.size(); }

    bool occupied(const Vec3& p) const;
    bool occupied_cell(int cx, int cy, int cz) const;
    float occ_value(int cx, int cy, int cz) const;

    // Decays every cell, refreshes a candidate subset from jittered density
    // samples (alpha = 1 - exp(-sigma * cell diagonal)), rebuilds the bitfield.
    // During warmup every cell is a candidate and the bitfield stays full.
    void update(const field::DensityFn& density, int iter, std::mt19937_64& rng);

    // Deterministic reconstruction from a model: full sweeps with a fixed
    // jitter stream. Used after loading a snapshot and for final evaluation.
    void rebuild(const field::DensityFn& density, int passes = 2);

    void set_all_occupied();
    void clear_cell(int cx, int cy, int cz);  // test hook
    float occupied_fraction() const;

private:
    void refresh_cells(const field::DensityFn& density, std::span<const uint32_t> cells,
                       std::mt19937_64& rng);
    void rebuild_bitfield(bool force_all);

    OccupancyConfig cfg_;
    std::vector<float> occ_;
    std::vector<uint8_t> bits_;
    bool warmup_active_ = true;
};

// Fixed-step traversal of [0,1]^3 between t_near/t_far; emits intervals whose
// midpoints land in occupied cells. t_jitter in [0,1) shifts the sample comb
// by that fraction of a step.
void march_ray(const OccupancyGrid& occ, const Vec3& origin, const Vec3& dir, float step,
               float t_near, float t_far, float t_jitter, std::vector<RaySample>& out);

std::vector<RaySample> march_ray(const OccupancyGrid& occ, const Vec3& origin, const Vec3& dir,
                                 float step, float t_near = 0.f, float t_far = 1e9f);

inline float default_march_step() { return std::sqrt(3.f) / 1024.f; }

}  // namespace birf::sampler
