#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "birf/common.hpp"
#include "birf/render/render.hpp"

namespace birf::data {

// 8-bit PNG in/out. Decoding maps to linear [0,1] by /255 (no gamma
// transform); RGBA alpha is returned separately.
struct ImageRgba {
    int width = 0;
    int height = 0;
    std::vector<float> rgba;  // 4 floats per pixel
};

ImageRgba read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const render::Image& img);
void write_png_rgba(const std::filesystem::path& path, const ImageRgba& img);

struct Dataset {
    std::vector<render::Camera> cameras;
    std::vector<render::Image> images;  // background already composited in
    render::SceneTransform transform;
    Rgb background{1.f, 1.f, 1.f};

    std::size_t size() const { return cameras.size(); }
};

// Blender-style dataset: transforms_<split>.json (camera_angle_x,
// frames[].file_path, frames[].transform_matrix) plus PNG images. RGBA is
// alpha-composited onto the background.
Dataset load_blender(const std::filesystem::path& dir, const std::string& split,
                     const Rgb& background = {1.f, 1.f, 1.f}, float aabb_half = 1.5f);

// NSVF-style layout: intrinsics.txt, pose/<p>_*.txt (row-major 4x4
// camera-to-world, +z forward), rgb/<p>_*.png, with the filename prefix
// selecting the split (0_ train, 1_ val, 2_ test). Poses are converted to
// the -z-forward convention on load.
Dataset load_nsvf(const std::filesystem::path& dir, const std::string& split,
                  const Rgb& background = {1.f, 1.f, 1.f}, float aabb_half = 1.5f);

struct Sphere {
    Vec3 center;
    float radius = 0.1f;
    float density = 50.f;
    Rgb albedo{1.f, 0.f, 0.f};
};

// Analytic ground-truth scene living in the unit cube.
struct OracleScene {
    std::vector<Sphere> spheres;
    Rgb background{1.f, 1.f, 1.f};

    static OracleScene builtin_spheres();
    static OracleScene from_json_file(const std::filesystem::path& path);

    float density_at(const Vec3& p) const;
    Rgb albedo_at(const Vec3& p) const;
    field::FieldFn field_fn() const;
    field::DensityFn density_fn() const;
};

// Cameras on a (seeded) Fibonacci sphere looking at the cube center; images
// rendered by fixed-step quadrature of the analytic field. view_begin/end
// select a slice of the rig (the full rig stays deterministic per seed);
// view_end < 0 means all views.
Dataset generate_oracle(const OracleScene& scene, int n_views, int resolution, uint64_t seed,
                        float fine_step, int view_begin = 0, int view_end = -1);

}  // namespace birf::data
