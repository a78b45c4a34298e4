#pragma once

#include <array>
#include <span>
#include <vector>

#include "birf/common.hpp"
#include "birf/field/field.hpp"
#include "birf/sampler/sampler.hpp"

namespace birf::render {

// Pinhole camera, OpenGL/Blender convention: camera looks along -z, x right,
// y up; pose is a row-major 4x4 camera-to-world matrix.
struct Camera {
    int width = 0;
    int height = 0;
    float focal = 0.f;
    std::array<float, 16> pose{};

    static Camera make(int width, int height, float focal, const std::array<float, 16>& pose);
    static float focal_from_angle_x(int width, float camera_angle_x);

    Vec3 position() const { return {pose[3], pose[7], pose[11]}; }
    Vec3 rotate(const Vec3& v) const;
};

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
};

// jitter offsets are relative to the pixel center ((0,0) = center).
Ray generate_ray(const Camera& cam, int i, int j, float jitter_x = 0.f, float jitter_y = 0.f);

// Uniform scale + offset taking world coordinates into the unit cube.
struct SceneTransform {
    float scale = 1.f;
    Vec3 offset{0.f, 0.f, 0.f};

    Vec3 to_unit(const Vec3& p) const { return p * scale + offset; }
    Vec3 to_world(const Vec3& p) const { return (p - offset) / scale; }
    Ray to_unit(const Ray& r) const { return {to_unit(r.origin), r.dir}; }

    static SceneTransform identity() { return {}; }
    static SceneTransform from_aabb_half(float half) { return {1.f / (2.f * half), {0.5f, 0.5f, 0.5f}}; }
};

struct CompositeResult {
    Rgb color;             // background composited in
    double opacity = 0.0;  // sum of weights = 1 - final transmittance
    double t_final = 1.0;
    std::size_t n_active = 0;     // samples consumed before early termination
    std::vector<double> weights;  // T_i * alpha_i per sample (zero beyond n_active)
};

// Front-to-back alpha compositing (per-ray accumulation in double). Samples
// past the early-termination threshold receive zero weight. term_eps = 0
// disables early termination.
CompositeResult composite(std::span<const float> sigma, std::span<const Rgb> color,
                          std::span<const float> delta, const Rgb& background,
                          float term_eps = 1e-4f);

// Analytic gradients of the composite w.r.t. each sample's sigma and color.
void composite_backward(std::span<const float> sigma, std::span<const Rgb> color,
                        std::span<const float> delta, const Rgb& background,
                        const CompositeResult& result, const Rgb& dcolor_out,
                        std::span<float> dsigma, std::span<Rgb> dcolor);

struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;  // row-major, 3 floats per pixel, linear [0,1]

    static Image filled(int w, int h, const Rgb& c);
    Rgb pixel(int i, int j) const {
        const std::size_t o = (static_cast<std::size_t>(j) * width + i) * 3;
        return {rgb[o], rgb[o + 1], rgb[o + 2]};
    }
    void set_pixel(int i, int j, const Rgb& c) {
        const std::size_t o = (static_cast<std::size_t>(j) * width + i) * 3;
        rgb[o] = c.r;
        rgb[o + 1] = c.g;
        rgb[o + 2] = c.b;
    }
};

struct RenderOptions {
    float step = sampler::default_march_step();
    Rgb background{1.f, 1.f, 1.f};
    float term_eps = 1e-4f;
    int threads = 1;
};

// Deterministic full-frame render: per pixel ray -> march -> field -> composite.
Image render_image(const Camera& cam, const SceneTransform& transform,
                   const field::FieldFn& field_fn, const sampler::OccupancyGrid& occ,
                   const RenderOptions& opts);

// Threaded variant; every worker gets its own field function instance, so
// stateful query pipelines stay single-owner.
using FieldFnFactory = std::function<field::FieldFn()>;
Image render_image(const Camera& cam, const SceneTransform& transform,
                   const FieldFnFactory& make_field, const sampler::OccupancyGrid& occ,
                   const RenderOptions& opts);

}  // namespace birf::render
