#include "birf/render/render.hpp"

#include <cmath>
#include <thread>

namespace birf::render {

float Camera::focal_from_angle_x(int width, float camera_angle_x) {
    return 0.5f * width / std::tan(0.5f * camera_angle_x);
}

Camera Camera::make(int width, int height, float focal, const std::array<float, 16>& pose) {
    if (width <= 0 || height <= 0 || focal <= 0.f)
        throw ConfigError("camera: width/height/focal must be positive");
    // rotation block must be orthonormal within 1e-4
    for (int c0 = 0; c0 < 3; ++c0)
        for (int c1 = c0; c1 < 3; ++c1) {
            float d = 0.f;
            for (int r = 0; r < 3; ++r) d += pose[r * 4 + c0] * pose[r * 4 + c1];
            const float expect = c0 == c1 ? 1.f : 0.f;
            if (std::fabs(d - expect) > 1e-4f)
                throw ConfigError("camera: pose rotation block is not orthonormal");
        }
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.focal = focal;
    cam.pose = pose;
    return cam;
}

Vec3 Camera::rotate(const Vec3& v) const {
    return {pose[0] * v.x + pose[1] * v.y + pose[2] * v.z,
            pose[4] * v.x + pose[5] * v.y + pose[6] * v.z,
            pose[8] * v.x + pose[9] * v.y + pose[10] * v.z};
}

Ray generate_ray(const Camera& cam, int i, int j, float jitter_x, float jitter_y) {
    if (i < 0 || i >= cam.width || j < 0 || j >= cam.height)
        throw UsageError("generate_ray: pixel out of bounds");
    const Vec3 d_cam = {(i + 0.5f + jitter_x - cam.width * 0.5f) / cam.focal,
                        -(j + 0.5f + jitter_y - cam.height * 0.5f) / cam.focal,
                        -1.f};
    return {cam.position(), normalized(cam.rotate(d_cam))};
}

CompositeResult composite(std::span<const float> sigma, std::span<const Rgb> color,
                          std::span<const float> delta, const Rgb& background, float term_eps) {
    const std::size_t n = sigma.size();
    CompositeResult res;
    res.weights.assign(n, 0.0);

    double T = 1.0;
    double acc[3] = {0.0, 0.0, 0.0};
    double sum_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (delta[i] <= 0.f) throw ConfigError("composite: non-positive delta");
        if (term_eps > 0.f && T < term_eps) break;
        const double alpha = -std::expm1(-static_cast<double>(sigma[i]) * delta[i]);
        const double w = T * alpha;
        res.weights[i] = w;
        acc[0] += w * color[i].r;
        acc[1] += w * color[i].g;
        acc[2] += w * color[i].b;
        sum_w += w;
        T -= w;  // telescoped T *= (1 - alpha); keeps sum(w) + T == 1 tight
        res.n_active = i + 1;
    }
    res.t_final = T;
    res.opacity = sum_w;
    res.color = {static_cast<float>(acc[0] + T * background.r),
                 static_cast<float>(acc[1] + T * background.g),
                 static_cast<float>(acc[2] + T * background.b)};
    return res;
}

void composite_backward(std::span<const float> sigma, std::span<const Rgb> color,
                        std::span<const float> delta, const Rgb& background,
                        const CompositeResult& result, const Rgb& dcolor_out,
                        std::span<float> dsigma, std::span<Rgb> dcolor) {
    const std::size_t n = sigma.size();
    // dC/dc_i = w_i ; dC/dsigma_i = delta_i * (T_{i+1} c_i - S_i) with
    // S_i = sum_{j>i} w_j c_j + T_final * bg (suffix including background).
    // Samples past n_active never entered the forward and get zero gradients.
    double Sx = result.t_final * static_cast<double>(background.r);
    double Sy = result.t_final * static_cast<double>(background.g);
    double Sz = result.t_final * static_cast<double>(background.b);
    double T_next = result.t_final;

    for (std::size_t k = n; k-- > 0;) {
        if (k >= result.n_active) {
            dsigma[k] = 0.f;
            dcolor[k] = {0.f, 0.f, 0.f};
            continue;
        }
        const double w = result.weights[k];
        dcolor[k] = {static_cast<float>(w * dcolor_out.r), static_cast<float>(w * dcolor_out.g),
                     static_cast<float>(w * dcolor_out.b)};
        const double gx = T_next * color[k].r - Sx;
        const double gy = T_next * color[k].g - Sy;
        const double gz = T_next * color[k].b - Sz;
        dsigma[k] = static_cast<float>(delta[k] *
                                       (gx * dcolor_out.r + gy * dcolor_out.g + gz * dcolor_out.b));
        Sx += w * color[k].r;
        Sy += w * color[k].g;
        Sz += w * color[k].b;
        T_next += w;
    }
}

Image Image::filled(int w, int h, const Rgb& c) {
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) img.set_pixel(i, j, c);
    return img;
}

namespace {

void render_rows(const Camera& cam, const SceneTransform& transform, const field::FieldFn& field_fn,
                 const sampler::OccupancyGrid& occ, const RenderOptions& opts, int j_begin, int j_end,
                 Image& img) {
    std::vector<sampler::RaySample> samples;
    std::vector<Vec3> pos, dirs;
    std::vector<float> sigma, delta;
    std::vector<Rgb> rgb;
    for (int j = j_begin; j < j_end; ++j) {
        for (int i = 0; i < cam.width; ++i) {
            Ray ray = transform.to_unit(generate_ray(cam, i, j));
            samples.clear();
            sampler::march_ray(occ, ray.origin, ray.dir, opts.step, 0.f, 1e9f, 0.f, samples);
            const std::size_t n = samples.size();
            if (n == 0) {
                img.set_pixel(i, j, opts.background);
                continue;
            }
            pos.resize(n);
            dirs.assign(n, ray.dir);
            sigma.resize(n);
            rgb.resize(n);
            delta.resize(n);
            for (std::size_t s = 0; s < n; ++s) {
                pos[s] = ray.origin + ray.dir * samples[s].t_mid();
                delta[s] = samples[s].delta();
            }
            field_fn(pos, dirs, sigma, rgb);
            img.set_pixel(i, j, composite(sigma, rgb, delta, opts.background, opts.term_eps).color);
        }
    }
}

}  // namespace

Image render_image(const Camera& cam, const SceneTransform& transform,
                   const field::FieldFn& field_fn, const sampler::OccupancyGrid& occ,
                   const RenderOptions& opts) {
    Image img = Image::filled(cam.width, cam.height, opts.background);
    render_rows(cam, transform, field_fn, occ, opts, 0, cam.height, img);
    return img;
}

Image render_image(const Camera& cam, const SceneTransform& transform,
                   const FieldFnFactory& make_field, const sampler::OccupancyGrid& occ,
                   const RenderOptions& opts) {
    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        return render_image(cam, transform, make_field(), occ, opts);
    }
    Image img = Image::filled(cam.width, cam.height, opts.background);
    // Rays are independent; rows split across threads, one field instance each.
    std::vector<std::thread> pool;
    const int rows = (cam.height + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int j0 = t * rows, j1 = std::min(cam.height, j0 + rows);
        if (j0 >= j1) break;
        pool.emplace_back([&, j0, j1] {
            const field::FieldFn fn = make_field();
            render_rows(cam, transform, fn, occ, opts, j0, j1, img);
        });
    }
    for (auto& th : pool) th.join();
    return img;
}

}  // namespace birf::render
