#include "birf/data/data.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace birf::data {

using nlohmann::json;

Dataset load_blender(const std::filesystem::path& dir, const std::string& split,
                     const Rgb& background, float aabb_half) {
    const auto tf_path = dir / ("transforms_" + split + ".json");
    std::ifstream in(tf_path);
    if (!in) throw IoError("missing transforms file: " + tf_path.string());

    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed JSON in " + tf_path.string() + ": " + e.what());
    }
    if (!doc.contains("camera_angle_x") || !doc.contains("frames"))
        throw FormatError(tf_path.string() + ": expected camera_angle_x and frames");

    const float angle_x = doc["camera_angle_x"].get<float>();
    Dataset ds;
    ds.background = background;
    ds.transform = render::SceneTransform::from_aabb_half(aabb_half);

    for (const auto& frame : doc["frames"]) {
        std::string rel = frame.at("file_path").get<std::string>();
        std::filesystem::path img_path = dir / rel;
        if (!img_path.has_extension()) img_path += ".png";
        if (!std::filesystem::exists(img_path))
            throw IoError("missing image referenced by " + tf_path.string() + ": " + img_path.string());

        const auto& tm = frame.at("transform_matrix");
        if (tm.size() != 4) throw FormatError(tf_path.string() + ": transform_matrix must be 4x4");
        std::array<float, 16> pose{};
        for (int r = 0; r < 4; ++r) {
            if (tm[r].size() != 4) throw FormatError(tf_path.string() + ": transform_matrix must be 4x4");
            for (int c = 0; c < 4; ++c) pose[r * 4 + c] = tm[r][c].get<float>();
        }

        ImageRgba raw = read_png(img_path);
        render::Image img;
        img.width = raw.width;
        img.height = raw.height;
        img.rgb.resize(static_cast<std::size_t>(raw.width) * raw.height * 3);
        for (std::size_t p = 0; p < static_cast<std::size_t>(raw.width) * raw.height; ++p) {
            const float a = raw.rgba[p * 4 + 3];
            for (int c = 0; c < 3; ++c)
                img.rgb[p * 3 + c] = raw.rgba[p * 4 + c] * a + background[c] * (1.f - a);
        }

        if (!ds.images.empty() &&
            (img.width != ds.images.front().width || img.height != ds.images.front().height))
            throw FormatError("inconsistent image dimensions in " + dir.string());

        const float focal = render::Camera::focal_from_angle_x(img.width, angle_x);
        ds.cameras.push_back(render::Camera::make(img.width, img.height, focal, pose));
        ds.images.push_back(std::move(img));
    }
    if (ds.cameras.empty()) throw FormatError(tf_path.string() + ": no frames");
    return ds;
}

namespace {

std::vector<double> read_numbers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    return out;
}

}  // namespace

Dataset load_nsvf(const std::filesystem::path& dir, const std::string& split,
                  const Rgb& background, float aabb_half) {
    const char* prefix = split == "train" ? "0_" : (split == "val" ? "1_" : "2_");
    if (split != "train" && split != "val" && split != "test")
        throw UsageError("nsvf splits are train/val/test (got '" + split + "')");

    const auto intr = read_numbers(dir / "intrinsics.txt");
    if (intr.empty()) throw FormatError("empty intrinsics.txt in " + dir.string());
    const float focal = static_cast<float>(intr[0]);

    std::vector<std::string> stems;
    const auto pose_dir = dir / "pose";
    if (!std::filesystem::is_directory(pose_dir))
        throw IoError("missing pose directory: " + pose_dir.string());
    for (const auto& e : std::filesystem::directory_iterator(pose_dir)) {
        const std::string name = e.path().stem().string();
        if (name.rfind(prefix, 0) == 0) stems.push_back(name);
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw FormatError("no '" + std::string(prefix) + "*' poses in " + pose_dir.string());

    Dataset ds;
    ds.background = background;
    ds.transform = render::SceneTransform::from_aabb_half(aabb_half);
    for (const auto& stem : stems) {
        const auto nums = read_numbers(pose_dir / (stem + ".txt"));
        if (nums.size() != 16)
            throw FormatError("pose " + stem + " is not a 4x4 matrix");
        std::array<float, 16> pose{};
        for (int i = 0; i < 16; ++i) pose[i] = static_cast<float>(nums[i]);
        // +z-forward pose to -z-forward: negate the y and z basis columns
        for (int r = 0; r < 3; ++r) {
            pose[r * 4 + 1] = -pose[r * 4 + 1];
            pose[r * 4 + 2] = -pose[r * 4 + 2];
        }

        ImageRgba raw = read_png(dir / "rgb" / (stem + ".png"));
        render::Image img;
        img.width = raw.width;
        img.height = raw.height;
        img.rgb.resize(static_cast<std::size_t>(raw.width) * raw.height * 3);
        for (std::size_t p = 0; p < static_cast<std::size_t>(raw.width) * raw.height; ++p) {
            const float a = raw.rgba[p * 4 + 3];
            for (int c = 0; c < 3; ++c)
                img.rgb[p * 3 + c] = raw.rgba[p * 4 + c] * a + background[c] * (1.f - a);
        }
        if (!ds.images.empty() &&
            (img.width != ds.images.front().width || img.height != ds.images.front().height))
            throw FormatError("inconsistent image dimensions in " + dir.string());
        ds.cameras.push_back(render::Camera::make(img.width, img.height, focal, pose));
        ds.images.push_back(std::move(img));
    }
    return ds;
}

OracleScene OracleScene::builtin_spheres() {
    OracleScene s;
    s.background = {1.f, 1.f, 1.f};
    s.spheres = {
        {{0.42f, 0.40f, 0.45f}, 0.16f, 80.f, {0.85f, 0.15f, 0.12f}},
        {{0.64f, 0.55f, 0.58f}, 0.11f, 80.f, {0.12f, 0.65f, 0.20f}},
        {{0.50f, 0.66f, 0.38f}, 0.09f, 80.f, {0.15f, 0.25f, 0.85f}},
    };
    return s;
}

OracleScene OracleScene::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing oracle scene file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("malformed oracle scene JSON: " + std::string(e.what()));
    }
    OracleScene s;
    if (doc.contains("background")) {
        const auto& bg = doc["background"];
        s.background = {bg.at(0).get<float>(), bg.at(1).get<float>(), bg.at(2).get<float>()};
    }
    for (const auto& js : doc.at("spheres")) {
        Sphere sp;
        const auto& c = js.at("center");
        sp.center = {c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()};
        sp.radius = js.at("radius").get<float>();
        sp.density = js.at("density").get<float>();
        const auto& a = js.at("albedo");
        sp.albedo = {a.at(0).get<float>(), a.at(1).get<float>(), a.at(2).get<float>()};
        if (sp.radius <= 0.f || sp.density <= 0.f)
            throw ConfigError("oracle sphere radius/density must be positive");
        s.spheres.push_back(sp);
    }
    return s;
}

float OracleScene::density_at(const Vec3& p) const {
    float sigma = 0.f;
    for (const auto& s : spheres) {
        const Vec3 d = p - s.center;
        if (dot(d, d) <= s.radius * s.radius) sigma += s.density;
    }
    return sigma;
}

Rgb OracleScene::albedo_at(const Vec3& p) const {
    for (const auto& s : spheres) {
        const Vec3 d = p - s.center;
        if (dot(d, d) <= s.radius * s.radius) return s.albedo;
    }
    return {0.f, 0.f, 0.f};
}

field::FieldFn OracleScene::field_fn() const {
    return [this](std::span<const Vec3> pos, std::span<const Vec3>, std::span<float> sigma,
                  std::span<Rgb> rgb) {
        for (std::size_t i = 0; i < pos.size(); ++i) {
            sigma[i] = density_at(pos[i]);
            rgb[i] = albedo_at(pos[i]);
        }
    };
}

field::DensityFn OracleScene::density_fn() const {
    return [this](std::span<const Vec3> pos, std::span<float> sigma) {
        for (std::size_t i = 0; i < pos.size(); ++i) sigma[i] = density_at(pos[i]);
    };
}

namespace {

render::Camera look_at_camera(const Vec3& eye, const Vec3& center, int resolution, float focal) {
    const Vec3 up{0.f, 1.f, 0.f};
    const Vec3 z = normalized(eye - center);  // camera looks along -z
    Vec3 x = cross(up, z);
    if (norm(x) < 1e-5f) x = {1.f, 0.f, 0.f};
    x = normalized(x);
    const Vec3 y = cross(z, x);
    const std::array<float, 16> pose = {
        x.x, y.x, z.x, eye.x,
        x.y, y.y, z.y, eye.y,
        x.z, y.z, z.z, eye.z,
        0.f, 0.f, 0.f, 1.f,
    };
    return render::Camera::make(resolution, resolution, focal, pose);
}

}  // namespace

Dataset generate_oracle(const OracleScene& scene, int n_views, int resolution, uint64_t seed,
                        float fine_step, int view_begin, int view_end) {
    if (n_views < 1 || resolution < 1) throw ConfigError("generate_oracle: bad view/resolution count");
    if (view_end < 0) view_end = n_views;
    if (view_begin < 0 || view_begin > view_end || view_end > n_views)
        throw ConfigError("generate_oracle: bad view range");
    Dataset ds;
    ds.background = scene.background;
    ds.transform = render::SceneTransform::identity();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> jr(-0.05f, 0.05f);
    std::uniform_real_distribution<float> ja(0.f, 2.f * static_cast<float>(M_PI));

    const Vec3 center{0.5f, 0.5f, 0.5f};
    const float golden = static_cast<float>(M_PI) * (3.f - std::sqrt(5.f));
    const float phase = ja(rng);
    const float fov_x = 0.9f;  // ~52 deg keeps the unit cube inside every frame

    // conservative analytic occupancy: a cell is cleared only when its box
    // provably misses every sphere, so culled samples are exact zero-density
    // no-ops and the images match a full march bit for bit
    sampler::OccupancyConfig occ_cfg;
    occ_cfg.resolution = 32;
    sampler::OccupancyGrid occ(occ_cfg);
    const float cell = 1.f / occ_cfg.resolution;
    for (int cz = 0; cz < occ_cfg.resolution; ++cz)
        for (int cy = 0; cy < occ_cfg.resolution; ++cy)
            for (int cx = 0; cx < occ_cfg.resolution; ++cx) {
                bool hit = false;
                for (const auto& s : scene.spheres) {
                    const Vec3 lo{cx * cell, cy * cell, cz * cell};
                    Vec3 nearest = s.center;
                    for (int a = 0; a < 3; ++a)
                        nearest[a] = std::clamp(nearest[a], lo[a], lo[a] + cell);
                    const Vec3 d = nearest - s.center;
                    if (dot(d, d) <= s.radius * s.radius) {
                        hit = true;
                        break;
                    }
                }
                if (!hit) occ.clear_cell(cx, cy, cz);
            }

    render::RenderOptions opts;
    opts.step = fine_step;
    opts.background = scene.background;
    opts.term_eps = 1e-6f;

    const field::FieldFn field = scene.field_fn();
    for (int v = 0; v < n_views; ++v) {
        // Fibonacci sphere direction, slightly jittered radius, poles avoided.
        // The whole rig is always walked so a view slice sees the same cameras.
        const float t = (v + 0.5f) / n_views;
        const float cos_el = 1.f - 2.f * t;
        const float el = std::acos(std::clamp(cos_el, -0.999f, 0.999f));
        const float az = golden * v + phase;
        const float radius = 1.55f + jr(rng);
        if (v < view_begin || v >= view_end) continue;
        const Vec3 dir{std::sin(el) * std::cos(az), std::cos(el), std::sin(el) * std::sin(az)};
        const Vec3 eye = center + dir * radius;
        const float focal = render::Camera::focal_from_angle_x(resolution, fov_x);
        ds.cameras.push_back(look_at_camera(eye, center, resolution, focal));
        ds.images.push_back(render::render_image(ds.cameras.back(), ds.transform, field, occ, opts));
    }
    return ds;
}

}  // namespace birf::data
