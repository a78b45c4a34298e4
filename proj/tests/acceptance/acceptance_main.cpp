// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run the stated tolerances; nothing is calibrated at
// runtime.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "birf/binarize/binarize.hpp"
#include "birf/config/run_config.hpp"
#include "birf/data/data.hpp"
#include "birf/metrics/metrics.hpp"
#include "birf/render/render.hpp"
#include "birf/snapshot/snapshot.hpp"
#include "birf/train/train.hpp"

using namespace birf;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", idx, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

fs::path tmp_dir() {
    const fs::path p = fs::path(BIRF_TEST_TMP) / "acceptance";
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------
// criterion 1: property suites

bool check_sign_ste() {
    if (binarize::sign_forward(std::vector<float>{0.37f})[0] != 1.f) return false;
    if (binarize::sign_forward(std::vector<float>{0.f})[0] != 1.f) return false;
    if (binarize::sign_forward(std::vector<float>{-2.5f})[0] != -1.f) return false;
    const auto m = binarize::ste_backward(std::vector<float>{0.7f, 0.7f, 0.7f},
                                          std::vector<float>{0.5f, 1.0f, -1.2f});
    if (m[0] != 0.7f || m[1] != 0.7f || m[2] != 0.f) return false;  // boundary inclusive

    std::mt19937_64 rng(101);
    std::uniform_real_distribution<float> d(-3.f, 3.f);
    for (int trial = 0; trial < 2000; ++trial) {
        const float theta = d(rng), up = d(rng);
        const auto out = binarize::ste_backward(std::vector<float>{up}, std::vector<float>{theta});
        const float want = std::fabs(theta) <= 1.f ? up : 0.f;
        if (out[0] != want) return false;
        const float s = binarize::sign_of(theta);
        if (s != 1.f && s != -1.f) return false;
        if (binarize::sign_of(s) != s) return false;
    }
    return true;
}

bool check_pack_roundtrip() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> len(0, 10000);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<float> v(len(rng));
        for (auto& x : v) x = (rng() & 1) ? 1.f : -1.f;
        const auto p = binarize::pack_bits(v);
        if (binarize::unpack_bits(p) != v) return false;
    }
    return true;
}

bool check_interpolation_bounds() {
    const auto gc = grid::GridConfig::make(4, 4, 32, uint64_t(1) << 12, 2, 8, 16, uint64_t(1) << 10, 2);
    grid::HybridGrid g(gc);
    std::mt19937_64 rng(303);
    g.init(rng);
    std::vector<float> out(g.feature_width());
    std::uniform_real_distribution<float> d(-0.3f, 1.3f);
    for (int trial = 0; trial < 10000; ++trial) {
        g.encode({d(rng), d(rng), d(rng)}, out.data());
        for (float v : out)
            if (!(v >= -1.f - 1e-5f && v <= 1.f + 1e-5f)) return false;
    }
    // partition of unity: with every sign +1 the blend must be exactly 1
    for (auto* t : g.all_tensors())
        for (auto& v : t->latent) v = 1.f;
    for (int trial = 0; trial < 10000; ++trial) {
        g.encode({d(rng), d(rng), d(rng)}, out.data());
        for (float v : out)
            if (std::fabs(v - 1.f) > 1e-5f) return false;
    }
    return true;
}

bool check_composite_identities() {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<float> ds(0.f, 40.f), dd(0.001f, 0.05f), dc(0.f, 1.f);
    std::uniform_int_distribution<int> dn(1, 80);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = dn(rng);
        std::vector<float> sigma(n), delta(n);
        std::vector<Rgb> color(n);
        for (int i = 0; i < n; ++i) {
            sigma[i] = ds(rng);
            delta[i] = dd(rng);
            color[i] = {dc(rng), dc(rng), dc(rng)};
        }
        const auto res = render::composite(sigma, color, delta, {1.f, 1.f, 1.f});
        double sum_w = 0.0, T = 1.0;
        for (int i = 0; i < n; ++i) {
            if (res.weights[i] < 0.0) return false;
            sum_w += res.weights[i];
            const double T_next = T - res.weights[i];
            if (T_next > T) return false;  // non-increasing transmittance
            T = T_next;
        }
        if (sum_w != res.opacity) return false;  // identical accumulation, bit-exact
        if (std::fabs((1.0 - res.t_final) - sum_w) > 1e-12) return false;
        if (res.opacity > 1.0 + 1e-12) return false;
    }
    return true;
}

void criterion_1() {
    const double t0 = now_ms();
    const bool a = check_sign_ste();
    const bool b = check_pack_roundtrip();
    const bool c = check_interpolation_bounds();
    const bool d = check_composite_identities();
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "property suites (sign/ste %s, pack roundtrip %s, interpolation %s, "
                  "compositing %s) in %.1f s",
                  a ? "ok" : "FAIL", b ? "ok" : "FAIL", c ? "ok" : "FAIL", d ? "ok" : "FAIL",
                  (now_ms() - t0) / 1000.0);
    report(1, a && b && c && d, buf);
}

// ---------------------------------------------------------------------------
// criterion 2: gradient correctness against an independent double-precision
// forward implementation of the whole pipeline

struct FrozenBatch {
    std::vector<Vec3> pos, dir;
    std::vector<float> delta;
    std::vector<std::size_t> ray_offset;
    std::vector<Rgb> targets;
};

struct SignEps {
    const binarize::BinaryTensor* tensor = nullptr;
    std::size_t index = 0;
    double eps = 0.0;
};

struct ParamEps {
    const nn::Mlp* mlp = nullptr;
    std::size_t index = 0;
    double eps = 0.0;
};

// grid encode in double, replicating the documented cell/hash layout
void oracle_encode(const grid::HybridGrid& g, const Vec3& x, const SignEps* eps,
                   std::vector<double>& out) {
    const auto& cfg = g.config();
    const int F = cfg.feature_dim;
    out.assign(g.feature_width(), 0.0);

    auto corner_weights_1d = [](float coord, int res, int& base, double w[2]) {
        float pos = coord < 0.f ? 0.f : (coord > 1.f ? 1.f : coord);
        pos *= res;
        base = static_cast<int>(pos);
        if (base >= res) base = res - 1;
        const double f = static_cast<double>(pos) - base;
        w[0] = 1.0 - f;
        w[1] = f;
    };
    auto sign_val = [&](const binarize::BinaryTensor& t, std::size_t idx) {
        double v = t.latent[idx] >= 0.f ? 1.0 : -1.0;
        if (eps && eps->tensor == &t && eps->index == idx) v += eps->eps;
        return v;
    };

    std::size_t o = 0;
    for (std::size_t l = 0; l < cfg.levels_3d.size(); ++l) {
        const auto& lv = cfg.levels_3d[l];
        int bx, by, bz;
        double wx[2], wy[2], wz[2];
        corner_weights_1d(x.x, lv.resolution, bx, wx);
        corner_weights_1d(x.y, lv.resolution, by, wy);
        corner_weights_1d(x.z, lv.resolution, bz, wz);
        for (int cz = 0; cz < 2; ++cz)
            for (int cy = 0; cy < 2; ++cy)
                for (int cx = 0; cx < 2; ++cx) {
                    const int corner[3] = {bx + cx, by + cy, bz + cz};
                    const uint64_t idx = grid::grid_index(lv, corner);
                    const double w = wx[cx] * wy[cy] * wz[cz];
                    for (int f = 0; f < F; ++f)
                        out[o + f] += w * sign_val(g.level_3d(l), idx * F + f);
                }
        o += F;
    }
    for (int p = 0; p < 3; ++p) {
        float u = p == 0 ? x.x : (p == 1 ? x.x : x.y);
        float v = p == 0 ? x.y : x.z;
        for (std::size_t m = 0; m < cfg.levels_2d.size(); ++m) {
            const auto& lv = cfg.levels_2d[m];
            int bu, bv;
            double wu[2], wv[2];
            corner_weights_1d(u, lv.resolution, bu, wu);
            corner_weights_1d(v, lv.resolution, bv, wv);
            for (int cv = 0; cv < 2; ++cv)
                for (int cu = 0; cu < 2; ++cu) {
                    const int corner[2] = {bu + cu, bv + cv};
                    const uint64_t idx = grid::grid_index(lv, corner);
                    const double w = wu[cu] * wv[cv];
                    for (int f = 0; f < F; ++f)
                        out[o + f] += w * sign_val(g.plane(p, m), idx * F + f);
                }
            o += F;
        }
    }
}

void oracle_sh(const Vec3& din, double out[16]) {
    const double n = std::sqrt(double(din.x) * din.x + double(din.y) * din.y + double(din.z) * din.z);
    const double x = din.x / n, y = din.y / n, z = din.z / n;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[0] = 0.28209479177387814;
    out[1] = 0.4886025119029199 * y;
    out[2] = 0.4886025119029199 * z;
    out[3] = 0.4886025119029199 * x;
    out[4] = 1.0925484305920792 * x * y;
    out[5] = 1.0925484305920792 * y * z;
    out[6] = 0.31539156525252005 * (3.0 * zz - 1.0);
    out[7] = 1.0925484305920792 * x * z;
    out[8] = 0.5462742152960396 * (xx - yy);
    out[9] = 0.5900435899266435 * y * (3.0 * xx - yy);
    out[10] = 2.890611442640554 * x * y * z;
    out[11] = 0.4570457994644658 * y * (5.0 * zz - 1.0);
    out[12] = 0.3731763325901154 * z * (5.0 * zz - 3.0);
    out[13] = 0.4570457994644658 * x * (5.0 * zz - 1.0);
    out[14] = 1.445305721320277 * z * (xx - yy);
    out[15] = 0.5900435899266435 * x * (xx - 3.0 * yy);
}

std::vector<double> oracle_mlp(const nn::Mlp& mlp, const std::vector<double>& input,
                               const ParamEps* eps) {
    const auto& spec = mlp.spec();
    auto param = [&](std::size_t flat) {
        double v = mlp.params().values[flat];
        if (eps && eps->mlp == &mlp && eps->index == flat) v += eps->eps;
        return v;
    };
    std::vector<double> x = input;
    std::size_t off = 0;
    for (int l = 0; l < spec.num_weight_layers(); ++l) {
        const int in_w = spec.layer_in(l), out_w = spec.layer_out(l);
        std::vector<double> y(out_w);
        for (int o2 = 0; o2 < out_w; ++o2) {
            double acc = 0.0;
            for (int i = 0; i < in_w; ++i)
                acc += param(off + static_cast<std::size_t>(o2) * in_w + i) * x[i];
            y[o2] = acc;
        }
        off += static_cast<std::size_t>(out_w) * in_w;
        for (int o2 = 0; o2 < out_w; ++o2) y[o2] += param(off + o2);
        off += out_w;
        if (l < spec.num_weight_layers() - 1)
            for (auto& v : y) v = v > 0.0 ? v : 0.0;
        else if (spec.output_activation == nn::OutputActivation::sigmoid)
            for (auto& v : y) v = 1.0 / (1.0 + std::exp(-v));
        x = std::move(y);
    }
    return x;
}

double oracle_loss(const field::FieldModel& model, const FrozenBatch& batch, float lambda,
                   const ParamEps* peps, const SignEps* seps) {
    const auto& fc = model.config();
    const int pe_w = nn::positional_encode_width(fc.pe_freqs);
    const std::size_t n_samples = batch.pos.size();
    std::vector<double> sigmas(n_samples);
    std::vector<std::array<double, 3>> colors(n_samples);
    std::vector<double> feat;

    for (std::size_t s = 0; s < n_samples; ++s) {
        const Vec3& x = batch.pos[s];
        std::vector<double> din(model.density_input_width());
        din[0] = x.x;
        din[1] = x.y;
        din[2] = x.z;
        double scale = M_PI;
        int o = 3;
        for (int k = 0; k < fc.pe_freqs; ++k) {
            for (int a = 0; a < 3; ++a) din[o + a] = std::sin(scale * (double)x[a]);
            for (int a = 0; a < 3; ++a) din[o + 3 + a] = std::cos(scale * (double)x[a]);
            o += 6;
            scale *= 2.0;
        }
        oracle_encode(model.grid(), x, seps, feat);
        for (std::size_t i = 0; i < feat.size(); ++i) din[pe_w + i] = feat[i];

        const auto dout = oracle_mlp(model.density_mlp(), din, peps);
        double raw = dout[0];
        const double c = fc.density_exp_clamp;
        raw = raw < -c ? -c : (raw > c ? c : raw);
        sigmas[s] = std::exp(raw);

        std::vector<double> cin(model.color_input_width());
        for (int e = 0; e < fc.embedding_width; ++e) cin[e] = dout[1 + e];
        double sh[16];
        oracle_sh(batch.dir[s], sh);
        for (int i = 0; i < 16; ++i) cin[fc.embedding_width + i] = sh[i];
        const auto cout = oracle_mlp(model.color_mlp(), cin, peps);
        colors[s] = {cout[0], cout[1], cout[2]};
    }

    // Eq.-2 compositing per ray onto white, then mean squared color error
    double recon = 0.0;
    const std::size_t n_rays = batch.ray_offset.size() - 1;
    for (std::size_t r = 0; r < n_rays; ++r) {
        double T = 1.0;
        double acc[3] = {0, 0, 0};
        for (std::size_t s = batch.ray_offset[r]; s < batch.ray_offset[r + 1]; ++s) {
            const double alpha = 1.0 - std::exp(-sigmas[s] * batch.delta[s]);
            for (int ch = 0; ch < 3; ++ch) acc[ch] += T * alpha * colors[s][ch];
            T *= 1.0 - alpha;
        }
        for (int ch = 0; ch < 3; ++ch) {
            const double diff = acc[ch] + T * 1.0 - batch.targets[r][ch];
            recon += diff * diff;
        }
    }
    recon /= static_cast<double>(n_rays);

    double sparsity = 0.0;
    for (double s : sigmas) sparsity += std::log1p(2.0 * s * s);
    sparsity /= static_cast<double>(n_rays);  // per-ray normalizer, matching training
    return recon + lambda * sparsity;
}

void criterion_2() {
    const double t0 = now_ms();
    const float lambda = 2e-5f;

    // tiny model: 3D L=2 N<=4, 2D M=1, F=1, 16-wide MLPs
    const auto gc = grid::GridConfig::make(2, 2, 4, uint64_t(1) << 10, 1, 4, 4, uint64_t(1) << 8, 1);
    field::FieldConfig fc;
    fc.hidden_width = 16;
    field::FieldModel model(gc, fc);
    RngStreams rng(77);
    model.init_params(rng.init);

    // frozen sample set: a few rays through the cube, fixed step, no occupancy
    FrozenBatch batch;
    batch.ray_offset.push_back(0);
    sampler::OccupancyConfig occ_cfg;
    occ_cfg.resolution = 2;
    sampler::OccupancyGrid occ(occ_cfg);  // fully occupied
    const std::vector<std::pair<Vec3, Vec3>> rays = {
        {{-0.5f, 0.45f, 0.55f}, normalized({1.f, 0.05f, -0.02f})},
        {{0.35f, -0.4f, 0.6f}, normalized({0.1f, 1.f, -0.1f})},
        {{0.8f, 0.7f, -0.5f}, normalized({-0.2f, -0.1f, 1.f})},
        {{1.4f, 0.5f, 0.5f}, normalized({-1.f, 0.02f, 0.08f})},
    };
    const std::vector<Rgb> targets = {
        {0.9f, 0.2f, 0.1f}, {0.2f, 0.8f, 0.3f}, {0.1f, 0.3f, 0.9f}, {0.5f, 0.5f, 0.5f}};
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (const auto& s : sampler::march_ray(occ, rays[r].first, rays[r].second, 0.06f)) {
            batch.pos.push_back(rays[r].first + rays[r].second * s.t_mid());
            batch.dir.push_back(rays[r].second);
            batch.delta.push_back(s.delta());
        }
        batch.ray_offset.push_back(batch.pos.size());
        batch.targets.push_back(targets[r]);
    }
    const std::size_t n_samples = batch.pos.size();
    const std::size_t n_rays = rays.size();

    // production forward/backward (early termination disabled; the frozen
    // sample set must stay fixed under finite-difference perturbation)
    field::FieldPipeline pipe(model);
    std::vector<float> sigma(n_samples);
    std::vector<Rgb> rgb(n_samples);
    pipe.forward(batch.pos, batch.dir, sigma, rgb);

    std::vector<render::CompositeResult> comps(n_rays);
    std::vector<float> dsigma(n_samples, 0.f);
    std::vector<Rgb> drgb(n_samples);
    double loss_prod = 0.0;
    for (std::size_t r = 0; r < n_rays; ++r) {
        const std::size_t o = batch.ray_offset[r], e = batch.ray_offset[r + 1];
        comps[r] = render::composite(std::span(sigma).subspan(o, e - o),
                                     std::span(rgb).subspan(o, e - o),
                                     std::span(batch.delta).subspan(o, e - o), {1.f, 1.f, 1.f}, 0.f);
        const Rgb diff = comps[r].color - batch.targets[r];
        loss_prod += double(diff.r) * diff.r + double(diff.g) * diff.g + double(diff.b) * diff.b;
        const float sc = 2.f / static_cast<float>(n_rays);
        render::composite_backward(std::span(sigma).subspan(o, e - o),
                                   std::span(rgb).subspan(o, e - o),
                                   std::span(batch.delta).subspan(o, e - o), {1.f, 1.f, 1.f},
                                   comps[r], {diff.r * sc, diff.g * sc, diff.b * sc},
                                   std::span(dsigma).subspan(o, e - o),
                                   std::span(drgb).subspan(o, e - o));
    }
    loss_prod /= static_cast<double>(n_rays);
    double spars = 0.0;
    for (float s : sigma) spars += std::log1p(2.0 * double(s) * s);
    loss_prod += lambda * spars / static_cast<double>(n_rays);
    for (std::size_t s = 0; s < n_samples; ++s)
        dsigma[s] += lambda * 4.f * sigma[s] / (1.f + 2.f * sigma[s] * sigma[s]) /
                     static_cast<float>(n_rays);
    pipe.backward(batch.pos, batch.dir, dsigma, drgb);

    // the oracle and production forwards must agree before FD means anything
    const double loss_oracle = oracle_loss(model, batch, lambda, nullptr, nullptr);
    bool forward_ok = std::fabs(loss_prod - loss_oracle) <= 1e-5 * std::max(1.0, loss_oracle);

    // every MLP gradient vs central FD of the oracle loss
    auto max_abs = [](const std::vector<float>& v) {
        float m = 0.f;
        for (float x : v) m = std::max(m, std::fabs(x));
        return m;
    };
    int mlp_checked = 0, mlp_bad = 0;
    double worst_mlp = 0.0;
    for (nn::Mlp* mlp : {&model.density_mlp(), &model.color_mlp()}) {
        const float scale = max_abs(mlp->params().grads);
        for (std::size_t p = 0; p < mlp->params().size(); ++p) {
            const double got = mlp->params().grads[p];
            // a probe interval can straddle a ReLU kink, where the secant is
            // not the subgradient; shrinking the step moves the kink outside
            double err = 0.0, tol = 0.0, rel = 0.0;
            for (const double h : {1e-4, 1e-6}) {
                ParamEps pe{mlp, p, +h};
                const double up = oracle_loss(model, batch, lambda, &pe, nullptr);
                pe.eps = -h;
                const double dn = oracle_loss(model, batch, lambda, &pe, nullptr);
                const double fd = (up - dn) / (2 * h);
                err = std::fabs(got - fd);
                tol = 1e-3 * std::max(std::fabs(fd), std::fabs(got)) + 1e-5 * scale;
                rel = err / std::max({std::fabs(fd), std::fabs(got), 1e-9});
                if (err <= tol) break;
            }
            worst_mlp = std::max(worst_mlp, rel);
            ++mlp_checked;
            if (err > tol) ++mlp_bad;
        }
    }

    // >= 100 sign-stable grid latents: FD w.r.t. the binarized value
    int grid_checked = 0, grid_bad = 0;
    for (auto* t : model.grid().all_tensors()) {
        for (std::size_t i = 0; i < t->latent.size() && grid_checked < 160; ++i) {
            if (t->grads[i] == 0.f) continue;          // untouched by the batch
            if (std::fabs(t->latent[i]) >= 0.9f) continue;  // outside the probe band
            const double got = t->grads[i];
            double err = 0.0, tol = 0.0;
            for (const double h : {1e-3, 1e-5}) {
                SignEps se{t, i, +h};
                const double up = oracle_loss(model, batch, lambda, nullptr, &se);
                se.eps = -h;
                const double dn = oracle_loss(model, batch, lambda, nullptr, &se);
                const double fd = (up - dn) / (2 * h);
                err = std::fabs(got - fd);
                tol = 1e-3 * std::max(std::fabs(fd), std::fabs(got)) + 1e-9;
                if (err <= tol) break;
            }
            ++grid_checked;
            if (err > tol) ++grid_bad;
        }
    }

    // analytic composite backward vs double FD on a standalone random ray
    bool comp_ok = true;
    {
        std::mt19937_64 crng(55);
        std::uniform_real_distribution<float> ds2(0.1f, 20.f), dd2(0.01f, 0.08f), dc2(0.f, 1.f);
        const int n = 10;
        std::vector<float> s2(n), d2(n);
        std::vector<Rgb> c2(n);
        for (int i = 0; i < n; ++i) {
            s2[i] = ds2(crng);
            d2[i] = dd2(crng);
            c2[i] = {dc2(crng), dc2(crng), dc2(crng)};
        }
        const Rgb bg{1.f, 1.f, 1.f}, up{0.4f, -0.7f, 0.2f};
        const auto res = render::composite(s2, c2, d2, bg, 0.f);
        std::vector<float> dsig(n);
        std::vector<Rgb> dcol(n);
        render::composite_backward(s2, c2, d2, bg, res, up, dsig, dcol);
        auto lossd = [&](const std::vector<double>& sv, const std::vector<std::array<double, 3>>& cv) {
            double T = 1.0, acc[3] = {0, 0, 0};
            for (int i = 0; i < n; ++i) {
                const double a = 1.0 - std::exp(-sv[i] * d2[i]);
                for (int ch = 0; ch < 3; ++ch) acc[ch] += T * a * cv[i][ch];
                T *= 1.0 - a;
            }
            for (int ch = 0; ch < 3; ++ch) acc[ch] += T * 1.0;
            return up.r * acc[0] + up.g * acc[1] + up.b * acc[2];
        };
        std::vector<double> sv(s2.begin(), s2.end());
        std::vector<std::array<double, 3>> cv(n);
        for (int i = 0; i < n; ++i) cv[i] = {c2[i].r, c2[i].g, c2[i].b};
        const double h = 1e-4;
        for (int i = 0; i < n && comp_ok; ++i) {
            auto sp = sv, sm = sv;
            sp[i] += h;
            sm[i] -= h;
            const double fd = (lossd(sp, cv) - lossd(sm, cv)) / (2 * h);
            if (std::fabs(dsig[i] - fd) > 1e-4 * std::max(std::fabs(fd), 1e-3)) comp_ok = false;
            for (int ch = 0; ch < 3 && comp_ok; ++ch) {
                auto cp = cv, cm = cv;
                cp[i][ch] += h;
                cm[i][ch] -= h;
                const double fdc = (lossd(sv, cp) - lossd(sv, cm)) / (2 * h);
                if (std::fabs(dcol[i][ch] - fdc) > 1e-4 * std::max(std::fabs(fdc), 1e-3))
                    comp_ok = false;
            }
        }
    }

    char buf[384];
    const bool pass = forward_ok && mlp_bad == 0 && grid_checked >= 100 && grid_bad == 0 && comp_ok;
    std::snprintf(buf, sizeof(buf),
                  "gradient correctness: %d/%d mlp grads ok (worst rel %.2e), %d/%d grid latents ok, "
                  "composite fd %s, forward parity %s, %.1f s",
                  mlp_checked - mlp_bad, mlp_checked, worst_mlp, grid_checked - grid_bad,
                  grid_checked, comp_ok ? "ok" : "FAIL", forward_ok ? "ok" : "FAIL",
                  (now_ms() - t0) / 1000.0);
    report(2, pass, buf);
}

// ---------------------------------------------------------------------------
// criteria 3 + 5 + 6 share the desk-scale oracle setup

config::RunConfig desk_config() {
    config::RunConfig cfg;
    cfg.apply_oracle_desk_defaults();
    cfg.train.seed = 1;
    cfg.out_dir = (tmp_dir() / "desk_run").string();
    return cfg;
}

double constant_baseline_psnr(const data::Dataset& train_ds, const data::Dataset& test_ds) {
    double mean[3] = {0, 0, 0};
    std::size_t count = 0;
    for (const auto& img : train_ds.images) {
        for (std::size_t p = 0; p + 2 < img.rgb.size(); p += 3) {
            mean[0] += img.rgb[p];
            mean[1] += img.rgb[p + 1];
            mean[2] += img.rgb[p + 2];
            ++count;
        }
    }
    const Rgb c{static_cast<float>(mean[0] / count), static_cast<float>(mean[1] / count),
                static_cast<float>(mean[2] / count)};
    double acc = 0.0;
    for (const auto& img : test_ds.images) {
        const auto constant = render::Image::filled(img.width, img.height, c);
        acc += metrics::psnr(constant, img);
    }
    return acc / static_cast<double>(test_ds.size());
}

void criteria_3_5_6() {
    const double t0 = now_ms();
    config::RunConfig cfg = desk_config();
    const float fine_step = 0.5f * cfg.march_step();
    const data::Dataset train_ds =
        config::build_dataset(cfg.dataset, "train", fine_step, cfg.train.seed);
    const data::Dataset test_ds =
        config::build_dataset(cfg.dataset, "test", fine_step, cfg.train.seed);

    field::FieldModel model(cfg.grid.build(), cfg.field);
    RngStreams rng(cfg.train.seed);
    model.init_params(rng.init);

    train::Trainer trainer(model, train_ds, &test_ds, cfg.train);
    trainer.run(nullptr, 0);
    const double train_secs = (now_ms() - t0) / 1000.0;

    const metrics::MetricReport rep = train::evaluate_model(
        model, test_ds, cfg.train.occupancy, cfg.march_step(), cfg.train.term_eps);
    const double trained_psnr = rep.mean_psnr();
    const double baseline = constant_baseline_psnr(train_ds, test_ds);

    // Window-mean recon loss over 200-iter windows: non-increasing within the
    // window-mean standard error (batch composition noise never vanishes on a
    // stochastic trace), plus a hard overall-progress backstop.
    const auto& rows = trainer.log_rows();
    std::vector<double> wmean, wse;
    for (std::size_t w = 0; w + 200 <= rows.size(); w += 200) {
        double m = 0.0;
        for (std::size_t i = w; i < w + 200; ++i) m += rows[i].loss_recon;
        m /= 200.0;
        double var = 0.0;
        for (std::size_t i = w; i < w + 200; ++i) {
            const double d = rows[i].loss_recon - m;
            var += d * d;
        }
        wmean.push_back(m);
        wse.push_back(std::sqrt(var / 199.0 / 200.0));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < wmean.size(); ++i)
        if (wmean[i] - wmean[i - 1] > 3.0 * std::max(wse[i], wse[i - 1])) monotone = false;
    const bool progressed = wmean.back() <= 0.5 * wmean.front();

    {
        char buf[384];
        const bool pass =
            trained_psnr >= baseline + 10.0 && monotone && progressed && train_secs <= 900.0;
        std::snprintf(buf, sizeof(buf),
                      "desk-scale convergence: psnr %.2f dB vs constant baseline %.2f dB "
                      "(needs +10), loss windows %s within 3 SE (last/first %.2f), "
                      "train %.0f s (cap 900)",
                      trained_psnr, baseline, monotone ? "monotone" : "NOT monotone",
                      wmean.back() / wmean.front(), train_secs);
        report(3, pass, buf);
    }

    // criterion 5: serialization exactness on the trained model
    {
        const fs::path p1 = tmp_dir() / "desk.birf";
        const fs::path p2 = tmp_dir() / "desk_resave.birf";
        snapshot::save(model, train_ds.transform, train_ds.background, p1);
        snapshot::Snapshot snap = snapshot::load(p1);
        snapshot::save(snap.model, snap.transform, snap.background, p2);
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        const bool bytes_ok = !b1.empty() && b1 == b2;

        // deterministic render parity: in-memory model vs loaded snapshot
        std::vector<render::Image> img_mem, img_loaded;
        train::evaluate_model(model, test_ds, cfg.train.occupancy, cfg.march_step(),
                              cfg.train.term_eps, 1, &img_mem);
        train::evaluate_model(snap.model, test_ds, cfg.train.occupancy, cfg.march_step(),
                              cfg.train.term_eps, 1, &img_loaded);
        bool pixels_ok = img_mem.size() == img_loaded.size();
        for (std::size_t v = 0; pixels_ok && v < img_mem.size(); ++v)
            pixels_ok = img_mem[v].rgb == img_loaded[v].rgb;

        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "snapshot exactness: save/load/save bytes %s, loaded-vs-memory render %s "
                      "(%zu views, bit-identical)",
                      bytes_ok ? "identical" : "DIFFER", pixels_ok ? "identical" : "DIFFER",
                      img_mem.size());
        report(5, bytes_ok && pixels_ok, buf);
    }

    // criterion 6: sparsity loss direction on a reduced pair of runs
    {
        const double t6 = now_ms();
        config::RunConfig small = desk_config();
        small.grid = config::GridParams{6, 16, 64, 13, 4, 64, 512, 11, 2};
        small.dataset.train_views = 12;
        small.dataset.test_views = 4;
        small.dataset.resolution = 48;
        small.train.iterations = 1000;
        small.train.rays_per_batch = 384;
        small.train.eval_every = 0;
        small.train.lr.warmup_iters = 200;
        small.train.lr.decay_points = {750};
        small.train.occupancy.resolution = 48;
        small.march_steps = 192;
        small.train.march_step = small.march_step();

        const float fstep = 0.5f * small.march_step();
        const data::Dataset tr6 = config::build_dataset(small.dataset, "train", fstep, small.train.seed);
        const data::Dataset te6 = config::build_dataset(small.dataset, "test", fstep, small.train.seed);

        auto run_one = [&](float lambda, double* psnr_out, double* occ_out) {
            config::RunConfig c = small;
            c.train.lambda_sparsity = lambda;
            field::FieldModel m6(c.grid.build(), c.field);
            RngStreams r6(c.train.seed);
            m6.init_params(r6.init);
            train::Trainer t(m6, tr6, nullptr, c.train);
            t.run(nullptr, 0);
            *occ_out = t.occupancy().occupied_fraction();
            const auto rep6 = train::evaluate_model(m6, te6, c.train.occupancy, c.march_step(),
                                                    c.train.term_eps);
            *psnr_out = rep6.mean_psnr();
        };
        double psnr_sparse = 0, occ_sparse = 0, psnr_plain = 0, occ_plain = 0;
        run_one(2e-5f, &psnr_sparse, &occ_sparse);
        run_one(0.f, &psnr_plain, &occ_plain);

        const bool dir_ok = occ_sparse <= occ_plain;
        const bool psnr_ok = std::fabs(psnr_sparse - psnr_plain) <= 0.5;
        char buf[320];
        std::snprintf(buf, sizeof(buf),
                      "sparsity direction: occupied fraction %.4f (lambda 2e-5) vs %.4f (lambda 0), "
                      "psnr %.2f vs %.2f dB (|diff| %.3f <= 0.5), %.0f s",
                      occ_sparse, occ_plain, psnr_sparse, psnr_plain,
                      std::fabs(psnr_sparse - psnr_plain), (now_ms() - t6) / 1000.0);
        report(6, dir_ok && psnr_ok, buf);
    }
}

// ---------------------------------------------------------------------------
// criterion 4: structural storage claim

void criterion_4() {
    const double t0 = now_ms();
    const auto base = grid::GridConfig::base(1);
    const uint64_t bits = grid::payload_bits(base);
    const double formula_mb = static_cast<double>(bits) / 8.0 / (1024.0 * 1024.0);

    field::FieldModel model(base, field::FieldConfig{});
    std::mt19937_64 rng(5);
    model.init_params(rng);
    const fs::path p = tmp_dir() / "base_f1.birf";
    snapshot::save(model, render::SceneTransform::from_aabb_half(1.5f), {1.f, 1.f, 1.f}, p);
    const auto rep = snapshot::report_size(model);
    const double saved_mb = static_cast<double>(rep.grid_bytes) / (1024.0 * 1024.0);

    const bool pass = formula_mb >= 0.68 && formula_mb <= 0.85 && saved_mb >= 0.68 &&
                      saved_mb <= 0.85 && fs::file_size(p) == rep.total_bytes();
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "storage claim: base F=1 grid payload %.4f MB by formula, %.4f MB saved "
                  "(window 0.68..0.85), %.2f s",
                  formula_mb, saved_mb, (now_ms() - t0) / 1000.0);
    report(4, pass, buf);
}

// ---------------------------------------------------------------------------
// criterion 7: the full benchmark protocol is documented, not rerun

void criterion_7() {
    std::ifstream in(BIRF_README_PATH);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const bool has_cmd = text.find("--preset full") != std::string::npos &&
                         text.find("--iters 20000") != std::string::npos &&
                         text.find("nerf_synthetic") != std::string::npos;
    report(7, has_cmd,
           has_cmd ? "full-scale benchmark command documented in README (not run here by design)"
                   : "README is missing the full-scale benchmark command");
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_4();
    criteria_3_5_6();
    criterion_7();
    std::printf("%s\n", g_failures == 0 ? "all criteria passed" : "FAILURES present");
    return g_failures == 0 ? 0 : 1;
}
