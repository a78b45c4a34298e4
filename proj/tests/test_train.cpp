#include <doctest.h>

#include <cmath>
#include <random>

#include "birf/config/run_config.hpp"
#include "birf/train/train.hpp"

using namespace birf;
using namespace birf::train;
using doctest::Approx;

namespace {

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.iterations = 8;
    cfg.rays_per_batch = 64;
    cfg.march_step = 0.02f;
    cfg.eval_every = 0;
    cfg.lr.warmup_iters = 4;
    cfg.lr.decay_points = {};
    cfg.occupancy.resolution = 8;
    cfg.occupancy.warmup_iters = 4;
    cfg.occupancy.update_period = 2;
    cfg.seed = 5;
    return cfg;
}

field::FieldModel tiny_model(uint64_t seed) {
    const auto gc = grid::GridConfig::make(2, 4, 8, uint64_t(1) << 12, 1, 8, 8, uint64_t(1) << 10, 1);
    field::FieldConfig fc;
    fc.hidden_width = 16;
    field::FieldModel m(gc, fc);
    RngStreams rng(seed);
    m.init_params(rng.init);
    return m;
}

data::Dataset tiny_dataset() {
    data::OracleScene scene;
    scene.spheres = {{{0.5f, 0.5f, 0.5f}, 0.22f, 60.f, {0.8f, 0.2f, 0.1f}}};
    return data::generate_oracle(scene, 4, 16, 3, 0.01f);
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("recon loss basics") {
    const std::vector<Rgb> t{{0.f, 0.f, 0.f}, {1.f, 1.f, 1.f}};
    CHECK(recon_loss(t, t) == 0.0);

    const std::vector<Rgb> p1{{1.f, 0.f, 0.f}};
    const std::vector<Rgb> t1{{0.f, 0.f, 0.f}};
    CHECK(recon_loss(p1, t1) == Approx(1.0));

    // permutation invariance
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    std::vector<Rgb> pred(16), targ(16);
    for (auto& v : pred) v = {d(rng), d(rng), d(rng)};
    for (auto& v : targ) v = {d(rng), d(rng), d(rng)};
    const double base = recon_loss(pred, targ);
    std::vector<Rgb> pred2(pred.rbegin(), pred.rend());
    std::vector<Rgb> targ2(targ.rbegin(), targ.rend());
    CHECK(recon_loss(pred2, targ2) == Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);

    CHECK_THROWS_AS(recon_loss(p1, t), ConfigError);
}

TEST_CASE("sparsity loss: zero, log3, monotone") {
    CHECK(sparsity_loss(std::vector<float>{0.f, 0.f}) == 0.0);
    CHECK(sparsity_loss(std::vector<float>{1.f}) == Approx(std::log(3.0)).epsilon(1e-9));
    double prev = 0.0;
    for (float s : {0.1f, 0.5f, 1.f, 3.f, 10.f}) {
        const double v = sparsity_loss(std::vector<float>{s});
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("lambda 0 reduces the total loss to recon exactly") {
    auto model = tiny_model(1);
    const auto ds = tiny_dataset();
    auto cfg = tiny_train_config();
    cfg.lambda_sparsity = 0.f;
    Trainer tr(model, ds, nullptr, cfg);
    const StepStats s = tr.step(0);
    CHECK(s.loss_total == s.loss_recon);
    CHECK(s.loss_sparsity >= 0.0);
}

TEST_CASE("zero iterations leave the model untouched") {
    auto model = tiny_model(2);
    const auto before_d = model.density_mlp().params().values;
    const auto before_lat = model.grid().level_3d(0).latent;
    const auto ds = tiny_dataset();
    auto cfg = tiny_train_config();
    cfg.iterations = 0;
    Trainer tr(model, ds, nullptr, cfg);
    tr.run(nullptr, 0);
    CHECK(model.density_mlp().params().values == before_d);
    CHECK(model.grid().level_3d(0).latent == before_lat);
}

TEST_CASE("a training step decreases the loss on an overfit problem") {
    auto model = tiny_model(3);
    const auto ds = tiny_dataset();
    auto cfg = tiny_train_config();
    cfg.iterations = 40;
    cfg.pixel_jitter = false;
    cfg.lr.base_lr = 0.005f;
    Trainer tr(model, ds, nullptr, cfg);
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 40; ++it) {
        const auto s = tr.step(it);
        if (it == 0) first = s.loss_recon;
        last = s.loss_recon;
    }
    CHECK(last < first);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    const auto ds = tiny_dataset();
    auto run = [&](uint64_t seed) {
        auto model = tiny_model(seed);
        auto cfg = tiny_train_config();
        cfg.seed = seed;
        Trainer tr(model, ds, nullptr, cfg);
        std::vector<double> trace;
        for (int it = 0; it < 8; ++it) trace.push_back(tr.step(it).loss_recon);
        return std::pair{trace, model.density_mlp().params().values};
    };
    const auto [trace_a, params_a] = run(42);
    const auto [trace_b, params_b] = run(42);
    CHECK(trace_a == trace_b);
    CHECK(params_a == params_b);
    const auto [trace_c, params_c] = run(43);
    CHECK(trace_a != trace_c);
}

TEST_CASE("latents frozen outside the pass-band never flip their bits") {
    auto model = tiny_model(4);
    for (auto* t : model.grid().all_tensors())
        for (auto& v : t->latent) v = v >= 0.f ? 1.25f : -1.25f;
    std::vector<std::vector<float>> bits_before;
    for (auto* t : model.grid().all_tensors())
        bits_before.push_back(binarize::sign_forward(t->latent));

    const auto ds = tiny_dataset();
    auto cfg = tiny_train_config();
    cfg.iterations = 20;
    Trainer tr(model, ds, nullptr, cfg);
    for (int it = 0; it < 20; ++it) tr.step(it);

    std::size_t k = 0;
    for (auto* t : model.grid().all_tensors())
        CHECK(binarize::sign_forward(t->latent) == bits_before[k++]);
}

TEST_CASE("trained latents stay bounded") {
    auto model = tiny_model(6);
    const auto ds = tiny_dataset();
    auto cfg = tiny_train_config();
    cfg.iterations = 60;
    Trainer tr(model, ds, nullptr, cfg);
    for (int it = 0; it < 60; ++it) tr.step(it);
    for (auto* t : model.grid().all_tensors())
        for (float v : t->latent) CHECK(std::fabs(v) < 2.f);
}

TEST_CASE("log rows serialize as one JSON object per line") {
    LogRow row;
    row.iter = 12;
    row.loss_recon = 0.5;
    row.loss_sparsity = 0.25;
    row.lr = 0.01f;
    row.occ_fraction = 0.75f;
    row.wall_ms = 123.0;
    const std::string j = row.to_json();
    CHECK(j.find("\"iter\":12") != std::string::npos);
    CHECK(j.find("psnr_eval") == std::string::npos);
    row.psnr_eval = 31.5;
    CHECK(row.to_json().find("\"psnr_eval\":31.5") != std::string::npos);
}

TEST_CASE("evaluate_model agrees with itself and with a loaded-model path") {
    auto model = tiny_model(7);
    const auto ds = tiny_dataset();
    sampler::OccupancyConfig occ;
    occ.resolution = 8;
    const auto a = evaluate_model(model, ds, occ, 0.02f, 1e-4f);
    const auto b = evaluate_model(model, ds, occ, 0.02f, 1e-4f);
    CHECK(a.psnr_db == b.psnr_db);
    CHECK(a.mean_psnr() == Approx((a.psnr_db[0] + a.psnr_db[1] + a.psnr_db[2] + a.psnr_db[3]) / 4));
}

TEST_SUITE_END();
