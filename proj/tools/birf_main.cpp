#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "birf/config/run_config.hpp"
#include "birf/data/data.hpp"
#include "birf/snapshot/snapshot.hpp"
#include "birf/train/train.hpp"

namespace fs = std::filesystem;
using namespace birf;

namespace {

int env_threads() {
    const char* env = std::getenv("BIRF_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

struct TrainFlags {
    std::string config_path, data_dir, oracle, out_dir, preset;
    int feature_dim = 0, iters = 0, rays = 0, eval_every = 0, march_steps = 0, threads = 0;
    long long seed = -1;
    double lambda_sparsity = -1.0;
    bool deterministic = false, mlp_fp16 = false;
};

config::RunConfig resolve_train_config(const TrainFlags& f, const CLI::App* cmd) {
    config::RunConfig cfg;
    const bool have_file = !f.config_path.empty();

    if (!f.data_dir.empty() && !f.oracle.empty())
        throw UsageError("--data and --oracle are mutually exclusive");

    // oracle runs default to the desk-scale preset unless a config file or
    // --preset full says otherwise
    const bool oracle_implied = !f.oracle.empty() || (!have_file && f.data_dir.empty());
    if (!have_file && oracle_implied && f.preset != "full") cfg.apply_oracle_desk_defaults();
    if (have_file) cfg = config::RunConfig::load(f.config_path);
    if (f.preset == "full") cfg = [&] {
        config::RunConfig full;
        full.dataset = cfg.dataset;
        full.out_dir = cfg.out_dir;
        return full;
    }();

    if (!f.data_dir.empty()) {
        cfg.dataset.type = config::DatasetType::blender;
        cfg.dataset.path = f.data_dir;
    } else if (!f.oracle.empty()) {
        cfg.dataset.type = config::DatasetType::oracle;
        cfg.dataset.path = f.oracle;
    }

    if (cmd->count("--feature-dim")) cfg.grid.feature_dim = f.feature_dim;
    if (cmd->count("--iters")) cfg.train.iterations = f.iters;
    if (cmd->count("--rays")) cfg.train.rays_per_batch = f.rays;
    if (cmd->count("--eval-every")) cfg.train.eval_every = f.eval_every;
    if (cmd->count("--march-steps")) cfg.march_steps = f.march_steps;
    if (cmd->count("--seed")) cfg.train.seed = static_cast<uint64_t>(f.seed);
    if (cmd->count("--lambda-sparsity")) cfg.train.lambda_sparsity = static_cast<float>(f.lambda_sparsity);
    if (cmd->count("--mlp-fp16")) cfg.mlp_fp16 = f.mlp_fp16;
    if (cmd->count("--out")) cfg.out_dir = f.out_dir;
    cfg.threads = cmd->count("--threads") ? f.threads : env_threads();
    if (f.deterministic) cfg.threads = 1;

    cfg.train.march_step = cfg.march_step();
    return cfg;
}

int run_train(const config::RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    cfg.save(fs::path(cfg.out_dir) / "config.json");

    const float fine_step = 0.5f * cfg.march_step();
    std::cout << "loading dataset..." << std::endl;
    const data::Dataset train_ds = config::build_dataset(cfg.dataset, "train", fine_step, cfg.train.seed);
    const data::Dataset test_ds = config::build_dataset(cfg.dataset, "test", fine_step, cfg.train.seed);
    std::cout << "train views: " << train_ds.size() << ", test views: " << test_ds.size() << std::endl;

    field::FieldModel model(cfg.grid.build(), cfg.field);
    RngStreams rng(cfg.train.seed);
    model.init_params(rng.init);

    std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");
    if (!log) throw IoError("cannot open training log in " + cfg.out_dir);

    train::Trainer trainer(model, train_ds, &test_ds, cfg.train);
    trainer.run(&log);

    const double t_train = now_ms();
    const metrics::MetricReport report = train::evaluate_model(
        model, test_ds, cfg.train.occupancy, cfg.march_step(), cfg.train.term_eps, cfg.threads,
        nullptr);
    train::LogRow final_row;
    final_row.iter = cfg.train.iterations;
    final_row.psnr_eval = report.mean_psnr();
    final_row.occ_fraction = trainer.occupancy().occupied_fraction();
    final_row.lr = nn::lr_at(cfg.train.lr, cfg.train.iterations);
    final_row.wall_ms = trainer.log_rows().empty() ? 0.0 : trainer.log_rows().back().wall_ms +
                                                              (now_ms() - t_train);
    log << final_row.to_json() << "\n";
    report.write(fs::path(cfg.out_dir) / "metrics.txt");

    const fs::path snap_path = fs::path(cfg.out_dir) / "model.birf";
    const uint64_t bytes = snapshot::save(model, train_ds.transform, train_ds.background, snap_path,
                                          cfg.mlp_fp16);
    std::cout << "final test psnr_db " << report.mean_psnr() << " ssim " << report.mean_ssim()
              << "\nsnapshot " << snap_path.string() << " (" << bytes << " bytes)\n"
              << snapshot::report_size(model, cfg.mlp_fp16).to_text();
    return 0;
}

struct IoFlags {
    std::string run_dir, snapshot_path, config_path, split = "test", out_dir;
    int view = -1;
    int threads = 0;
    bool deterministic = false;
};

struct LoadedRun {
    config::RunConfig cfg;
    snapshot::Snapshot snap;
};

LoadedRun load_run(const IoFlags& f, const CLI::App* cmd) {
    LoadedRun r;
    fs::path snap_path;
    if (!f.run_dir.empty()) {
        snap_path = fs::path(f.run_dir) / "model.birf";
        r.cfg = config::RunConfig::load(fs::path(f.run_dir) / "config.json");
    } else if (!f.snapshot_path.empty()) {
        snap_path = f.snapshot_path;
        if (!f.config_path.empty()) r.cfg = config::RunConfig::load(f.config_path);
    } else {
        throw UsageError("need --run DIR or --snapshot FILE");
    }
    if (!fs::exists(snap_path))
        throw IoError("missing snapshot: " + snap_path.string());
    r.snap = snapshot::load(snap_path);
    if (cmd->count("--threads")) r.cfg.threads = f.threads;
    if (f.deterministic) r.cfg.threads = 1;
    return r;
}

int run_render(const IoFlags& f, const CLI::App* cmd) {
    LoadedRun run = load_run(f, cmd);
    const data::Dataset ds = config::build_dataset(run.cfg.dataset, f.split,
                                                   0.5f * run.cfg.march_step(), run.cfg.train.seed);
    const fs::path out = f.out_dir.empty()
                             ? fs::path(f.run_dir.empty() ? "." : f.run_dir) / "renders"
                             : fs::path(f.out_dir);
    fs::create_directories(out);

    sampler::OccupancyGrid occ(run.cfg.train.occupancy);
    {
        field::FieldPipeline pipeline(run.snap.model);
        occ.rebuild(pipeline.density_fn());
    }
    render::RenderOptions opts;
    opts.step = run.cfg.march_step();
    opts.background = run.snap.background;
    opts.term_eps = run.cfg.train.term_eps;
    opts.threads = run.cfg.threads;

    const render::FieldFnFactory factory = [&run] {
        auto p = std::make_shared<field::FieldPipeline>(run.snap.model);
        return field::FieldFn([p](auto pos, auto dir, auto sigma, auto rgb) {
            p->forward(pos, dir, sigma, rgb);
        });
    };

    const int begin = f.view >= 0 ? f.view : 0;
    const int end = f.view >= 0 ? f.view + 1 : static_cast<int>(ds.size());
    if (begin >= static_cast<int>(ds.size()))
        throw UsageError("--view " + std::to_string(f.view) + " out of range (" +
                         std::to_string(ds.size()) + " views)");
    for (int v = begin; v < end; ++v) {
        const render::Image img =
            render::render_image(ds.cameras[v], run.snap.transform, factory, occ, opts);
        const fs::path p = out / (f.split + "_" + std::to_string(v) + ".png");
        data::write_png(p, img);
        std::cout << p.string() << "\n";
    }
    return 0;
}

int run_eval(const IoFlags& f, const CLI::App* cmd) {
    LoadedRun run = load_run(f, cmd);
    const data::Dataset ds = config::build_dataset(run.cfg.dataset, f.split,
                                                   0.5f * run.cfg.march_step(), run.cfg.train.seed);
    if (ds.size() == 0) throw UsageError("split '" + f.split + "' has no views");
    const metrics::MetricReport report =
        train::evaluate_model(run.snap.model, ds, run.cfg.train.occupancy, run.cfg.march_step(),
                              run.cfg.train.term_eps, run.cfg.threads, nullptr);
    std::cout << report.to_text();
    const fs::path out = f.out_dir.empty()
                             ? fs::path(f.run_dir.empty() ? "." : f.run_dir) / "eval_metrics.txt"
                             : fs::path(f.out_dir);
    report.write(out);
    std::cout << "report " << out.string() << "\n";
    return 0;
}

int run_info(const std::string& path) {
    uint64_t file_size = 0;
    const snapshot::SnapshotHeader h = snapshot::read_info(path, &file_size);
    std::cout << "birf snapshot v" << h.version << (h.fp16() ? " (fp16 mlp)" : " (fp32 mlp)")
              << "\nfeature_dim " << h.feature_dim << ", pe_freqs " << h.pe_freqs
              << ", embedding_width " << h.embedding_width << ", hidden_width " << h.hidden_width
              << "\n3d levels:";
    for (const auto& [res, table] : h.levels_3d) std::cout << " " << res;
    std::cout << " (table " << (h.levels_3d.empty() ? 0 : h.levels_3d[0].second) << ")\n2d levels:";
    for (const auto& [res, table] : h.levels_2d) std::cout << " " << res;
    std::cout << " (table " << (h.levels_2d.empty() ? 0 : h.levels_2d[0].second) << ", x3 planes)\n"
              << "scene scale " << h.scale << ", offset (" << h.offset[0] << ", " << h.offset[1]
              << ", " << h.offset[2] << ")\n"
              << "checksum ok, file " << file_size << " bytes\n"
              << snapshot::report_size(h).to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"binary radiance fields: train, render, eval, inspect"};
    app.require_subcommand(1);

    TrainFlags tf;
    auto* t = app.add_subcommand("train", "optimize a scene and write a .birf snapshot");
    t->add_option("--config", tf.config_path, "run config JSON");
    t->add_option("--data", tf.data_dir, "Blender-style dataset directory");
    t->add_option("--oracle", tf.oracle, "oracle scene ('spheres' or a scene JSON path)");
    t->add_option("--out", tf.out_dir, "output directory");
    t->add_option("--feature-dim", tf.feature_dim, "features per level (1, 2, 4 or 8)");
    t->add_option("--iters", tf.iters, "training iterations");
    t->add_option("--seed", tf.seed, "master seed");
    t->add_option("--rays", tf.rays, "rays per batch");
    t->add_option("--lambda-sparsity", tf.lambda_sparsity, "sparsity loss weight");
    t->add_option("--eval-every", tf.eval_every, "held-out eval period (iters)");
    t->add_option("--march-steps", tf.march_steps, "ray-march steps across the domain diagonal");
    t->add_option("--threads", tf.threads, "render threads (training itself is single-threaded)");
    t->add_option("--preset", tf.preset, "full | oracle-desk")
        ->check(CLI::IsMember({"full", "oracle-desk"}));
    t->add_flag("--mlp-fp16", tf.mlp_fp16, "store MLP weights as fp16 in the snapshot");
    t->add_flag("--deterministic", tf.deterministic, "single-threaded bit-reproducible mode");

    IoFlags rf;
    auto* r = app.add_subcommand("render", "render snapshot views to PNG");
    r->add_option("--run", rf.run_dir, "training output directory");
    r->add_option("--snapshot", rf.snapshot_path, ".birf snapshot path");
    r->add_option("--config", rf.config_path, "run config JSON (with --snapshot)");
    r->add_option("--split", rf.split, "dataset split (train|test)");
    r->add_option("--view", rf.view, "render a single view index");
    r->add_option("--out", rf.out_dir, "output directory for PNGs");
    r->add_option("--threads", rf.threads, "render threads");
    r->add_flag("--deterministic", rf.deterministic, "single-threaded bit-reproducible mode");

    IoFlags ef;
    auto* e = app.add_subcommand("eval", "render a held-out split and report PSNR/SSIM");
    e->add_option("--run", ef.run_dir, "training output directory");
    e->add_option("--snapshot", ef.snapshot_path, ".birf snapshot path");
    e->add_option("--config", ef.config_path, "run config JSON (with --snapshot)");
    e->add_option("--split", ef.split, "dataset split (train|test)");
    e->add_option("--out", ef.out_dir, "metric report path");
    e->add_option("--threads", ef.threads, "render threads");
    e->add_flag("--deterministic", ef.deterministic, "single-threaded bit-reproducible mode");

    std::string info_path;
    auto* i = app.add_subcommand("info", "print snapshot header and size breakdown");
    i->add_option("snapshot", info_path, ".birf snapshot path")->required();

    try {
        app.parse(argc, argv);
        if (t->parsed()) return run_train(resolve_train_config(tf, t));
        if (r->parsed()) return run_render(rf, r);
        if (e->parsed()) return run_eval(ef, e);
        if (i->parsed()) return run_info(info_path);
        return 2;
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return 2;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
