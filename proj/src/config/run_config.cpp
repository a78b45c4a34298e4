#include "birf/config/run_config.hpp"

#include <fstream>

#include <json.hpp>

namespace birf::config {

using nlohmann::json;

grid::GridConfig GridParams::build() const {
    return grid::GridConfig::make(levels_3d, n3_min, n3_max, uint64_t(1) << log2_t3,
                                  levels_2d, n2_min, n2_max, uint64_t(1) << log2_t2, feature_dim);
}

void RunConfig::apply_oracle_desk_defaults() {
    grid = GridParams{8, 16, 128, 15, 4, 64, 512, 13, 2};
    train.iterations = 2000;
    train.rays_per_batch = 512;
    train.eval_every = 500;
    train.lr.warmup_iters = 256;
    // staircase decays after the scene has mostly converged keep the
    // stochastic loss floor moving down through the end of the run
    train.lr.decay_points = {800, 1000, 1200, 1400, 1600, 1800};
    train.occupancy.resolution = 64;
    march_steps = 256;
}

namespace {

json rgb_to_json(const Rgb& c) { return json::array({c.r, c.g, c.b}); }

Rgb rgb_from_json(const json& j) {
    return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()};
}

}  // namespace

std::string RunConfig::to_json_text() const {
    json j;
    j["dataset"] = {
        {"type", dataset.type == DatasetType::oracle ? "oracle" : "blender"},
        {"path", dataset.path},
        {"train_views", dataset.train_views},
        {"test_views", dataset.test_views},
        {"resolution", dataset.resolution},
        {"aabb_half", dataset.aabb_half},
        {"background", rgb_to_json(dataset.background)},
    };
    j["grid"] = {
        {"levels_3d", grid.levels_3d}, {"n3_min", grid.n3_min}, {"n3_max", grid.n3_max},
        {"log2_t3", grid.log2_t3},     {"levels_2d", grid.levels_2d}, {"n2_min", grid.n2_min},
        {"n2_max", grid.n2_max},       {"log2_t2", grid.log2_t2},
        {"feature_dim", grid.feature_dim},
    };
    j["field"] = {
        {"pe_freqs", field.pe_freqs},
        {"embedding_width", field.embedding_width},
        {"hidden_width", field.hidden_width},
        {"density_exp_clamp", field.density_exp_clamp},
    };
    j["train"] = {
        {"iterations", train.iterations},
        {"rays_per_batch", train.rays_per_batch},
        {"lambda_sparsity", train.lambda_sparsity},
        {"seed", train.seed},
        {"eval_every", train.eval_every},
        {"pixel_jitter", train.pixel_jitter},
        {"term_eps", train.term_eps},
        {"lr",
         {{"base", train.lr.base_lr},
          {"warmup_iters", train.lr.warmup_iters},
          {"decay_points", train.lr.decay_points},
          {"decay_factor", train.lr.decay_factor}}},
        {"occupancy",
         {{"resolution", train.occupancy.resolution},
          {"update_period", train.occupancy.update_period},
          {"decay", train.occupancy.decay},
          {"threshold", train.occupancy.threshold},
          {"warmup_iters", train.occupancy.warmup_iters},
          {"candidate_fraction", train.occupancy.candidate_fraction}}},
    };
    j["march_steps"] = march_steps;
    j["mlp_fp16"] = mlp_fp16;
    j["threads"] = threads;
    j["out"] = out_dir;
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed run config JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            if (d.contains("type")) {
                const std::string t = d["type"].get<std::string>();
                if (t == "oracle")
                    cfg.dataset.type = DatasetType::oracle;
                else if (t == "blender")
                    cfg.dataset.type = DatasetType::blender;
                else
                    throw UsageError("unknown dataset.type '" + t + "' (oracle|blender)");
            }
            if (d.contains("path")) cfg.dataset.path = d["path"].get<std::string>();
            if (d.contains("train_views")) cfg.dataset.train_views = d["train_views"].get<int>();
            if (d.contains("test_views")) cfg.dataset.test_views = d["test_views"].get<int>();
            if (d.contains("resolution")) cfg.dataset.resolution = d["resolution"].get<int>();
            if (d.contains("aabb_half")) cfg.dataset.aabb_half = d["aabb_half"].get<float>();
            if (d.contains("background")) cfg.dataset.background = rgb_from_json(d["background"]);
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            auto get = [&](const char* k, int& v) {
                if (g.contains(k)) v = g[k].get<int>();
            };
            get("levels_3d", cfg.grid.levels_3d);
            get("n3_min", cfg.grid.n3_min);
            get("n3_max", cfg.grid.n3_max);
            get("log2_t3", cfg.grid.log2_t3);
            get("levels_2d", cfg.grid.levels_2d);
            get("n2_min", cfg.grid.n2_min);
            get("n2_max", cfg.grid.n2_max);
            get("log2_t2", cfg.grid.log2_t2);
            get("feature_dim", cfg.grid.feature_dim);
        }
        if (j.contains("field")) {
            const auto& f = j["field"];
            if (f.contains("pe_freqs")) cfg.field.pe_freqs = f["pe_freqs"].get<int>();
            if (f.contains("embedding_width")) cfg.field.embedding_width = f["embedding_width"].get<int>();
            if (f.contains("hidden_width")) cfg.field.hidden_width = f["hidden_width"].get<int>();
            if (f.contains("density_exp_clamp"))
                cfg.field.density_exp_clamp = f["density_exp_clamp"].get<float>();
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            if (t.contains("iterations")) cfg.train.iterations = t["iterations"].get<int>();
            if (t.contains("rays_per_batch")) cfg.train.rays_per_batch = t["rays_per_batch"].get<int>();
            if (t.contains("lambda_sparsity"))
                cfg.train.lambda_sparsity = t["lambda_sparsity"].get<float>();
            if (t.contains("seed")) cfg.train.seed = t["seed"].get<uint64_t>();
            if (t.contains("eval_every")) cfg.train.eval_every = t["eval_every"].get<int>();
            if (t.contains("pixel_jitter")) cfg.train.pixel_jitter = t["pixel_jitter"].get<bool>();
            if (t.contains("term_eps")) cfg.train.term_eps = t["term_eps"].get<float>();
            if (t.contains("lr")) {
                const auto& l = t["lr"];
                if (l.contains("base")) cfg.train.lr.base_lr = l["base"].get<float>();
                if (l.contains("warmup_iters")) cfg.train.lr.warmup_iters = l["warmup_iters"].get<int>();
                if (l.contains("decay_points"))
                    cfg.train.lr.decay_points = l["decay_points"].get<std::vector<int>>();
                if (l.contains("decay_factor")) cfg.train.lr.decay_factor = l["decay_factor"].get<float>();
            }
            if (t.contains("occupancy")) {
                const auto& o = t["occupancy"];
                auto& oc = cfg.train.occupancy;
                if (o.contains("resolution")) oc.resolution = o["resolution"].get<int>();
                if (o.contains("update_period")) oc.update_period = o["update_period"].get<int>();
                if (o.contains("decay")) oc.decay = o["decay"].get<float>();
                if (o.contains("threshold")) oc.threshold = o["threshold"].get<float>();
                if (o.contains("warmup_iters")) oc.warmup_iters = o["warmup_iters"].get<int>();
                if (o.contains("candidate_fraction"))
                    oc.candidate_fraction = o["candidate_fraction"].get<float>();
            }
        }
        if (j.contains("march_steps")) cfg.march_steps = j["march_steps"].get<int>();
        if (j.contains("mlp_fp16")) cfg.mlp_fp16 = j["mlp_fp16"].get<bool>();
        if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
        if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad run config value: ") + e.what());
    }
    cfg.train.march_step = cfg.march_step();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path.string());
    out << to_json_text();
}

data::Dataset build_dataset(const DatasetConfig& cfg, const std::string& split, float fine_step,
                            uint64_t seed) {
    if (cfg.type == DatasetType::blender)
        return data::load_blender(cfg.path, split, cfg.background, cfg.aabb_half);

    data::OracleScene scene = (cfg.path.empty() || cfg.path == "spheres")
                                  ? data::OracleScene::builtin_spheres()
                                  : data::OracleScene::from_json_file(cfg.path);
    scene.background = cfg.background;
    // one rig covers both splits; train views first, test views after
    const int total = cfg.train_views + cfg.test_views;
    const bool train_split = (split == "train");
    if (!train_split && split != "test")
        throw UsageError("oracle dataset has splits 'train' and 'test' (got '" + split + "')");
    const int begin = train_split ? 0 : cfg.train_views;
    const int end = train_split ? cfg.train_views : total;
    return data::generate_oracle(scene, total, cfg.resolution, seed, fine_step, begin, end);
}

}  // namespace birf::config
