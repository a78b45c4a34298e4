#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "birf/grid/grid.hpp"
#include "birf/field/field.hpp"
#include "birf/train/train.hpp"

namespace birf::config {

enum class DatasetType { oracle, blender };

struct DatasetConfig {
    DatasetType type = DatasetType::oracle;
    std::string path;  // blender dir, or oracle scene json ("spheres" = builtin)
    int train_views = 20;
    int test_views = 5;
    int resolution = 64;
    float aabb_half = 1.5f;
    Rgb background{1.f, 1.f, 1.f};
};

struct GridParams {
    int levels_3d = 16;
    int n3_min = 16;
    int n3_max = 1024;
    int log2_t3 = 19;
    int levels_2d = 4;
    int n2_min = 64;
    int n2_max = 512;
    int log2_t2 = 17;
    int feature_dim = 2;

    grid::GridConfig build() const;
};

// Everything one run needs; serializes to/from a single JSON document. The
// effective config is echoed into the output directory so render/eval reuse
// the exact training-time parameters.
struct RunConfig {
    DatasetConfig dataset;
    GridParams grid;
    field::FieldConfig field;
    train::TrainConfig train;
    int march_steps = 1024;  // march step = sqrt(3) / march_steps
    bool mlp_fp16 = false;
    int threads = 1;
    std::string out_dir = "run";

    float march_step() const { return std::sqrt(3.f) / static_cast<float>(march_steps); }

    // Desk-scale defaults applied when the dataset is the built-in oracle:
    // smaller grid/tables, shorter schedule, coarser marching.
    void apply_oracle_desk_defaults();

    std::string to_json_text() const;
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

data::Dataset build_dataset(const DatasetConfig& cfg, const std::string& split, float fine_step,
                            uint64_t seed);

}  // namespace birf::config
