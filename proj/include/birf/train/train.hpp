#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "birf/data/data.hpp"
#include "birf/field/field.hpp"
#include "birf/metrics/metrics.hpp"
#include "birf/nn/nn.hpp"
#include "birf/render/render.hpp"
#include "birf/sampler/sampler.hpp"

namespace birf::train {

struct TrainConfig {
    int iterations = 20000;
    int rays_per_batch = 4096;
    float lambda_sparsity = 2e-5f;
    nn::LrSchedule lr;
    uint64_t seed = 0;
    sampler::OccupancyConfig occupancy;
    int eval_every = 1000;
    float march_step = sampler::default_march_step();
    bool pixel_jitter = true;
    float term_eps = 1e-4f;
};

// Mean over rays of the squared L2 color error.
double recon_loss(std::span<const Rgb> pred, std::span<const Rgb> target);
// Mean over samples of log(1 + 2 sigma^2).
double sparsity_loss(std::span<const float> sigma);

struct StepStats {
    double loss_recon = 0.0;
    double loss_sparsity = 0.0;
    double loss_total = 0.0;
    std::size_t n_samples = 0;
};

struct LogRow {
    int iter = 0;
    double loss_recon = 0.0;
    double loss_sparsity = 0.0;
    float lr = 0.f;
    std::optional<double> psnr_eval;
    float occ_fraction = 0.f;
    double wall_ms = 0.0;

    std::string to_json() const;
};

// Renders every view of a dataset from an occupancy grid rebuilt
// deterministically from the model; the same path serves the CLI eval
// command and the end-of-training report.
metrics::MetricReport evaluate_model(const field::FieldModel& model, const data::Dataset& ds,
                                     const sampler::OccupancyConfig& occ_cfg, float march_step,
                                     float term_eps, int threads = 1,
                                     std::vector<render::Image>* out_images = nullptr);

class Trainer {
public:
    Trainer(field::FieldModel& model, const data::Dataset& train_data,
            const data::Dataset* eval_data, TrainConfig config);

    StepStats step(int iter);
    // Runs config.iterations steps, logging one JSON line per iteration to
    // `log` (when given) and echoing to stdout every `print_every` iters.
    void run(std::ostream* log, int print_every = 100);

    double eval_psnr_live();  // held-out PSNR with the current occupancy
    const sampler::OccupancyGrid& occupancy() const { return occ_; }
    sampler::OccupancyGrid& occupancy() { return occ_; }
    const std::vector<LogRow>& log_rows() const { return rows_; }
    const TrainConfig& config() const { return config_; }

private:
    void adam_all(float lr);

    field::FieldModel* model_;
    const data::Dataset* train_data_;
    const data::Dataset* eval_data_;
    TrainConfig config_;
    RngStreams rng_;
    field::FieldPipeline pipeline_;
    sampler::OccupancyGrid occ_;
    std::vector<nn::AdamState> adam_states_;
    std::vector<LogRow> rows_;

    // per-step scratch (CSR over rays)
    std::vector<Vec3> pos_, dirs_;
    std::vector<float> sigma_, delta_, dsigma_;
    std::vector<Rgb> rgb_, drgb_;
    std::vector<std::size_t> ray_offset_;
    std::vector<sampler::RaySample> samples_;
};

}  // namespace birf::train
