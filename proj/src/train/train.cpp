#include "birf/train/train.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace birf::train {

double recon_loss(std::span<const Rgb> pred, std::span<const Rgb> target) {
    if (pred.size() != target.size()) throw ConfigError("recon_loss: ray count mismatch");
    if (pred.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Rgb d = pred[i] - target[i];
        acc += static_cast<double>(d.r) * d.r + static_cast<double>(d.g) * d.g +
               static_cast<double>(d.b) * d.b;
    }
    return acc / static_cast<double>(pred.size());
}

double sparsity_loss(std::span<const float> sigma) {
    if (sigma.empty()) return 0.0;
    double acc = 0.0;
    for (float s : sigma) acc += std::log1p(2.0 * static_cast<double>(s) * s);
    return acc / static_cast<double>(sigma.size());
}

std::string LogRow::to_json() const {
    std::ostringstream os;
    os << "{\"iter\":" << iter
       << ",\"loss_recon\":" << loss_recon
       << ",\"loss_sparsity\":" << loss_sparsity
       << ",\"lr\":" << lr;
    if (psnr_eval) os << ",\"psnr_eval\":" << *psnr_eval;
    os << ",\"occ_fraction\":" << occ_fraction
       << ",\"wall_ms\":" << wall_ms << "}";
    return os.str();
}

metrics::MetricReport evaluate_model(const field::FieldModel& model, const data::Dataset& ds,
                                     const sampler::OccupancyConfig& occ_cfg, float march_step,
                                     float term_eps, int threads,
                                     std::vector<render::Image>* out_images) {
    sampler::OccupancyGrid occ(occ_cfg);
    {
        field::FieldPipeline pipeline(model);
        occ.rebuild(pipeline.density_fn());
    }
    render::RenderOptions opts;
    opts.step = march_step;
    opts.background = ds.background;
    opts.term_eps = term_eps;
    opts.threads = threads;

    const render::FieldFnFactory factory = [&model] {
        auto p = std::make_shared<field::FieldPipeline>(model);
        return field::FieldFn(
            [p](std::span<const Vec3> pos, std::span<const Vec3> dir, std::span<float> sigma,
                std::span<Rgb> rgb) { p->forward(pos, dir, sigma, rgb); });
    };

    metrics::MetricReport report;
    for (std::size_t v = 0; v < ds.size(); ++v) {
        render::Image img = render::render_image(ds.cameras[v], ds.transform, factory, occ, opts);
        report.psnr_db.push_back(metrics::psnr(img, ds.images[v]));
        report.ssim.push_back(metrics::ssim(img, ds.images[v]));
        if (out_images) out_images->push_back(std::move(img));
    }
    return report;
}

Trainer::Trainer(field::FieldModel& model, const data::Dataset& train_data,
                 const data::Dataset* eval_data, TrainConfig config)
    : model_(&model),
      train_data_(&train_data),
      eval_data_(eval_data),
      config_(config),
      rng_(config.seed),
      pipeline_(model),
      occ_(config.occupancy) {
    if (train_data_->size() == 0) throw ConfigError("trainer: empty training dataset");
    adam_states_.push_back(nn::AdamState::for_params(model_->density_mlp().params().size()));
    adam_states_.push_back(nn::AdamState::for_params(model_->color_mlp().params().size()));
    for (auto* t : model_->grid().all_tensors())
        adam_states_.push_back(nn::AdamState::for_params(t->size()));
}

void Trainer::adam_all(float lr) {
    nn::adam_step(model_->density_mlp().params(), adam_states_[0], lr);
    nn::adam_step(model_->color_mlp().params(), adam_states_[1], lr);
    std::size_t k = 2;
    for (auto* t : model_->grid().all_tensors())
        nn::adam_step(t->name, t->latent, t->grads, adam_states_[k++], lr);
}

StepStats Trainer::step(int iter) {
    if (iter % config_.occupancy.update_period == 0)
        occ_.update(pipeline_.density_fn(), iter, rng_.occupancy);

    const int n_rays = config_.rays_per_batch;
    const auto& ds = *train_data_;
    std::uniform_int_distribution<std::size_t> pick_view(0, ds.size() - 1);
    std::uniform_real_distribution<float> jit(-0.5f, 0.5f);

    pos_.clear();
    dirs_.clear();
    delta_.clear();
    samples_.clear();
    ray_offset_.assign(1, 0);
    std::vector<Rgb> targets(n_rays);

    for (int r = 0; r < n_rays; ++r) {
        const std::size_t v = pick_view(rng_.batch);
        const auto& cam = ds.cameras[v];
        std::uniform_int_distribution<int> px(0, cam.width - 1), py(0, cam.height - 1);
        const int i = px(rng_.batch), j = py(rng_.batch);
        const float jx = config_.pixel_jitter ? jit(rng_.jitter) : 0.f;
        const float jy = config_.pixel_jitter ? jit(rng_.jitter) : 0.f;
        targets[r] = ds.images[v].pixel(i, j);

        const render::Ray ray = ds.transform.to_unit(render::generate_ray(cam, i, j, jx, jy));
        const std::size_t before = samples_.size();
        sampler::march_ray(occ_, ray.origin, ray.dir, config_.march_step, 0.f, 1e9f, 0.f, samples_);
        for (std::size_t s = before; s < samples_.size(); ++s) {
            pos_.push_back(ray.origin + ray.dir * samples_[s].t_mid());
            dirs_.push_back(ray.dir);
            delta_.push_back(samples_[s].delta());
        }
        ray_offset_.push_back(samples_.size());
    }

    const std::size_t n_samples = samples_.size();
    sigma_.resize(n_samples);
    rgb_.resize(n_samples);
    pipeline_.forward(pos_, dirs_, sigma_, rgb_);

    // composite every ray, collect predictions and recon gradient
    std::vector<Rgb> preds(n_rays);
    std::vector<render::CompositeResult> comps(n_rays);
    for (int r = 0; r < n_rays; ++r) {
        const std::size_t o = ray_offset_[r], e = ray_offset_[r + 1];
        comps[r] = render::composite(std::span(sigma_).subspan(o, e - o),
                                     std::span(rgb_).subspan(o, e - o),
                                     std::span(delta_).subspan(o, e - o), ds.background,
                                     config_.term_eps);
        preds[r] = comps[r].color;
    }

    StepStats stats;
    stats.n_samples = n_samples;
    stats.loss_recon = recon_loss(preds, targets);
    stats.loss_sparsity = sparsity_loss(sigma_);
    // Both terms share the per-ray normalizer, so lambda weighs sparsity
    // against reconstruction exactly as in the sum-form objective while the
    // total stays batch-size independent.
    stats.loss_total = stats.loss_recon + config_.lambda_sparsity * stats.loss_sparsity *
                                              static_cast<double>(n_samples) / n_rays;
    if (!std::isfinite(stats.loss_total))
        throw Error("non-finite loss at iter " + std::to_string(iter) +
                    " (lr " + std::to_string(lr_at(config_.lr, iter)) +
                    ", rays " + std::to_string(n_rays) +
                    ", samples " + std::to_string(n_samples) + ")");

    dsigma_.assign(n_samples, 0.f);
    drgb_.assign(n_samples, Rgb{});
    for (int r = 0; r < n_rays; ++r) {
        const std::size_t o = ray_offset_[r], e = ray_offset_[r + 1];
        const Rgb diff = preds[r] - targets[r];
        const float s = 2.f / static_cast<float>(n_rays);
        const Rgb dC{diff.r * s, diff.g * s, diff.b * s};
        render::composite_backward(std::span(sigma_).subspan(o, e - o),
                                   std::span(rgb_).subspan(o, e - o),
                                   std::span(delta_).subspan(o, e - o), ds.background, comps[r], dC,
                                   std::span(dsigma_).subspan(o, e - o),
                                   std::span(drgb_).subspan(o, e - o));
    }
    if (config_.lambda_sparsity > 0.f && n_samples > 0) {
        const float scale = config_.lambda_sparsity / static_cast<float>(n_rays);
        for (std::size_t s = 0; s < n_samples; ++s) {
            const float sg = sigma_[s];
            dsigma_[s] += scale * 4.f * sg / (1.f + 2.f * sg * sg);
        }
    }

    pipeline_.backward(pos_, dirs_, dsigma_, drgb_);
    adam_all(lr_at(config_.lr, iter));
    return stats;
}

double Trainer::eval_psnr_live() {
    if (!eval_data_ || eval_data_->size() == 0) return 0.0;
    render::RenderOptions opts;
    opts.step = config_.march_step;
    opts.background = eval_data_->background;
    opts.term_eps = config_.term_eps;

    field::FieldPipeline pipeline(*model_);
    const field::FieldFn fn = pipeline.field_fn();
    double acc = 0.0;
    for (std::size_t v = 0; v < eval_data_->size(); ++v) {
        const render::Image img =
            render::render_image(eval_data_->cameras[v], eval_data_->transform, fn, occ_, opts);
        acc += metrics::psnr(img, eval_data_->images[v]);
    }
    return acc / static_cast<double>(eval_data_->size());
}

void Trainer::run(std::ostream* log, int print_every) {
    rows_.reserve(config_.iterations);
    const double t0 = now_ms();
    for (int iter = 0; iter < config_.iterations; ++iter) {
        const StepStats s = step(iter);
        LogRow row;
        row.iter = iter;
        row.loss_recon = s.loss_recon;
        row.loss_sparsity = s.loss_sparsity;
        row.lr = lr_at(config_.lr, iter);
        row.occ_fraction = occ_.occupied_fraction();
        row.wall_ms = now_ms() - t0;
        if (config_.eval_every > 0 && (iter + 1) % config_.eval_every == 0 &&
            iter + 1 < config_.iterations)
            row.psnr_eval = eval_psnr_live();
        rows_.push_back(row);
        if (log) *log << row.to_json() << "\n";
        if (print_every > 0 && (iter % print_every == 0 || iter + 1 == config_.iterations)) {
            std::cout << row.to_json() << std::endl;
        }
    }
}

}  // namespace birf::train
