#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "birf/render/render.hpp"

namespace birf::metrics {

// -10 log10(MSE) over all pixels/channels, capped at 100 dB for identical images.
double psnr(const render::Image& pred, const render::Image& target);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, computed per channel over valid window positions and
// averaged across channels.
double ssim(const render::Image& pred, const render::Image& target);

struct MetricReport {
    std::vector<double> psnr_db;
    std::vector<double> ssim;

    double mean_psnr() const;
    double mean_ssim() const;
    std::string to_text() const;  // per-image rows + mean
    void write(const std::filesystem::path& path) const;
};

}  // namespace birf::metrics
