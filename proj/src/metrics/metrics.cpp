#include "birf/metrics/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace birf::metrics {

double psnr(const render::Image& pred, const render::Image& target) {
    if (pred.width != target.width || pred.height != target.height)
        throw ConfigError("psnr: image dimensions differ");
    double se = 0.0;
    for (std::size_t i = 0; i < pred.rgb.size(); ++i) {
        const double d = static_cast<double>(pred.rgb[i]) - target.rgb[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(pred.rgb.size());
    if (mse <= 1e-10) return 100.0;
    return std::min(100.0, -10.0 * std::log10(mse));
}

namespace {

constexpr int kWin = 11;

std::array<double, kWin> gaussian_window() {
    std::array<double, kWin> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Separable Gaussian blur, valid region only: output is (w-10) x (h-10).
std::vector<double> blur_valid(const std::vector<double>& src, int w, int h, int& ow, int& oh) {
    const auto g = gaussian_window();
    ow = w - kWin + 1;
    oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < ow; ++i) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * src[static_cast<std::size_t>(j) * w + i + k];
            tmp[static_cast<std::size_t>(j) * ow + i] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int j = 0; j < oh; ++j)
        for (int i = 0; i < ow; ++i) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * tmp[static_cast<std::size_t>(j + k) * ow + i];
            out[static_cast<std::size_t>(j) * ow + i] = acc;
        }
    return out;
}

}  // namespace

double ssim(const render::Image& pred, const render::Image& target) {
    if (pred.width != target.width || pred.height != target.height)
        throw ConfigError("ssim: image dimensions differ");
    if (pred.width < kWin || pred.height < kWin)
        throw ConfigError("ssim: image smaller than the 11x11 window");

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int w = pred.width, h = pred.height;
    const std::size_t npix = static_cast<std::size_t>(w) * h;

    double total = 0.0;
    std::vector<double> x(npix), y(npix), xx(npix), yy(npix), xy(npix);
    for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t p = 0; p < npix; ++p) {
            x[p] = pred.rgb[p * 3 + ch];
            y[p] = target.rgb[p * 3 + ch];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        int ow, oh;
        const auto mx = blur_valid(x, w, h, ow, oh);
        const auto my = blur_valid(y, w, h, ow, oh);
        const auto mxx = blur_valid(xx, w, h, ow, oh);
        const auto myy = blur_valid(yy, w, h, ow, oh);
        const auto mxy = blur_valid(xy, w, h, ow, oh);
        double acc = 0.0;
        for (std::size_t p = 0; p < mx.size(); ++p) {
            const double vx = mxx[p] - mx[p] * mx[p];
            const double vy = myy[p] - my[p] * my[p];
            const double cxy = mxy[p] - mx[p] * my[p];
            const double num = (2.0 * mx[p] * my[p] + c1) * (2.0 * cxy + c2);
            const double den = (mx[p] * mx[p] + my[p] * my[p] + c1) * (vx + vy + c2);
            acc += num / den;
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / 3.0;
}

double MetricReport::mean_psnr() const {
    double s = 0.0;
    for (double v : psnr_db) s += v;
    return psnr_db.empty() ? 0.0 : s / static_cast<double>(psnr_db.size());
}

double MetricReport::mean_ssim() const {
    double s = 0.0;
    for (double v : ssim) s += v;
    return ssim.empty() ? 0.0 : s / static_cast<double>(ssim.size());
}

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    for (std::size_t i = 0; i < psnr_db.size(); ++i)
        os << "view " << i << "  psnr_db " << psnr_db[i] << "  ssim " << ssim[i] << "\n";
    os << "mean  psnr_db " << mean_psnr() << "  ssim " << mean_ssim() << "\n";
    return os.str();
}

void MetricReport::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metric report: " + path.string());
    out << to_text();
}

}  // namespace birf::metrics
