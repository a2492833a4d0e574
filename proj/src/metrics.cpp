#include "rseed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rseed {

double psnr(const Tensor& a, const Tensor& b) {
    check_shape(a.shape == b.shape,
                "psnr dim mismatch: " + a.shape.str() + " vs " + b.shape.str());
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
    check_shape(a.shape == b.shape,
                "ssim dim mismatch: " + a.shape.str() + " vs " + b.shape.str());
    check_shape(a.shape.rank == 3, "ssim expects C×H×W images");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01; // (K1·L)²
    constexpr double c2 = 0.03 * 0.03; // (K2·L)²
    const int c = a.shape.d[0], h = a.shape.d[1], w = a.shape.d[2];
    if (h < win || w < win)
        throw Error("ssim needs at least " + std::to_string(win) + "×" + std::to_string(win) +
                    " pixels, got " + a.shape.str());

    double weight[win][win];
    double wsum = 0.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            const double dy = y - win / 2, dx = x - win / 2;
            weight[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            wsum += weight[y][x];
        }
    for (auto& row : weight)
        for (double& v : row) v /= wsum;

    double total = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        const float* pa = a.data.data() + static_cast<size_t>(ch) * h * w;
        const float* pb = b.data.data() + static_cast<size_t>(ch) * h * w;
        double acc = 0.0;
        for (int y = 0; y + win <= h; ++y) {
            for (int x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int wy = 0; wy < win; ++wy) {
                    for (int wx = 0; wx < win; ++wx) {
                        const double va = pa[static_cast<size_t>(y + wy) * w + (x + wx)];
                        const double vb = pb[static_cast<size_t>(y + wy) * w + (x + wx)];
                        const double wt = weight[wy][wx];
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        // parenthesized so swapping the images rounds identically
                        sab += wt * (va * vb);
                    }
                }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            }
        }
        total += acc / (static_cast<double>(h - win + 1) * (w - win + 1));
    }
    return total / c;
}

} // namespace rseed
