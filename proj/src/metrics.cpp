#include "tscf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tscf {

double nrmse(const std::vector<double>& estimate, const std::vector<double>& truth,
             const std::vector<std::size_t>& roi) {
    if (estimate.size() != truth.size()) throw ArgumentError("nrmse: map size mismatch");
    if (roi.empty()) throw ArgumentError("nrmse: empty ROI");
    double lo = truth[roi.front()], hi = lo;
    double sse = 0.0;
    for (std::size_t v : roi) {
        lo = std::min(lo, truth[v]);
        hi = std::max(hi, truth[v]);
        double d = estimate[v] - truth[v];
        sse += d * d;
    }
    if (!(hi > lo)) throw ArgumentError("nrmse: truth is constant on the ROI");
    return std::sqrt(sse / static_cast<double>(roi.size())) / (hi - lo);
}

double mssim(const std::vector<double>& estimate, const std::vector<double>& truth, int height,
             int width, int window) {
    if (estimate.size() != truth.size() ||
        estimate.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
        throw ArgumentError("mssim: map size mismatch");
    if (height < window || width < window)
        throw ArgumentError("mssim: maps must be at least window x window");

    double range_lo = truth[0], range_hi = truth[0];
    for (double v : truth) {
        range_lo = std::min(range_lo, v);
        range_hi = std::max(range_hi, v);
    }
    double L = range_hi - range_lo;
    double c1 = (0.01 * L) * (0.01 * L);
    double c2 = (0.03 * L) * (0.03 * L);

    const double inv_n = 1.0 / (window * window);
    double acc = 0.0;
    std::size_t n_win = 0;
    for (int i = 0; i + window <= height; ++i) {
        for (int j = 0; j + window <= width; ++j) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int a = 0; a < window; ++a) {
                const double* ex = estimate.data() + static_cast<std::size_t>(i + a) * width + j;
                const double* tx = truth.data() + static_cast<std::size_t>(i + a) * width + j;
                for (int b = 0; b < window; ++b) {
                    double x = ex[b], y = tx[b];
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            double mx = sx * inv_n, my = sy * inv_n;
            double vx = sxx * inv_n - mx * mx;
            double vy = syy * inv_n - my * my;
            double cxy = sxy * inv_n - mx * my;
            double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            acc += num / den;
            ++n_win;
        }
    }
    return acc / static_cast<double>(n_win);
}

double bat_dispersion(const BatResult& bat) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int b : bat.per_voxel_bat)
        if (b >= 0) {
            sum += b;
            ++n;
        }
    if (n < 2) throw ArgumentError("bat_dispersion needs >= 2 valid voxels");
    double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (int b : bat.per_voxel_bat)
        if (b >= 0) {
            double d = b - mean;
            ss += d * d;
        }
    return std::sqrt(ss / static_cast<double>(n - 1));
}

double c_statistic(const std::vector<double>& feature, const std::vector<int>& labels) {
    if (feature.size() != labels.size()) throw ArgumentError("c_statistic: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw ArgumentError("c_statistic needs both classes");

    double concordant = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < feature.size(); ++j) {
            if (labels[j]) continue;
            if (feature[i] > feature[j]) concordant += 1.0;
            else if (feature[i] == feature[j]) concordant += 0.5;
        }
    }
    return concordant / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace tscf
