#pragma once

#include <string>
#include <vector>

#include "tscf/pk.hpp"
#include "tscf/types.hpp"

namespace tscf {

/// RMS error over the ROI normalized by the truth range.
double nrmse(const std::vector<double>& estimate, const std::vector<double>& truth,
             const std::vector<std::size_t>& roi);

/// Mean SSIM over sliding 8x8 uniform windows; C1=(0.01 L)^2, C2=(0.03 L)^2
/// with L the truth dynamic range.
double mssim(const std::vector<double>& estimate, const std::vector<double>& truth, int height,
             int width, int window = 8);

/// Sample std of BAT over valid voxels.
double bat_dispersion(const BatResult& bat);

/// Rank-based concordance (Mann-Whitney AUC) of a scalar feature against
/// binary labels; ties count 0.5.
double c_statistic(const std::vector<double>& feature, const std::vector<int>& labels);

struct EvalReport {
    std::string method;
    double nrmse_ktrans = 0.0;
    double nrmse_ve = 0.0;
    double mssim_ktrans = 0.0;
    double mssim_ve = 0.0;
    double bat_std = 0.0;
    double bat_mean = 0.0;
    double sigma_g_hat = 0.0;
    double converged_fraction = 0.0;
    double runtime_denoise_s = 0.0;
    double runtime_fit_s = 0.0;
    double runtime_total_s = 0.0;
    std::string config_hash;
};

}  // namespace tscf
