#pragma once

#include <cstdint>
#include <vector>

#include "tscf/types.hpp"

namespace tscf {

struct FitConfig {
    double ktrans_min = 1e-4;    // min^-1
    double ktrans_max = 2.0;
    double ve_min = 1e-3;
    double ve_max = 1.0;
    int n_starts = 4;
    int max_lbfgs_iters = 200;
    double grad_tol = 1e-9;
    double cost_tol = 1e-14;
    int history_size = 6;

    void validate() const;
};

struct BatConfig {
    int smooth_window = 3;          // odd moving-average width
    double gradient_fraction = 0.1; // trace-back threshold as fraction of max ascent
    double rise_sigma = 3.0;        // validity: rise > rise_sigma * noise
    double slope_sigma = 4.0;       // validity: max ascent > slope_sigma * diff noise
};

struct BatResult {
    std::vector<int> per_voxel_bat;  // full-size map, -1 invalid or off-roi
    double roi_mean_bat = 0.0;       // mean over valid voxels, real-valued scans
    double valid_fraction = 0.0;
    std::size_t n_valid = 0;
};

/// Gradient-based bolus-arrival estimation on intensity data.
BatResult estimate_bat(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                       const BatConfig& cfg = {});

/// Eqs. mapping intensity back to concentration; pre-contrast scans [0, bat)
/// define the baseline and are set to 0. Values whose log argument is
/// non-positive clamp to 0 concentration (diag_clamped counts them).
TimeSeriesVolume intensity_to_concentration(const TimeSeriesVolume& volume,
                                            const AcquisitionParams& acq, double t10_ms, int bat,
                                            std::uint64_t* diag_clamped = nullptr);

/// Series variant used for AIF conversion.
std::vector<double> series_to_concentration(const std::vector<double>& y,
                                            const AcquisitionParams& acq, double t10_ms, int bat,
                                            std::uint64_t* diag_clamped = nullptr);

/// Tofts forward model with piecewise-linear AIF: one exponential-decay
/// recursion per scan. Exact for an AIF that is linear between samples.
void horsfield_forward(const std::vector<double>& cp, double ktrans, double ve, double dt_s,
                       std::vector<double>& ct_out);

/// Forward model plus sensitivities d ct / d ktrans and d ct / d ve.
void horsfield_forward_grad(const std::vector<double>& cp, double ktrans, double ve, double dt_s,
                            std::vector<double>& ct_out, std::vector<double>& dk_out,
                            std::vector<double>& dv_out);

/// Cost 0.5*SSE and its analytic gradient wrt (ktrans, ve).
double fit_cost_grad(const std::vector<double>& ct_data, const std::vector<double>& cp, double dt_s,
                     double ktrans, double ve, double* dcost_dktrans, double* dcost_dve);

struct VoxelFit {
    double ktrans = 0.0;
    double ve = 0.0;
    double residual = 0.0;
    bool converged = false;
};

/// Bounded 2-parameter fit: L-BFGS in a smooth reparameterization
/// (log-scaled logit for ktrans, logit for ve), best of n_starts
/// deterministic random initializations.
VoxelFit fit_voxel(const std::vector<double>& ct_data, const std::vector<double>& cp, double dt_s,
                   const FitConfig& cfg, std::uint64_t seed = 0);

/// Shifts the AIF by round(upsample_factor * mean_bat) fine samples and
/// decimates to the tissue grid by taking each block-start sample.
std::vector<double> align_aif(const AifSeries& aif, double roi_mean_bat, int n_time);

struct FitVolumeDiagnostics {
    BatResult bat;
    std::uint64_t conc_clamped = 0;
    std::uint64_t aif_clamped = 0;
    std::size_t n_fitted = 0;
    std::size_t n_converged = 0;
};

/// Full concentration-based estimation: BAT -> AIF alignment -> conversion ->
/// per-voxel bounded fits over the ROI.
ParamMap fit_volume(const TimeSeriesVolume& volume, const AifSeries& aif,
                    const AcquisitionParams& acq, const std::vector<std::size_t>& roi,
                    const FitConfig& cfg, const BatConfig& bat_cfg = {}, std::uint64_t seed = 0,
                    int threads = 1, FitVolumeDiagnostics* diag = nullptr);

}  // namespace tscf
