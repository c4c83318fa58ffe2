#pragma once

#include <cstdint>
#include <vector>

#include "tscf/types.hpp"

namespace tscf {

/// Plasma AIF model. The biexponential bolus is zero before onset_s, rises
/// linearly to its peak over rise_s, then decays as
/// a1*exp(-m1*t') + a2*exp(-m2*t') with t' in minutes past the rise.
struct AifModel {
    enum class Kind { biexponential, tabulated };
    Kind kind = Kind::biexponential;
    double a1 = 5.0;      // mM
    double m1 = 0.30;     // min^-1
    double a2 = 2.0;      // mM
    double m2 = 0.012;    // min^-1
    double onset_s = 60.0;
    double rise_s = 6.0;
    // tabulated form: piecewise-linear through (times, values), zero outside
    std::vector<double> tab_times_s;
    std::vector<double> tab_values;

    double plasma(double t_s) const;
    void validate() const;
};

/// DRO-style phantom layout: ktrans varies along y, ve along x, one
/// block_px x block_px tile per combination, AIF ROI rows at the bottom.
struct DroSpec {
    std::vector<double> ktrans_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.35};
    std::vector<double> ve_grid = {0.01, 0.05, 0.1, 0.2, 0.5};
    int block_px = 10;
    int aif_rows = 10;
    double s0 = 500.0;
    double duration_s = 360.0;
    double dt_s = 6.0;
    double injection_time_s = 60.0;
    double sigma_g = 5.0;
    int aif_upsample = 10;

    int n_time() const { return static_cast<int>(duration_s / dt_s) + 1; }
    int tissue_rows() const { return static_cast<int>(ktrans_grid.size()) * block_px; }
    int width() const { return static_cast<int>(ve_grid.size()) * block_px; }
    int height() const { return tissue_rows() + aif_rows; }

    void validate() const;
};

/// Steady-state SPGR intensity for tissue concentration ct (Eqs. with
/// A = exp(-TR/T10), B = A cos(theta), D = -TR*r1).
double spgr_signal(double y0, double ct, const AcquisitionParams& acq, double t10_ms);

/// Tissue concentration by direct quadrature of the Tofts convolution on a
/// fine grid (step <= max_step_s). Independent reference for the Horsfield
/// recursion.
std::vector<double> tofts_concentration_oracle(const AifModel& aif, double ktrans, double ve,
                                               const std::vector<double>& times_s,
                                               double max_step_s = 0.1);

/// Rician-corrupts every sample: z = sqrt((y+n_r)^2 + n_i^2). Each sample
/// draws from its own (seed, flat index) stream, so the result does not
/// depend on traversal order or thread count.
TimeSeriesVolume add_rician_noise(const TimeSeriesVolume& volume, double sigma_g,
                                  std::uint64_t seed, int threads = 1);

struct DroOutput {
    TimeSeriesVolume noiseless;
    TimeSeriesVolume noisy;
    ParamMap truth;
    AifSeries aif_series;    // plasma on the fine grid, bolus at its origin
};

DroOutput generate_dro(const DroSpec& spec, const AifModel& aif, const AcquisitionParams& acq,
                       std::uint64_t seed, int threads = 1);

}  // namespace tscf
