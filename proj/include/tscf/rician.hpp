#pragma once

#include <cstddef>
#include <vector>

#include "tscf/types.hpp"

namespace tscf {

/// Modified Bessel function of the first kind, order 0 or 1.
double bessel_i(int order, double x);

/// Exponentially scaled variants exp(-x) * I_n(x); safe for large x.
double bessel_i0e(double x);
double bessel_i1e(double x);

/// Rician variance correction factor xi(theta) = Var[z] / sigma_g^2.
double correction_factor(double theta);
double correction_factor_deriv(double theta);

/// Rician first moment in sigma_g units: m(theta) = E[z] / sigma_g.
double rician_mean(double theta);
double rician_mean_deriv(double theta);

/// mu_m/sigma_m must exceed this for the fixed point to have a unique root.
double snr_ratio_threshold();

/// Solves theta = sqrt(xi(theta) (1 + mu^2/sigma^2) - 2) by Newton's method.
/// use_analytic_deriv=false switches to a central finite difference.
RicianStats fixed_point_snr(double mu_m, double sigma_m, bool use_analytic_deriv = true);

/// Inverts the Rician mean: returns y >= 0 with E[z | y, sigma_g] = mu_m.
/// mu_m below the Rayleigh mean maps to 0.
double debias_magnitude(double mu_m, double sigma_g);

/// Dual strategy: fixed point on pooled pre-contrast ROI samples when the ROI
/// is homogeneous and the ratio is in the valid range, otherwise the
/// VST-based iterative estimator.
RicianStats estimate_noise_dual(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                                int pre_lo, int pre_hi, bool homogeneous);

}  // namespace tscf
