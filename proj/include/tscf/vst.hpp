#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tscf/types.hpp"

namespace tscf {

/// Variance stabilizer for Rician data, tabulated on an SNR knot grid.
/// f is built on the Rician mean axis with df/dm = 1/sqrt(xi(theta(m))), so
/// stabilized noise has (approximately) unit variance; the unbiased inverse
/// inverts the tabulated forward expectation E[f(z) | y].
struct Stabilizer {
    double sigma_g = 0.0;
    std::vector<double> theta;   // knots on [0, theta_max]
    std::vector<double> m;       // Rician mean at knots, sigma_g units
    std::vector<double> s;       // Rician std at knots, sigma_g units
    std::vector<double> f;       // stabilizer values at knots
    std::vector<double> efz;     // E[f(z) | y = theta*sigma_g]

    double forward(double z) const;
    /// Raw algebraic inverse of f (exact round trip with forward()).
    double inverse_algebraic(double fval) const;
    /// Unbiased inverse: solves E[f(z)|y] = d for y. out_of_range is set when
    /// d falls below E[f(z)|0] and the result was clamped to 0.
    double inverse_unbiased(double d, bool* out_of_range = nullptr) const;
};

Stabilizer build_stabilizer(double sigma_g, int n_knots = 1024, double theta_max = 60.0);

TimeSeriesVolume apply_vst(const TimeSeriesVolume& volume, const Stabilizer& stab);

/// diag_clamped, when given, receives the count of values below the invertible
/// range that were clamped to zero signal.
TimeSeriesVolume apply_ivst(const TimeSeriesVolume& volume, const Stabilizer& stab,
                            std::uint64_t* diag_clamped = nullptr);

/// Iterative noise estimate: rebuild the stabilizer until the robust std of
/// stabilized temporal-difference residuals over the ROI reaches 1.
RicianStats estimate_sigma_vst(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                               double initial_sigma);

}  // namespace tscf
