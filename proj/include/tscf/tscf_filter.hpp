#pragma once

#include <cstdint>
#include <vector>

#include "tscf/dct.hpp"
#include "tscf/types.hpp"

namespace tscf {

struct TscfConfig {
    double zeta_sim = 183.0;    // similarity threshold on spectral squared distance
    double tau_dist = 225.0;    // squared spatial-distance radius (px^2)
    int max_cluster = 32;       // M
    double tau_shrink = 1.0;    // scales the universal hard threshold
    int max_iters = 2;          // K
    double stop_rel_tol = 0.01; // relative change of residual std between iterations
    double sigma_v = 1.0;       // stabilized noise std

    void validate() const;

    /// Default similarity threshold for spectra of length n_time: c times the
    /// expected squared distance 2*N*sigma_v^2 between two pure-noise spectra.
    static double default_zeta_sim(int n_time, double sigma_v = 1.0, double c = 1.5) {
        return c * 2.0 * n_time * sigma_v * sigma_v;
    }
};

struct Cluster {
    std::size_t reference = 0;
    std::vector<std::size_t> members;    // ordered by (similarity, coordinate)
    std::vector<double> similarities;    // squared spectral distances, same order
    std::vector<double> spectral_rows;   // |members| x n_time, row-major
};

struct TscfDiagnostics {
    int iterations = 0;
    std::uint64_t degenerate_clusters = 0;  // all coefficients below threshold
    std::vector<double> residual_std;        // per completed iteration
};

/// Per-voxel temporal spectra for the whole volume (orthonormal DCT-II).
std::vector<double> temporal_spectra(const TimeSeriesVolume& volume, const DctPlan& plan,
                                     int threads = 1);

/// Forms the cluster for one reference voxel: candidates within sqrt(tau_dist)
/// (squared Euclidean coordinate distance), kept when the spectral squared
/// distance is <= zeta_sim, capped at max_cluster by smallest similarity with
/// lexicographic coordinate tie-breaks.
Cluster gather(const std::vector<double>& spectra, const std::vector<int>& dims, int n_time,
               const TscfConfig& cfg, std::size_t reference);

/// Collaborative shrinkage of one cluster: spatial DCT across members, hard
/// threshold, per-row empirical Wiener weights applied to the unthresholded
/// spectrum, inverse transforms. Returns member rows in the signal domain.
std::vector<double> attenuate(const Cluster& cluster, const TscfConfig& cfg,
                              const DctPlanSet& spatial_plans, const DctPlan& temporal_plan,
                              bool* degenerate = nullptr);

/// Unweighted per-voxel average of all cluster estimates, accumulated in
/// reference order.
TimeSeriesVolume reduce(const std::vector<Cluster>& clusters,
                        const std::vector<std::vector<double>>& estimates,
                        const TimeSeriesVolume& like);

/// Full gather / attenuate / reduce iteration loop on stabilized data.
TimeSeriesVolume tscf_denoise(const TimeSeriesVolume& volume, const TscfConfig& cfg,
                              int threads = 1, TscfDiagnostics* diag = nullptr);

/// Per-time-point spatial Gaussian smoothing baseline; sigma = fwhm/2.3548,
/// reflected boundaries, kernel truncated at 4 sigma and renormalized.
TimeSeriesVolume gaussian_smooth(const TimeSeriesVolume& volume, double fwhm_px, int threads = 1);

}  // namespace tscf
