#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tscf {

// Error taxonomy, mapped to distinct CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ArgumentError : public Error { public: using Error::Error; };     // bad call / bad config / bad spec
class FormatError : public Error { public: using Error::Error; };      // malformed or truncated container
class DataError : public Error { public: using Error::Error; };        // non-finite or out-of-domain values
class ConvergenceError : public Error { public: using Error::Error; }; // iteration did not converge
class IoError : public Error { public: using Error::Error; };

enum class ValueKind { intensity, concentration, stabilized, parameter };

const char* to_string(ValueKind k);
ValueKind value_kind_from_string(const std::string& s);

/// 4-D raster: 2-D or 3-D space x time, row-major with the time axis minor,
/// so each voxel's time series is contiguous.
struct TimeSeriesVolume {
    std::vector<int> dims;      // spatial extents, slowest first
    int n_time = 0;
    double dt_seconds = 0.0;
    ValueKind value_kind = ValueKind::intensity;
    std::vector<float> data;    // size = n_voxels() * n_time

    std::size_t n_voxels() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
    std::size_t size() const { return n_voxels() * static_cast<std::size_t>(n_time); }

    float* series(std::size_t voxel) { return data.data() + voxel * static_cast<std::size_t>(n_time); }
    const float* series(std::size_t voxel) const { return data.data() + voxel * static_cast<std::size_t>(n_time); }

    float& at(std::size_t voxel, int t) { return data[voxel * static_cast<std::size_t>(n_time) + t]; }
    float at(std::size_t voxel, int t) const { return data[voxel * static_cast<std::size_t>(n_time) + t]; }

    /// Throws unless dims/dt/data satisfy the type invariants.
    void validate() const;
};

TimeSeriesVolume make_volume(std::vector<int> dims, int n_time, double dt_seconds, ValueKind kind,
                             float fill = 0.0f);

enum class AifKind { blood_intensity, blood_concentration, plasma_concentration };

const char* to_string(AifKind k);
AifKind aif_kind_from_string(const std::string& s);

/// Sampled arterial input curve on its own time grid.
struct AifSeries {
    std::vector<double> times;   // seconds, strictly increasing
    std::vector<double> values;
    AifKind kind = AifKind::plasma_concentration;
    int upsample_factor = 1;     // resolution relative to the tissue grid

    void validate() const;
};

/// MR acquisition constants used by the SPGR and conversion equations.
struct AcquisitionParams {
    double tr_ms = 5.0;
    double flip_angle_deg = 30.0;
    double t10_tissue_ms = 1000.0;
    double t10_blood_ms = 1440.0;
    double r1 = 0.0045;          // mmol^-1 ms^-1
    double hct = 0.45;

    // A = exp(-TR/T10), B = A cos(theta), D = -TR*r1
    double A(double t10_ms) const;
    double B(double t10_ms) const;
    double D() const { return -tr_ms * r1; }
    double sin_flip() const;
    double cos_flip() const;

    void validate() const;
};

/// Per-voxel pharmacokinetic estimates plus fit diagnostics.
struct ParamMap {
    std::vector<int> dims;
    std::vector<double> ktrans;      // min^-1
    std::vector<double> ve;          // fraction
    std::vector<double> kep;         // min^-1, ktrans/ve
    std::vector<double> residual;    // final cost, 0.5*SSE
    std::vector<std::uint8_t> converged;
    std::vector<int> bat_index;      // per-voxel BAT scan index, -1 if invalid
    double roi_mean_bat = 0.0;

    std::size_t n_voxels() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
    void validate() const;
};

enum class NoiseMethod { fixed_point, vst_iterative };

/// Estimated Rician noise model.
struct RicianStats {
    double sigma_g = 0.0;   // Gaussian channel noise std
    double snr = 0.0;       // theta = y / sigma_g
    double y_hat = 0.0;     // estimated true signal
    NoiseMethod method = NoiseMethod::fixed_point;
    int iterations = 0;
};

}  // namespace tscf
