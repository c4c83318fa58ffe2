#include "tscf/types.hpp"

#include <cmath>

namespace tscf {

const char* to_string(ValueKind k) {
    switch (k) {
        case ValueKind::intensity: return "intensity";
        case ValueKind::concentration: return "concentration";
        case ValueKind::stabilized: return "stabilized";
        case ValueKind::parameter: return "parameter";
    }
    return "intensity";
}

ValueKind value_kind_from_string(const std::string& s) {
    if (s == "intensity") return ValueKind::intensity;
    if (s == "concentration") return ValueKind::concentration;
    if (s == "stabilized") return ValueKind::stabilized;
    if (s == "parameter") return ValueKind::parameter;
    throw FormatError("unknown value_kind: " + s);
}

void TimeSeriesVolume::validate() const {
    if (dims.empty() || dims.size() > 3)
        throw ArgumentError("volume dims must have 1..3 spatial extents");
    for (int d : dims)
        if (d < 1) throw ArgumentError("volume extents must be >= 1");
    if (n_time < 1) throw ArgumentError("n_time must be >= 1");
    if (!(dt_seconds > 0.0)) throw ArgumentError("dt_seconds must be > 0");
    if (data.size() != size()) throw ArgumentError("volume data length does not match dims x n_time");
    for (float v : data) {
        if (!std::isfinite(v)) throw DataError("volume contains non-finite values");
        if (value_kind == ValueKind::intensity && v < 0.0f)
            throw DataError("intensity volume contains negative values");
    }
}

TimeSeriesVolume make_volume(std::vector<int> dims, int n_time, double dt_seconds, ValueKind kind,
                             float fill) {
    TimeSeriesVolume v;
    v.dims = std::move(dims);
    v.n_time = n_time;
    v.dt_seconds = dt_seconds;
    v.value_kind = kind;
    v.data.assign(v.size(), fill);
    return v;
}

const char* to_string(AifKind k) {
    switch (k) {
        case AifKind::blood_intensity: return "blood_intensity";
        case AifKind::blood_concentration: return "blood_concentration";
        case AifKind::plasma_concentration: return "plasma_concentration";
    }
    return "plasma_concentration";
}

AifKind aif_kind_from_string(const std::string& s) {
    if (s == "blood_intensity") return AifKind::blood_intensity;
    if (s == "blood_concentration") return AifKind::blood_concentration;
    if (s == "plasma_concentration") return AifKind::plasma_concentration;
    throw FormatError("unknown AIF kind: " + s);
}

void AifSeries::validate() const {
    if (times.size() != values.size()) throw FormatError("AIF times/values length mismatch");
    if (times.empty()) throw FormatError("AIF series is empty");
    if (upsample_factor < 1) throw ArgumentError("AIF upsample_factor must be >= 1");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
            throw DataError("AIF contains non-finite values");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw FormatError("AIF times must be strictly increasing");
        if (kind == AifKind::plasma_concentration && values[i] < 0.0)
            throw DataError("plasma AIF values must be >= 0");
    }
}

double AcquisitionParams::A(double t10_ms) const { return std::exp(-tr_ms / t10_ms); }
double AcquisitionParams::B(double t10_ms) const { return A(t10_ms) * cos_flip(); }
double AcquisitionParams::sin_flip() const { return std::sin(flip_angle_deg * M_PI / 180.0); }
double AcquisitionParams::cos_flip() const { return std::cos(flip_angle_deg * M_PI / 180.0); }

void AcquisitionParams::validate() const {
    if (!(tr_ms > 0.0)) throw ArgumentError("tr_ms must be > 0");
    if (!(flip_angle_deg > 0.0 && flip_angle_deg < 90.0))
        throw ArgumentError("flip_angle_deg must be in (0, 90)");
    if (!(t10_tissue_ms > 0.0) || !(t10_blood_ms > 0.0))
        throw ArgumentError("T10 values must be > 0");
    if (!(r1 > 0.0)) throw ArgumentError("r1 must be > 0");
    if (!(hct > 0.0 && hct < 1.0)) throw ArgumentError("hct must be in (0, 1)");
}

void ParamMap::validate() const {
    std::size_t n = n_voxels();
    if (ktrans.size() != n || ve.size() != n || kep.size() != n || residual.size() != n ||
        converged.size() != n || bat_index.size() != n)
        throw ArgumentError("ParamMap field lengths do not match dims");
    for (std::size_t i = 0; i < n; ++i) {
        if (!converged[i]) continue;
        if (ktrans[i] < 0.0) throw DataError("ktrans must be >= 0");
        if (!(ve[i] > 0.0 && ve[i] <= 1.0)) throw DataError("ve must be in (0, 1]");
        double expect = ktrans[i] / ve[i];
        double scale = std::abs(expect) > 1.0 ? std::abs(expect) : 1.0;
        if (std::abs(kep[i] - expect) > 1e-12 * scale)
            throw DataError("kep is not ktrans/ve");
    }
}

}  // namespace tscf
