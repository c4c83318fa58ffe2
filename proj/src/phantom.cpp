#include "tscf/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "tscf/parallel.hpp"
#include "tscf/rng.hpp"

namespace tscf {

double AifModel::plasma(double t_s) const {
    if (kind == Kind::tabulated) {
        if (t_s <= tab_times_s.front() || tab_times_s.size() < 2) {
            return t_s < tab_times_s.front() ? 0.0 : tab_values.front();
        }
        if (t_s >= tab_times_s.back()) return tab_values.back();
        auto it = std::upper_bound(tab_times_s.begin(), tab_times_s.end(), t_s);
        std::size_t hi = static_cast<std::size_t>(it - tab_times_s.begin());
        std::size_t lo = hi - 1;
        double w = (t_s - tab_times_s[lo]) / (tab_times_s[hi] - tab_times_s[lo]);
        return tab_values[lo] + w * (tab_values[hi] - tab_values[lo]);
    }
    if (t_s < onset_s) return 0.0;
    double peak = a1 + a2;
    if (rise_s > 0.0 && t_s < onset_s + rise_s) return peak * (t_s - onset_s) / rise_s;
    double tm = (t_s - onset_s - rise_s) / 60.0;  // minutes past the rise
    return a1 * std::exp(-m1 * tm) + a2 * std::exp(-m2 * tm);
}

void AifModel::validate() const {
    if (kind == Kind::tabulated) {
        if (tab_times_s.size() != tab_values.size() || tab_times_s.empty())
            throw ArgumentError("tabulated AIF needs matching non-empty times/values");
        for (std::size_t i = 1; i < tab_times_s.size(); ++i)
            if (!(tab_times_s[i] > tab_times_s[i - 1]))
                throw ArgumentError("tabulated AIF times must be strictly increasing");
        for (double v : tab_values)
            if (v < 0.0) throw ArgumentError("AIF values must be >= 0");
        return;
    }
    if (a1 < 0.0 || a2 < 0.0 || m1 < 0.0 || m2 < 0.0 || rise_s < 0.0)
        throw ArgumentError("biexponential AIF coefficients must be >= 0");
    if (a1 + a2 <= 0.0) throw ArgumentError("biexponential AIF must have positive amplitude");
}

void DroSpec::validate() const {
    if (ktrans_grid.empty() || ve_grid.empty()) throw ArgumentError("DRO parameter grids are empty");
    for (double k : ktrans_grid)
        if (!(k > 0.0)) throw ArgumentError("ktrans grid values must be > 0");
    for (double v : ve_grid)
        if (!(v > 0.0 && v <= 1.0)) throw ArgumentError("ve grid values must be in (0, 1]");
    if (block_px < 1) throw ArgumentError("block_px must be >= 1");
    if (aif_rows < 0) throw ArgumentError("aif_rows must be >= 0");
    if (!(dt_s > 0.0) || !(duration_s > 0.0)) throw ArgumentError("duration/dt must be > 0");
    if (!(injection_time_s < duration_s)) throw ArgumentError("injection must precede end of scan");
    if (sigma_g < 0.0) throw ArgumentError("sigma_g must be >= 0");
    if (aif_upsample < 1) throw ArgumentError("aif_upsample must be >= 1");
}

double spgr_signal(double y0, double ct, const AcquisitionParams& acq, double t10_ms) {
    if (y0 < 0.0 || ct < 0.0) throw ArgumentError("spgr_signal requires y0 >= 0 and ct >= 0");
    double e = std::exp(acq.D() * ct);
    double A = acq.A(t10_ms);
    double B = acq.B(t10_ms);
    return y0 * (1.0 - A * e) * acq.sin_flip() / (1.0 - B * e);
}

std::vector<double> tofts_concentration_oracle(const AifModel& aif, double ktrans, double ve,
                                               const std::vector<double>& times_s,
                                               double max_step_s) {
    if (!(ktrans >= 0.0)) throw ArgumentError("ktrans must be >= 0");
    if (!(ve > 0.0 && ve <= 1.0)) throw ArgumentError("ve must be in (0, 1]");
    std::vector<double> out(times_s.size(), 0.0);
    if (ktrans == 0.0) return out;

    double kep_per_s = (ktrans / ve) / 60.0;
    for (std::size_t i = 0; i < times_s.size(); ++i) {
        double t = times_s[i];
        if (t <= 0.0) continue;
        int n = std::max(2, static_cast<int>(std::ceil(t / max_step_s)) + 1);
        double h = t / (n - 1);
        double acc = 0.0;
        double prev = aif.plasma(0.0) * std::exp(-kep_per_s * t);
        for (int j = 1; j < n; ++j) {
            double tau = j * h;
            double cur = aif.plasma(tau) * std::exp(-kep_per_s * (t - tau));
            acc += 0.5 * (prev + cur) * h;
            prev = cur;
        }
        out[i] = ktrans * acc / 60.0;  // tau integrated in seconds, ktrans in min^-1
    }
    return out;
}

TimeSeriesVolume add_rician_noise(const TimeSeriesVolume& volume, double sigma_g,
                                  std::uint64_t seed, int threads) {
    if (volume.value_kind != ValueKind::intensity)
        throw ArgumentError("add_rician_noise expects an intensity volume");
    if (sigma_g < 0.0) throw ArgumentError("sigma_g must be >= 0");
    TimeSeriesVolume out = volume;
    if (sigma_g == 0.0) return out;

    std::size_t n = volume.data.size();
    parallel_for(n, threads, [&](std::size_t i) {
        Rng rng(seed, i);
        double nr, ni;
        rng.next_gauss_pair(nr, ni);
        double y = volume.data[i];
        double re = y + sigma_g * nr;
        double im = sigma_g * ni;
        out.data[i] = static_cast<float>(std::sqrt(re * re + im * im));
    });
    return out;
}

DroOutput generate_dro(const DroSpec& spec, const AifModel& aif, const AcquisitionParams& acq,
                       std::uint64_t seed, int threads) {
    spec.validate();
    aif.validate();
    acq.validate();

    int nt = spec.n_time();
    int ny = spec.height();
    int nx = spec.width();
    int nk = static_cast<int>(spec.ktrans_grid.size());
    int nv = static_cast<int>(spec.ve_grid.size());

    std::vector<double> times(nt);
    for (int t = 0; t < nt; ++t) times[t] = t * spec.dt_s;

    DroOutput out;
    out.noiseless = make_volume({ny, nx}, nt, spec.dt_s, ValueKind::intensity);

    // One concentration series per parameter block.
    std::vector<std::vector<double>> block_signal(static_cast<std::size_t>(nk) * nv);
    parallel_for(block_signal.size(), threads, [&](std::size_t b) {
        int i = static_cast<int>(b) / nv;
        int j = static_cast<int>(b) % nv;
        auto ct = tofts_concentration_oracle(aif, spec.ktrans_grid[i], spec.ve_grid[j], times);
        std::vector<double> sig(nt);
        for (int t = 0; t < nt; ++t) sig[t] = spgr_signal(spec.s0, ct[t], acq, acq.t10_tissue_ms);
        block_signal[b] = std::move(sig);
    });

    ParamMap& truth = out.truth;
    truth.dims = {ny, nx};
    std::size_t nvox = truth.n_voxels();
    truth.ktrans.assign(nvox, 0.0);
    truth.ve.assign(nvox, 0.0);
    truth.kep.assign(nvox, 0.0);
    truth.residual.assign(nvox, 0.0);
    truth.converged.assign(nvox, 0);
    truth.bat_index.assign(nvox, -1);
    int expected_bat = static_cast<int>(std::round(spec.injection_time_s / spec.dt_s));
    truth.roi_mean_bat = expected_bat;

    for (int y = 0; y < nk * spec.block_px; ++y) {
        int bi = y / spec.block_px;
        for (int x = 0; x < nx; ++x) {
            int bj = x / spec.block_px;
            std::size_t vox = static_cast<std::size_t>(y) * nx + x;
            const auto& sig = block_signal[static_cast<std::size_t>(bi) * nv + bj];
            float* dst = out.noiseless.series(vox);
            for (int t = 0; t < nt; ++t) dst[t] = static_cast<float>(sig[t]);
            truth.ktrans[vox] = spec.ktrans_grid[bi];
            truth.ve[vox] = spec.ve_grid[bj];
            truth.kep[vox] = spec.ktrans_grid[bi] / spec.ve_grid[bj];
            truth.converged[vox] = 1;
            truth.bat_index[vox] = expected_bat;
        }
    }

    // AIF ROI: blood signal from the plasma curve via Cb = Cp (1 - Hct) and
    // the blood T10.
    std::vector<double> blood(nt);
    for (int t = 0; t < nt; ++t) {
        double cb = aif.plasma(times[t]) * (1.0 - acq.hct);
        blood[t] = spgr_signal(spec.s0, cb, acq, acq.t10_blood_ms);
    }
    for (int y = nk * spec.block_px; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            float* dst = out.noiseless.series(static_cast<std::size_t>(y) * nx + x);
            for (int t = 0; t < nt; ++t) dst[t] = static_cast<float>(blood[t]);
        }

    out.noisy = add_rician_noise(out.noiseless, spec.sigma_g, seed, threads);

    // Exported AIF: ground-truth plasma at aif_upsample x resolution with the
    // bolus at its own grid origin; alignment happens explicitly at fit time.
    AifSeries& series = out.aif_series;
    series.kind = AifKind::plasma_concentration;
    series.upsample_factor = spec.aif_upsample;
    int nf = nt * spec.aif_upsample;
    double df = spec.dt_s / spec.aif_upsample;
    series.times.resize(nf);
    series.values.resize(nf);
    for (int j = 0; j < nf; ++j) {
        series.times[j] = j * df;
        series.values[j] = aif.plasma(aif.onset_s + j * df);
    }
    series.validate();
    return out;
}

}  // namespace tscf
