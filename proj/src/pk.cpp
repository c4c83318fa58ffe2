#include "tscf/pk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lbfgs.hpp"
#include "tscf/parallel.hpp"
#include "tscf/rng.hpp"

namespace tscf {
namespace {

// Interval weights of the exact piecewise-linear convolution step,
//   ct[t] = E ct[t-1] + kp (cp[t-1] f1(a) + cp[t] f2(a)),  a = kp/ve, E = e^-a,
//   f1 = (1 - (1+a)E)/a^2,  f2 = (E + a - 1)/a^2,
// with series branches near a = 0 where the direct forms cancel.
struct StepWeights {
    double E, f1, f2;
    double dE_da, df1_da, df2_da;
};

StepWeights step_weights(double a) {
    StepWeights w{};
    double E = std::exp(-a);
    w.E = E;
    w.dE_da = -E;
    if (a < 1e-2) {
        double a2 = a * a, a3 = a2 * a;
        w.f1 = 0.5 - a / 3.0 + a2 / 8.0 - a3 / 30.0;
        w.f2 = 0.5 - a / 6.0 + a2 / 24.0 - a3 / 120.0;
        w.df1_da = -1.0 / 3.0 + a / 4.0 - a2 / 10.0;
        w.df2_da = -1.0 / 6.0 + a / 12.0 - a2 / 40.0;
    } else {
        double a2 = a * a;
        double n1 = 1.0 - (1.0 + a) * E;
        double n2 = E + a - 1.0;
        w.f1 = n1 / a2;
        w.f2 = n2 / a2;
        w.df1_da = (a2 * E - 2.0 * n1) / (a2 * a);
        w.df2_da = (a * (1.0 - E) - 2.0 * n2) / (a2 * a);
    }
    return w;
}

void check_pk_args(double ktrans, double ve, double dt_s) {
    if (!(ktrans >= 0.0)) throw ArgumentError("ktrans must be >= 0");
    if (!(ve > 0.0 && ve <= 1.0)) throw ArgumentError("ve must be in (0, 1]");
    if (!(dt_s > 0.0)) throw ArgumentError("dt_s must be > 0");
}

}  // namespace

void FitConfig::validate() const {
    if (!(ktrans_min > 0.0 && ktrans_min < ktrans_max))
        throw ArgumentError("require 0 < ktrans_min < ktrans_max");
    if (!(ve_min > 0.0 && ve_min < ve_max && ve_max <= 1.0))
        throw ArgumentError("require 0 < ve_min < ve_max <= 1");
    if (n_starts < 1) throw ArgumentError("n_starts must be >= 1");
    if (max_lbfgs_iters < 1) throw ArgumentError("max_lbfgs_iters must be >= 1");
    if (history_size < 1) throw ArgumentError("history_size must be >= 1");
}

void horsfield_forward(const std::vector<double>& cp, double ktrans, double ve, double dt_s,
                       std::vector<double>& ct_out) {
    check_pk_args(ktrans, ve, dt_s);
    std::size_t n = cp.size();
    ct_out.assign(n, 0.0);
    if (n == 0 || ktrans == 0.0) return;
    double kp = ktrans * dt_s / 60.0;
    StepWeights w = step_weights(kp / ve);
    double prev = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        prev = prev * w.E + kp * (cp[t - 1] * w.f1 + cp[t] * w.f2);
        ct_out[t] = prev;
    }
}

void horsfield_forward_grad(const std::vector<double>& cp, double ktrans, double ve, double dt_s,
                            std::vector<double>& ct_out, std::vector<double>& dk_out,
                            std::vector<double>& dv_out) {
    check_pk_args(ktrans, ve, dt_s);
    std::size_t n = cp.size();
    ct_out.assign(n, 0.0);
    dk_out.assign(n, 0.0);
    dv_out.assign(n, 0.0);
    if (n == 0) return;

    double dt_min = dt_s / 60.0;
    double kp = ktrans * dt_min;
    double a = kp / ve;
    StepWeights w = step_weights(a);
    // a = ktrans dt / ve: da/dk = dt/ve, da/dve = -a/ve.
    double da_dk = dt_min / ve;
    double da_dv = -a / ve;

    double c = 0.0, ck = 0.0, cv = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        double drive = cp[t - 1] * w.f1 + cp[t] * w.f2;
        double ddrive_da = cp[t - 1] * w.df1_da + cp[t] * w.df2_da;
        double cn = c * w.E + kp * drive;
        double cnk = ck * w.E + c * w.dE_da * da_dk + dt_min * drive + kp * ddrive_da * da_dk;
        double cnv = cv * w.E + c * w.dE_da * da_dv + kp * ddrive_da * da_dv;
        c = cn;
        ck = cnk;
        cv = cnv;
        ct_out[t] = c;
        dk_out[t] = ck;
        dv_out[t] = cv;
    }
}

double fit_cost_grad(const std::vector<double>& ct_data, const std::vector<double>& cp, double dt_s,
                     double ktrans, double ve, double* dcost_dktrans, double* dcost_dve) {
    if (ct_data.size() != cp.size())
        throw ArgumentError("fit_cost_grad: data and AIF length mismatch");
    thread_local std::vector<double> model, dk, dv;
    horsfield_forward_grad(cp, ktrans, ve, dt_s, model, dk, dv);
    double cost = 0.0, gk = 0.0, gv = 0.0;
    for (std::size_t t = 0; t < cp.size(); ++t) {
        double r = model[t] - ct_data[t];
        cost += 0.5 * r * r;
        gk += r * dk[t];
        gv += r * dv[t];
    }
    if (dcost_dktrans) *dcost_dktrans = gk;
    if (dcost_dve) *dcost_dve = gv;
    return cost;
}

namespace {

// Smooth bounded reparameterization: ktrans log-scaled between its bounds,
// ve linear between its bounds, both through a logistic.
struct Reparam {
    double log_kmin, log_kspan;  // ktrans = exp(log_kmin + log_kspan * sig(u))
    double vmin, vspan;          // ve = vmin + vspan * sig(w)

    static double sig(double u) { return 1.0 / (1.0 + std::exp(-u)); }

    void unpack(const std::vector<double>& p, double& kt, double& ve, double& dk_du,
                double& dv_dw) const {
        double su = sig(std::clamp(p[0], -60.0, 60.0));
        double sw = sig(std::clamp(p[1], -60.0, 60.0));
        kt = std::exp(log_kmin + log_kspan * su);
        ve = vmin + vspan * sw;
        dk_du = kt * log_kspan * su * (1.0 - su);
        dv_dw = vspan * sw * (1.0 - sw);
    }
};

}  // namespace

VoxelFit fit_voxel(const std::vector<double>& ct_data, const std::vector<double>& cp, double dt_s,
                   const FitConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (ct_data.size() != cp.size() || ct_data.empty())
        throw ArgumentError("fit_voxel: data and AIF must have equal nonzero length");

    Reparam rep;
    rep.log_kmin = std::log(cfg.ktrans_min);
    rep.log_kspan = std::log(cfg.ktrans_max) - rep.log_kmin;
    rep.vmin = cfg.ve_min;
    rep.vspan = cfg.ve_max - cfg.ve_min;

    auto objective = [&](const std::vector<double>& p, std::vector<double>& grad) {
        double kt, ve, dk_du, dv_dw;
        rep.unpack(p, kt, ve, dk_du, dv_dw);
        double gk, gv;
        double cost = fit_cost_grad(ct_data, cp, dt_s, kt, ve, &gk, &gv);
        grad.resize(2);
        grad[0] = gk * dk_du;
        grad[1] = gv * dv_dw;
        return cost;
    };

    detail::LbfgsOptions opt;
    opt.max_iters = cfg.max_lbfgs_iters;
    opt.history = cfg.history_size;
    opt.grad_tol = cfg.grad_tol;
    opt.cost_tol = cfg.cost_tol;

    Rng rng(seed, 0x66697473ULL);
    VoxelFit best;
    double best_cost = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int s = 0; s < cfg.n_starts; ++s) {
        std::vector<double> p0 = {4.0 * (rng.next_unit() - 0.5), 4.0 * (rng.next_unit() - 0.5)};
        auto r = detail::lbfgs_minimize(objective, std::move(p0), opt);
        if (r.f < best_cost) {
            best_cost = r.f;
            double kt, ve, j0, j1;
            rep.unpack(r.x, kt, ve, j0, j1);
            best.ktrans = kt;
            best.ve = ve;
            best.residual = r.f;
            best.converged = r.converged;
        }
        any_converged = any_converged || r.converged;
    }
    if (!best.converged && any_converged) {
        // The winning start stalled in line search but another start converged
        // to a worse cost; keep the better values, flag honestly.
        best.converged = false;
    }
    return best;
}

std::vector<double> align_aif(const AifSeries& aif, double roi_mean_bat, int n_time) {
    aif.validate();
    if (n_time < 1) throw ArgumentError("align_aif: n_time must be >= 1");
    int f = aif.upsample_factor;
    long shift = std::lround(static_cast<double>(f) * roi_mean_bat);
    if (shift < 0) throw ArgumentError("align_aif: negative BAT shift");

    long need = static_cast<long>(n_time) * f;
    if (static_cast<long>(aif.values.size()) + shift < need)
        throw ArgumentError("align_aif: AIF does not cover the volume time span after shift");

    // Pre-shift samples repeat the first value: zero for a bolus-at-origin
    // concentration curve, the baseline for an intensity curve.
    std::vector<double> out(static_cast<std::size_t>(n_time));
    for (int k = 0; k < n_time; ++k) {
        long j = static_cast<long>(k) * f - shift;  // block-start sample
        out[static_cast<std::size_t>(k)] =
            j < 0 ? aif.values.front() : aif.values[static_cast<std::size_t>(j)];
    }
    return out;
}

BatResult estimate_bat(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                       const BatConfig& cfg) {
    if (volume.n_time < 5) throw ArgumentError("estimate_bat needs at least 5 scans");
    if (roi.empty()) throw ArgumentError("estimate_bat: empty ROI");
    int nt = volume.n_time;
    int half = std::max(1, cfg.smooth_window) / 2;

    BatResult res;
    res.per_voxel_bat.assign(volume.n_voxels(), -1);

    std::vector<double> s(nt), d(nt - 1);
    double bat_sum = 0.0;
    std::size_t n_valid = 0;

    for (std::size_t v : roi) {
        const float* yv = volume.series(v);

        // Clipped moving average.
        for (int t = 0; t < nt; ++t) {
            int lo = std::max(0, t - half), hi = std::min(nt - 1, t + half);
            double acc = 0.0;
            for (int k = lo; k <= hi; ++k) acc += yv[k];
            s[t] = acc / (hi - lo + 1);
        }
        for (int t = 0; t + 1 < nt; ++t) d[t] = s[t + 1] - s[t];

        int p = 0;
        for (int t = 1; t < nt; ++t)
            if (s[t] > s[p]) p = t;
        if (p < 1) continue;

        int kd = 0;
        for (int t = 1; t < p; ++t)
            if (d[t] > d[kd]) kd = t;
        double maxd = d[kd];
        if (!(maxd > 0.0)) continue;

        // Trace back through the contiguous above-threshold run of the final
        // ascent; the onset sits one sample past where the run starts.
        int k = kd;
        while (k - 1 >= 0 && d[k - 1] >= cfg.gradient_fraction * maxd) --k;
        int bat = k + 1;

        // Noise scale from second differences (trend-insensitive).
        std::vector<double> r2(static_cast<std::size_t>(nt - 2));
        for (int t = 1; t + 1 < nt; ++t)
            r2[static_cast<std::size_t>(t - 1)] =
                (static_cast<double>(yv[t + 1]) - 2.0 * yv[t] + yv[t - 1]) / std::sqrt(6.0);
        std::vector<double> w = r2;
        std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
        double med2 = w[w.size() / 2];
        for (double& x : w) x = std::abs(x - med2);
        std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
        double sig_n = 1.4826 * w[w.size() / 2];
        double sig_d = sig_n * std::sqrt(2.0) / 3.0;

        int nb = std::max(3, bat);
        std::vector<double> base(yv, yv + std::min(nb, nt));
        std::nth_element(base.begin(), base.begin() + base.size() / 2, base.end());
        double base_med = base[base.size() / 2];
        double rise = s[p] - base_med;

        if (rise <= cfg.rise_sigma * sig_n + 1e-9 * std::max(1.0, std::abs(base_med))) continue;
        if (maxd <= cfg.slope_sigma * sig_d) continue;

        res.per_voxel_bat[v] = bat;
        bat_sum += bat;
        ++n_valid;
    }

    if (n_valid == 0) throw DataError("estimate_bat: no voxel has a detectable onset");
    res.n_valid = n_valid;
    res.roi_mean_bat = bat_sum / static_cast<double>(n_valid);
    res.valid_fraction = static_cast<double>(n_valid) / static_cast<double>(roi.size());
    return res;
}

std::vector<double> series_to_concentration(const std::vector<double>& y,
                                            const AcquisitionParams& acq, double t10_ms, int bat,
                                            std::uint64_t* diag_clamped) {
    if (bat < 1 || bat > static_cast<int>(y.size()))
        throw ArgumentError("series_to_concentration: bat must be in [1, n_time]");
    double A = acq.A(t10_ms);
    double B = acq.B(t10_ms);
    double D = acq.D();

    double y0 = 0.0;
    for (int t = 0; t < bat; ++t) y0 += y[static_cast<std::size_t>(t)];
    y0 /= bat;

    std::vector<double> ct(y.size(), 0.0);
    std::uint64_t clamped = 0;
    if (!(y0 > 0.0)) {
        // No usable baseline; everything clamps to zero concentration.
        if (diag_clamped) *diag_clamped += y.size() - static_cast<std::size_t>(bat);
        return ct;
    }
    double gscale = (1.0 - A) / (y0 * (1.0 - B));
    for (std::size_t t = static_cast<std::size_t>(bat); t < y.size(); ++t) {
        double g = y[t] * gscale;
        double num = 1.0 - g;
        double den = A - B * g;
        double arg = (den != 0.0) ? num / den : -1.0;
        if (arg > 0.0) {
            double c = std::log(arg) / D;
            if (c > 0.0) {
                ct[t] = c;
            } else {
                ct[t] = 0.0;  // below baseline: clamp, not an error
                if (c < 0.0) ++clamped;
            }
        } else {
            ct[t] = 0.0;
            ++clamped;
        }
    }
    if (diag_clamped) *diag_clamped += clamped;
    return ct;
}

TimeSeriesVolume intensity_to_concentration(const TimeSeriesVolume& volume,
                                            const AcquisitionParams& acq, double t10_ms, int bat,
                                            std::uint64_t* diag_clamped) {
    if (volume.value_kind != ValueKind::intensity)
        throw ArgumentError("intensity_to_concentration expects an intensity volume");
    TimeSeriesVolume out = volume;
    out.value_kind = ValueKind::concentration;
    std::uint64_t clamped = 0;
    std::vector<double> series(static_cast<std::size_t>(volume.n_time));
    for (std::size_t v = 0; v < volume.n_voxels(); ++v) {
        const float* src = volume.series(v);
        for (int t = 0; t < volume.n_time; ++t) series[static_cast<std::size_t>(t)] = src[t];
        auto ct = series_to_concentration(series, acq, t10_ms, bat, &clamped);
        float* dst = out.series(v);
        for (int t = 0; t < volume.n_time; ++t) dst[t] = static_cast<float>(ct[static_cast<std::size_t>(t)]);
    }
    if (diag_clamped) *diag_clamped = clamped;
    return out;
}

ParamMap fit_volume(const TimeSeriesVolume& volume, const AifSeries& aif,
                    const AcquisitionParams& acq, const std::vector<std::size_t>& roi,
                    const FitConfig& cfg, const BatConfig& bat_cfg, std::uint64_t seed,
                    int threads, FitVolumeDiagnostics* diag) {
    volume.validate();
    cfg.validate();
    if (roi.empty()) throw ArgumentError("fit_volume: empty ROI");

    BatResult bat = estimate_bat(volume, roi, bat_cfg);
    int bat_i = std::clamp(static_cast<int>(std::lround(bat.roi_mean_bat)), 1, volume.n_time - 1);

    std::vector<double> cp = align_aif(aif, bat.roi_mean_bat, volume.n_time);

    std::uint64_t aif_clamped = 0;
    if (aif.kind == AifKind::blood_intensity) {
        auto cb = series_to_concentration(cp, acq, acq.t10_blood_ms, bat_i, &aif_clamped);
        for (std::size_t t = 0; t < cp.size(); ++t) cp[t] = cb[t] / (1.0 - acq.hct);
    } else if (aif.kind == AifKind::blood_concentration) {
        for (double& v : cp) v /= (1.0 - acq.hct);
    }

    ParamMap map;
    map.dims = volume.dims;
    std::size_t n = map.n_voxels();
    map.ktrans.assign(n, 0.0);
    map.ve.assign(n, 0.0);
    map.kep.assign(n, 0.0);
    map.residual.assign(n, 0.0);
    map.converged.assign(n, 0);
    map.bat_index = bat.per_voxel_bat;
    map.roi_mean_bat = bat.roi_mean_bat;

    std::uint64_t conc_clamped = 0;
    std::size_t n_converged = 0;
    std::vector<std::uint64_t> clamp_per(roi.size(), 0);
    std::vector<std::uint8_t> conv_per(roi.size(), 0);

    parallel_for(roi.size(), threads, [&](std::size_t i) {
        std::size_t v = roi[i];
        const float* src = volume.series(v);
        std::vector<double> series(static_cast<std::size_t>(volume.n_time));
        for (int t = 0; t < volume.n_time; ++t) series[static_cast<std::size_t>(t)] = src[t];
        auto ct = series_to_concentration(series, acq, acq.t10_tissue_ms, bat_i, &clamp_per[i]);
        VoxelFit fit = fit_voxel(ct, cp, volume.dt_seconds, cfg, seed ^ (0x9e37ULL + v));
        map.ktrans[v] = fit.ktrans;
        map.ve[v] = fit.ve;
        map.kep[v] = fit.ktrans / fit.ve;
        map.residual[v] = fit.residual;
        map.converged[v] = fit.converged ? 1 : 0;
        conv_per[i] = fit.converged ? 1 : 0;
    });
    for (std::size_t i = 0; i < roi.size(); ++i) {
        conc_clamped += clamp_per[i];
        n_converged += conv_per[i];
    }

    if (diag) {
        diag->bat = std::move(bat);
        diag->conc_clamped = conc_clamped;
        diag->aif_clamped = aif_clamped;
        diag->n_fitted = roi.size();
        diag->n_converged = n_converged;
    }
    return map;
}

}  // namespace tscf
