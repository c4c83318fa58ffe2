#include "tscf/tscf_filter.hpp"

#include <algorithm>
#include <cmath>

#include "tscf/parallel.hpp"

namespace tscf {
namespace {

// Spatial coordinates of a flat voxel index for 1..3 dims (row-major).
inline void unflatten(std::size_t v, const std::vector<int>& dims, int* coord) {
    for (std::size_t a = dims.size(); a-- > 0;) {
        coord[a] = static_cast<int>(v % static_cast<std::size_t>(dims[a]));
        v /= static_cast<std::size_t>(dims[a]);
    }
}

}  // namespace

void TscfConfig::validate() const {
    if (!(zeta_sim > 0.0)) throw ArgumentError("zeta_sim must be > 0");
    if (tau_dist < 0.0) throw ArgumentError("tau_dist must be >= 0");
    if (max_cluster < 1) throw ArgumentError("max_cluster must be >= 1");
    if (tau_shrink < 0.0) throw ArgumentError("tau_shrink must be >= 0");
    if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");
    if (!(stop_rel_tol >= 0.0)) throw ArgumentError("stop_rel_tol must be >= 0");
    if (!(sigma_v > 0.0)) throw ArgumentError("sigma_v must be > 0");
}

std::vector<double> temporal_spectra(const TimeSeriesVolume& volume, const DctPlan& plan,
                                     int threads) {
    if (plan.size() != volume.n_time) throw ArgumentError("temporal plan size != n_time");
    std::size_t nv = volume.n_voxels();
    int nt = volume.n_time;
    std::vector<double> spectra(nv * static_cast<std::size_t>(nt));
    parallel_for(nv, threads, [&](std::size_t v) {
        std::vector<double> buf(static_cast<std::size_t>(nt));
        const float* src = volume.series(v);
        for (int t = 0; t < nt; ++t) buf[static_cast<std::size_t>(t)] = src[t];
        plan.forward(buf.data(), spectra.data() + v * static_cast<std::size_t>(nt));
    });
    return spectra;
}

Cluster gather(const std::vector<double>& spectra, const std::vector<int>& dims, int n_time,
               const TscfConfig& cfg, std::size_t reference) {
    int nd = static_cast<int>(dims.size());
    int rc[3] = {0, 0, 0};
    unflatten(reference, dims, rc);
    int radius = static_cast<int>(std::floor(std::sqrt(std::max(cfg.tau_dist, 0.0))));

    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int a = 0; a < nd; ++a) {
        lo[a] = std::max(0, rc[a] - radius);
        hi[a] = std::min(dims[a] - 1, rc[a] + radius);
    }

    const double* ref_spec = spectra.data() + reference * static_cast<std::size_t>(n_time);

    struct Cand {
        double s;
        std::size_t voxel;
    };
    std::vector<Cand> cands;

    int c[3] = {0, 0, 0};
    // Walk the axis-aligned box around the reference; dims beyond nd stay 0.
    for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0]) {
        for (c[1] = (nd > 1 ? lo[1] : 0); c[1] <= (nd > 1 ? hi[1] : 0); ++c[1]) {
            for (c[2] = (nd > 2 ? lo[2] : 0); c[2] <= (nd > 2 ? hi[2] : 0); ++c[2]) {
                double d2 = 0.0;
                for (int a = 0; a < nd; ++a) {
                    double dd = c[a] - rc[a];
                    d2 += dd * dd;
                }
                if (d2 > cfg.tau_dist) continue;
                std::size_t v = 0;
                for (int a = 0; a < nd; ++a)
                    v = v * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(c[a]);
                const double* spec = spectra.data() + v * static_cast<std::size_t>(n_time);
                double s = 0.0;
                for (int t = 0; t < n_time; ++t) {
                    double dd = spec[t] - ref_spec[t];
                    s += dd * dd;
                }
                if (s <= cfg.zeta_sim) cands.push_back({s, v});
            }
        }
    }

    // Ascending similarity, coordinate (== flat index) breaking ties; the
    // reference itself has s = 0 and always survives the cap.
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.s != b.s) return a.s < b.s;
        return a.voxel < b.voxel;
    });
    if (static_cast<int>(cands.size()) > cfg.max_cluster)
        cands.resize(static_cast<std::size_t>(cfg.max_cluster));

    Cluster cl;
    cl.reference = reference;
    cl.members.reserve(cands.size());
    cl.similarities.reserve(cands.size());
    cl.spectral_rows.resize(cands.size() * static_cast<std::size_t>(n_time));
    for (std::size_t i = 0; i < cands.size(); ++i) {
        cl.members.push_back(cands[i].voxel);
        cl.similarities.push_back(cands[i].s);
        const double* spec = spectra.data() + cands[i].voxel * static_cast<std::size_t>(n_time);
        std::copy(spec, spec + n_time, cl.spectral_rows.begin() + i * static_cast<std::size_t>(n_time));
    }
    return cl;
}

std::vector<double> attenuate(const Cluster& cluster, const TscfConfig& cfg,
                              const DctPlanSet& spatial_plans, const DctPlan& temporal_plan,
                              bool* degenerate) {
    std::size_t m = cluster.members.size();
    int nt = temporal_plan.size();
    std::size_t total = m * static_cast<std::size_t>(nt);
    if (degenerate) *degenerate = false;

    const DctPlan& sp = spatial_plans.plan(static_cast<int>(m));
    std::vector<double> S(total), work(total);

    // Spatial transform along the member axis.
    sp.forward_cols(cluster.spectral_rows.data(), S.data(), static_cast<std::size_t>(nt));

    // Hard threshold scaled for m*nt coefficients of unit-variance noise.
    double tau_eff = cfg.tau_shrink * cfg.sigma_v *
                     std::sqrt(2.0 * std::log(static_cast<double>(m) * nt));
    double total_energy = 0.0;
    std::vector<double> row_energy(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = S.data() + r * static_cast<std::size_t>(nt);
        double e = 0.0;
        for (int t = 0; t < nt; ++t) {
            double v = row[t];
            if (std::abs(v) >= tau_eff) e += v * v;
        }
        row_energy[r] = e;
        total_energy += e;
    }

    // Per-row Wiener weights from the thresholded spectrum, applied to the
    // original spectrum. All-below-threshold clusters shrink to zero.
    if (total_energy > 0.0) {
        for (std::size_t r = 0; r < m; ++r) {
            double w = row_energy[r] / total_energy;
            double* row = S.data() + r * static_cast<std::size_t>(nt);
            for (int t = 0; t < nt; ++t) row[t] *= w;
        }
    } else {
        std::fill(S.begin(), S.end(), 0.0);
        if (degenerate) *degenerate = true;
    }

    sp.inverse_cols(S.data(), work.data(), static_cast<std::size_t>(nt));

    std::vector<double> out(total);
    temporal_plan.inverse_rows(work.data(), out.data(), m);
    return out;
}

TimeSeriesVolume reduce(const std::vector<Cluster>& clusters,
                        const std::vector<std::vector<double>>& estimates,
                        const TimeSeriesVolume& like) {
    if (clusters.size() != estimates.size())
        throw ArgumentError("reduce: clusters/estimates size mismatch");
    std::size_t nv = like.n_voxels();
    int nt = like.n_time;
    std::vector<double> acc(nv * static_cast<std::size_t>(nt), 0.0);
    std::vector<std::uint32_t> count(nv, 0);

    // Deterministic order: clusters arrive sorted by reference voxel.
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const Cluster& cl = clusters[c];
        const std::vector<double>& est = estimates[c];
        for (std::size_t r = 0; r < cl.members.size(); ++r) {
            std::size_t v = cl.members[r];
            double* dst = acc.data() + v * static_cast<std::size_t>(nt);
            const double* src = est.data() + r * static_cast<std::size_t>(nt);
            for (int t = 0; t < nt; ++t) dst[t] += src[t];
            ++count[v];
        }
    }

    TimeSeriesVolume out = like;
    for (std::size_t v = 0; v < nv; ++v) {
        if (count[v] == 0) throw DataError("reduce: voxel belongs to no cluster");
        double inv = 1.0 / count[v];
        float* dst = out.series(v);
        const double* src = acc.data() + v * static_cast<std::size_t>(nt);
        for (int t = 0; t < nt; ++t) dst[t] = static_cast<float>(src[t] * inv);
    }
    return out;
}

TimeSeriesVolume tscf_denoise(const TimeSeriesVolume& volume, const TscfConfig& cfg, int threads,
                              TscfDiagnostics* diag) {
    if (volume.value_kind != ValueKind::stabilized)
        throw ArgumentError("tscf_denoise expects a stabilized volume");
    cfg.validate();
    if (volume.dims.size() < 2 || volume.dims.size() > 3)
        throw ArgumentError("tscf_denoise supports 2-D and 3-D volumes");

    int nt = volume.n_time;
    std::size_t nv = volume.n_voxels();
    DctPlan temporal_plan(nt);
    DctPlanSet spatial_plans(cfg.max_cluster);

    TimeSeriesVolume est = volume;
    if (diag) {
        diag->iterations = 0;
        diag->degenerate_clusters = 0;
        diag->residual_std.clear();
    }

    double prev_std = -1.0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        std::vector<double> spectra = temporal_spectra(est, temporal_plan, threads);

        std::vector<Cluster> clusters(nv);
        std::vector<std::vector<double>> estimates(nv);
        std::vector<std::uint8_t> degen(nv, 0);
        parallel_for(nv, threads, [&](std::size_t v) {
            clusters[v] = gather(spectra, est.dims, nt, cfg, v);
            bool d = false;
            estimates[v] = attenuate(clusters[v], cfg, spatial_plans, temporal_plan, &d);
            degen[v] = d ? 1 : 0;
        });
        est = reduce(clusters, estimates, est);

        if (diag) {
            diag->iterations = iter + 1;
            for (std::size_t v = 0; v < nv; ++v) diag->degenerate_clusters += degen[v];
        }

        // Residual against the stage input, serial for bit-stable sums.
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = volume.data.size();
        for (std::size_t i = 0; i < n; ++i) {
            double r = static_cast<double>(volume.data[i]) - est.data[i];
            sum += r;
            sum2 += r * r;
        }
        double mean = sum / static_cast<double>(n);
        double var = sum2 / static_cast<double>(n) - mean * mean;
        double rstd = std::sqrt(std::max(var, 0.0));
        if (diag) diag->residual_std.push_back(rstd);

        if (prev_std >= 0.0) {
            double denom = std::max(prev_std, 1e-30);
            if (std::abs(rstd - prev_std) / denom < cfg.stop_rel_tol) break;
        }
        prev_std = rstd;
    }
    return est;
}

TimeSeriesVolume gaussian_smooth(const TimeSeriesVolume& volume, double fwhm_px, int threads) {
    if (!(fwhm_px > 0.0)) throw ArgumentError("gaussian_smooth requires fwhm > 0");
    double sigma = fwhm_px / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
        kernel[static_cast<std::size_t>(i + radius)] = w;
        ksum += w;
    }
    for (double& w : kernel) w /= ksum;

    // Separable passes over each spatial axis, reflected boundaries.
    TimeSeriesVolume cur = volume;
    int nd = static_cast<int>(volume.dims.size());
    int nt = volume.n_time;

    std::vector<std::size_t> stride(static_cast<std::size_t>(nd));
    std::size_t acc = static_cast<std::size_t>(nt);
    for (int a = nd - 1; a >= 0; --a) {
        stride[static_cast<std::size_t>(a)] = acc;
        acc *= static_cast<std::size_t>(volume.dims[static_cast<std::size_t>(a)]);
    }

    for (int axis = 0; axis < nd; ++axis) {
        TimeSeriesVolume next = cur;
        int extent = volume.dims[static_cast<std::size_t>(axis)];
        std::size_t axis_stride = stride[static_cast<std::size_t>(axis)];
        std::size_t n_lines = volume.size() / static_cast<std::size_t>(extent);

        parallel_for(n_lines, threads, [&](std::size_t line) {
            // Decompose the line id into the base offset with the axis removed.
            std::size_t inner = line % axis_stride;
            std::size_t outer = line / axis_stride;
            std::size_t base = outer * axis_stride * static_cast<std::size_t>(extent) + inner;
            for (int i = 0; i < extent; ++i) {
                double v = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    int j = i + k;
                    while (j < 0 || j >= extent) {       // reflect, repeatedly for tiny extents
                        if (j < 0) j = -j - 1;
                        if (j >= extent) j = 2 * extent - j - 1;
                    }
                    v += kernel[static_cast<std::size_t>(k + radius)] *
                         cur.data[base + static_cast<std::size_t>(j) * axis_stride];
                }
                next.data[base + static_cast<std::size_t>(i) * axis_stride] =
                    static_cast<float>(v);
            }
        });
        cur = std::move(next);
    }
    return cur;
}

}  // namespace tscf
