#include "tscf/vst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tscf/rician.hpp"

namespace tscf {
namespace {

// Interpolates y(xq) on a sorted knot grid, linear extrapolation with the
// boundary slope outside.
double interp_lin(const std::vector<double>& x, const std::vector<double>& y, double xq) {
    std::size_t n = x.size();
    if (xq <= x.front()) {
        double slope = (y[1] - y[0]) / (x[1] - x[0]);
        return y.front() + (xq - x.front()) * slope;
    }
    if (xq >= x.back()) {
        double slope = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
        return y.back() + (xq - x.back()) * slope;
    }
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    std::size_t hi = static_cast<std::size_t>(it - x.begin());
    std::size_t lo = hi - 1;
    double w = (xq - x[lo]) / (x[hi] - x[lo]);
    return y[lo] + w * (y[hi] - y[lo]);
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

// E[g(z)] for z ~ Rice(theta, 1) with g given on the stabilizer's own m-grid.
// Density written with the scaled Bessel to stay finite at large theta.
double expected_f(const Stabilizer& st, double theta, const std::vector<double>& nodes,
                  const std::vector<double>& weights) {
    double lo = std::max(0.0, theta - 8.0);
    double hi = theta + 10.0;
    double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        double z = mid + half * nodes[i];
        double d = z - theta;
        double pdf = z * std::exp(-0.5 * d * d) * bessel_i0e(z * theta);
        double fv = interp_lin(st.m, st.f, z);
        num += weights[i] * pdf * fv;
        den += weights[i] * pdf;
    }
    return num / den;
}

}  // namespace

double Stabilizer::forward(double z) const {
    return interp_lin(m, f, z / sigma_g);
}

double Stabilizer::inverse_algebraic(double fval) const {
    return interp_lin(f, m, fval) * sigma_g;
}

double Stabilizer::inverse_unbiased(double d, bool* out_of_range) const {
    if (out_of_range) *out_of_range = false;
    if (d <= efz.front()) {
        if (out_of_range) *out_of_range = d < efz.front();
        return 0.0;
    }
    if (d >= efz.back()) {
        // Beyond the table f is linear with slope 1/s(theta_max).
        double th = theta.back() + (d - efz.back()) * s.back();
        return th * sigma_g;
    }
    return interp_lin(efz, theta, d) * sigma_g;
}

Stabilizer build_stabilizer(double sigma_g, int n_knots, double theta_max) {
    if (!(sigma_g > 0.0)) throw ArgumentError("build_stabilizer requires sigma_g > 0");
    if (n_knots < 16) throw ArgumentError("build_stabilizer requires >= 16 knots");

    Stabilizer st;
    st.sigma_g = sigma_g;
    st.theta.resize(n_knots);
    st.m.resize(n_knots);
    st.s.resize(n_knots);
    st.f.resize(n_knots);
    for (int k = 0; k < n_knots; ++k) {
        double th = theta_max * k / (n_knots - 1.0);
        st.theta[k] = th;
        st.m[k] = rician_mean(th);
        st.s[k] = std::sqrt(correction_factor(th));
    }
    // f on the mean axis: df/dm = 1/s, trapezoid accumulation from m(0).
    st.f[0] = 0.0;
    for (int k = 1; k < n_knots; ++k)
        st.f[k] = st.f[k - 1] +
                  (st.m[k] - st.m[k - 1]) * 0.5 * (1.0 / st.s[k] + 1.0 / st.s[k - 1]);

    std::vector<double> nodes, weights;
    gauss_legendre(40, nodes, weights);
    st.efz.resize(n_knots);
    for (int k = 0; k < n_knots; ++k)
        st.efz[k] = expected_f(st, st.theta[k], nodes, weights);
    return st;
}

TimeSeriesVolume apply_vst(const TimeSeriesVolume& volume, const Stabilizer& stab) {
    if (volume.value_kind != ValueKind::intensity)
        throw ArgumentError("apply_vst expects an intensity volume");
    TimeSeriesVolume out = volume;
    out.value_kind = ValueKind::stabilized;
    for (std::size_t i = 0; i < volume.data.size(); ++i) {
        float z = volume.data[i];
        if (z < 0.0f || !std::isfinite(z)) throw DataError("apply_vst: negative or non-finite input");
        out.data[i] = static_cast<float>(stab.forward(z));
    }
    return out;
}

TimeSeriesVolume apply_ivst(const TimeSeriesVolume& volume, const Stabilizer& stab,
                            std::uint64_t* diag_clamped) {
    if (volume.value_kind != ValueKind::stabilized)
        throw ArgumentError("apply_ivst expects a stabilized volume");
    TimeSeriesVolume out = volume;
    out.value_kind = ValueKind::intensity;
    std::uint64_t clamped = 0;
    for (std::size_t i = 0; i < volume.data.size(); ++i) {
        bool oor = false;
        double y = stab.inverse_unbiased(volume.data[i], &oor);
        if (oor) ++clamped;
        out.data[i] = static_cast<float>(y);
    }
    if (diag_clamped) *diag_clamped = clamped;
    return out;
}

RicianStats estimate_sigma_vst(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                               double initial_sigma) {
    if (roi.empty()) throw ArgumentError("estimate_sigma_vst: empty ROI");
    if (!(initial_sigma > 0.0)) throw ArgumentError("estimate_sigma_vst: initial_sigma must be > 0");
    if (volume.n_time < 2) throw ArgumentError("estimate_sigma_vst needs >= 2 scans");

    const double inv_sqrt2 = 0.7071067811865476;
    std::vector<double> resid(roi.size() * static_cast<std::size_t>(volume.n_time - 1));
    std::vector<double> work(resid.size());

    double sigma = initial_sigma;
    int it = 0;
    for (; it < 50; ++it) {
        Stabilizer st = build_stabilizer(sigma);
        std::size_t idx = 0;
        for (std::size_t v : roi) {
            const float* s = volume.series(v);
            double prev = st.forward(std::max(0.0f, s[0]));
            for (int t = 1; t < volume.n_time; ++t) {
                double cur = st.forward(std::max(0.0f, s[t]));
                resid[idx++] = (cur - prev) * inv_sqrt2;
                prev = cur;
            }
        }
        // Robust std: 1.4826 * MAD.
        work = resid;
        std::nth_element(work.begin(), work.begin() + work.size() / 2, work.end());
        double med = work[work.size() / 2];
        for (double& w : work) w = std::abs(w - med);
        std::nth_element(work.begin(), work.begin() + work.size() / 2, work.end());
        double shat = 1.4826 * work[work.size() / 2];

        if (!(shat > 0.0)) {
            // Degenerate (noiseless) input: the update would collapse to zero.
            RicianStats out;
            out.sigma_g = 0.0;
            out.snr = std::numeric_limits<double>::infinity();
            out.method = NoiseMethod::vst_iterative;
            out.iterations = it + 1;
            return out;
        }
        sigma *= shat;
        if (sigma < 1e-6 * initial_sigma || sigma > 1e6 * initial_sigma)
            throw ConvergenceError("estimate_sigma_vst diverged");
        if (std::abs(shat - 1.0) < 0.01) {
            ++it;
            break;
        }
    }

    // Representative signal level over the ROI for the SNR report.
    double sum = 0.0;
    for (std::size_t v : roi) {
        const float* s = volume.series(v);
        for (int t = 0; t < volume.n_time; ++t) sum += s[t];
    }
    double mu = sum / (static_cast<double>(roi.size()) * volume.n_time);

    RicianStats out;
    out.sigma_g = sigma;
    out.y_hat = debias_magnitude(mu, sigma);
    out.snr = out.y_hat / sigma;
    out.method = NoiseMethod::vst_iterative;
    out.iterations = it;
    return out;
}

}  // namespace tscf
