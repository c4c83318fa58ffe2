#include "tscf/rician.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tscf/vst.hpp"

namespace tscf {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Power series; all terms positive, so no cancellation. Used for x < 18.
double bessel_series(int order, double x) {
    double q = x * 0.5;
    double term = order == 0 ? 1.0 : q;  // m = 0 term
    double sum = term;
    double q2 = q * q;
    for (int m = 1; m < 200; ++m) {
        term *= q2 / (static_cast<double>(m) * (m + order));
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

// Asymptotic expansion of exp(-x) I_nu(x); the recurrence carries the sign.
// Truncation error is below 1e-13 relative for x >= 18.
double scaled_asym(int order, double x) {
    double mu = 4.0 * order * order;
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::max();
    for (int k = 1; k <= 40; ++k) {
        double odd = 2.0 * k - 1.0;
        term *= (odd * odd - mu) / (8.0 * k * x);
        double mag = std::abs(term);
        if (mag >= prev) break;
        sum += term;
        prev = mag;
        if (mag < 1e-17) break;
    }
    return sum / std::sqrt(2.0 * kPi * x);
}

}  // namespace

double bessel_i0e(double x) {
    if (x < 0.0) x = -x;
    if (x < 18.0) return bessel_series(0, x) * std::exp(-x);
    return scaled_asym(0, x);
}

double bessel_i1e(double x) {
    double s = x < 0.0 ? -1.0 : 1.0;
    x = std::abs(x);
    if (x < 18.0) return s * bessel_series(1, x) * std::exp(-x);
    return s * scaled_asym(1, x);
}

double bessel_i(int order, double x) {
    if (order != 0 && order != 1) throw ArgumentError("bessel_i supports orders 0 and 1");
    if (x < 0.0) throw ArgumentError("bessel_i requires x >= 0");
    if (x < 18.0) return bessel_series(order, x);
    return scaled_asym(order, x) * std::exp(x);  // overflows to inf past ~709, as I_n does
}

// Q(theta) = e^{-t} [(2+theta^2) I0(t) + theta^2 I1(t)], t = theta^2/4.
// xi = 2 + theta^2 - (pi/8) Q^2 and m = sqrt(pi/8) Q; dQ/dtheta = theta (i0e + i1e).
static double q_factor(double theta) {
    double t = 0.25 * theta * theta;
    return (2.0 + theta * theta) * bessel_i0e(t) + theta * theta * bessel_i1e(t);
}

double correction_factor(double theta) {
    if (theta < 0.0) throw ArgumentError("correction_factor requires theta >= 0");
    if (theta > 1e4) return 1.0;  // asymptote; Q evaluation would waste cycles
    double q = q_factor(theta);
    return 2.0 + theta * theta - (kPi / 8.0) * q * q;
}

double correction_factor_deriv(double theta) {
    if (theta < 0.0) throw ArgumentError("correction_factor_deriv requires theta >= 0");
    if (theta > 1e4) return 0.0;
    double t = 0.25 * theta * theta;
    double q = q_factor(theta);
    double dq = theta * (bessel_i0e(t) + bessel_i1e(t));
    return 2.0 * theta - (kPi / 4.0) * q * dq;
}

double rician_mean(double theta) {
    if (theta < 0.0) throw ArgumentError("rician_mean requires theta >= 0");
    if (theta > 1e4) return std::sqrt(theta * theta + 1.0);
    return std::sqrt(kPi / 8.0) * q_factor(theta);
}

double rician_mean_deriv(double theta) {
    if (theta > 1e4) return 1.0;
    double t = 0.25 * theta * theta;
    return std::sqrt(kPi / 8.0) * theta * (bessel_i0e(t) + bessel_i1e(t));
}

double snr_ratio_threshold() { return std::sqrt(kPi / (4.0 - kPi)); }

RicianStats fixed_point_snr(double mu_m, double sigma_m, bool use_analytic_deriv) {
    if (!(sigma_m >= 0.0) || !(mu_m >= 0.0))
        throw ArgumentError("fixed_point_snr requires nonnegative moments");

    // Degenerate noiseless input: the ratio is effectively infinite.
    if (sigma_m <= 1e-14 * std::max(mu_m, 1.0)) {
        RicianStats st;
        st.sigma_g = sigma_m;
        st.y_hat = mu_m;
        st.snr = sigma_m > 0.0 ? mu_m / sigma_m : std::numeric_limits<double>::infinity();
        st.method = NoiseMethod::fixed_point;
        return st;
    }

    double r = mu_m / sigma_m;
    if (r < snr_ratio_threshold())
        throw ConvergenceError("magnitude SNR ratio below the fixed-point validity threshold");

    double r2p1 = 1.0 + r * r;
    // Root of g(theta) = xi(theta)(1 + r^2) - 2 - theta^2.
    auto g = [&](double th) { return correction_factor(th) * r2p1 - 2.0 - th * th; };
    auto gp = [&](double th) {
        if (use_analytic_deriv) return correction_factor_deriv(th) * r2p1 - 2.0 * th;
        double h = 1e-6 * std::max(1.0, th);
        double lo = std::max(th - h, 0.0);
        return (g(th + h) - g(lo)) / (th + h - lo);
    };

    double theta = std::max(std::sqrt(std::max(r * r - 1.0, 0.0)), 0.1);
    int it = 0;
    bool converged = false;
    for (; it < 100; ++it) {
        double gv = g(theta);
        double gd = gp(theta);
        if (gd == 0.0) break;
        double next = theta - gv / gd;
        if (next < 0.0) next = 0.5 * theta;
        if (std::abs(next - theta) <= 1e-13 * std::max(1.0, std::abs(next))) {
            theta = next;
            converged = true;
            break;
        }
        theta = next;
    }
    if (!converged && std::abs(g(theta)) > 1e-9 * r2p1)
        throw ConvergenceError("fixed-point SNR iteration did not converge");

    theta = std::max(theta, 0.0);
    RicianStats st;
    st.snr = theta;
    st.sigma_g = sigma_m / std::sqrt(correction_factor(theta));
    st.y_hat = theta * st.sigma_g;
    st.method = NoiseMethod::fixed_point;
    st.iterations = it + 1;
    return st;
}

double debias_magnitude(double mu_m, double sigma_g) {
    if (!(sigma_g > 0.0)) throw ArgumentError("debias_magnitude requires sigma_g > 0");
    double target = mu_m / sigma_g;
    if (target <= rician_mean(0.0)) return 0.0;  // at or below the Rayleigh mean

    double theta = std::sqrt(std::max(target * target - 1.0, 1e-4));
    for (int it = 0; it < 100; ++it) {
        double val = rician_mean(theta) - target;
        double der = rician_mean_deriv(theta);
        double next = theta - val / der;
        if (next < 0.0) next = 0.5 * theta;
        if (std::abs(next - theta) <= 1e-13 * std::max(1.0, next)) {
            theta = next;
            break;
        }
        theta = next;
    }
    return std::max(theta, 0.0) * sigma_g;
}

RicianStats estimate_noise_dual(const TimeSeriesVolume& volume, const std::vector<std::size_t>& roi,
                                int pre_lo, int pre_hi, bool homogeneous) {
    if (roi.empty()) throw ArgumentError("estimate_noise_dual: empty ROI");
    if (pre_lo < 0 || pre_hi > volume.n_time || pre_lo >= pre_hi)
        throw ArgumentError("estimate_noise_dual: pre-contrast range out of bounds");

    // Pool every ROI voxel over the pre-contrast scans.
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t v : roi) {
        const float* s = volume.series(v);
        for (int t = pre_lo; t < pre_hi; ++t) {
            double z = s[t];
            sum += z;
            sum2 += z * z;
            ++n;
        }
    }
    double mu = sum / static_cast<double>(n);
    double var = n > 1 ? (sum2 - sum * mu) / static_cast<double>(n - 1) : 0.0;
    double sd = std::sqrt(std::max(var, 0.0));

    if (homogeneous && (sd <= 1e-14 * std::max(mu, 1.0) || mu / sd >= snr_ratio_threshold()))
        return fixed_point_snr(mu, sd);

    // Heterogeneous ROI (or ratio out of range): VST-based iterative path.
    // Initial guess from raw temporal differences, which are trend-insensitive.
    std::vector<double> diffs;
    diffs.reserve(roi.size() * static_cast<std::size_t>(volume.n_time - 1));
    for (std::size_t v : roi) {
        const float* s = volume.series(v);
        for (int t = 0; t + 1 < volume.n_time; ++t)
            diffs.push_back((static_cast<double>(s[t + 1]) - s[t]) / std::sqrt(2.0));
    }
    std::vector<double> tmp = diffs;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    double med = tmp[tmp.size() / 2];
    for (double& d : tmp) d = std::abs(d - med);
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    double initial = 1.4826 * tmp[tmp.size() / 2];
    if (!(initial > 0.0)) initial = std::max(1e-6 * std::max(mu, 1.0), 1e-12);

    return estimate_sigma_vst(volume, roi, initial);
}

}  // namespace tscf
