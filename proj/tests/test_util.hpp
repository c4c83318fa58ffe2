#pragma once

// Test-side oracles, independent of the library implementations they check.

#include <cmath>
#include <cstdint>
#include <vector>

#include "tscf/rng.hpp"

namespace testutil {

// Truncated power series for I_n, n in {0,1}; >= 60 terms.
inline double series_bessel_i(int order, double x) {
    double q = x * 0.5;
    double term = order == 0 ? 1.0 : q;
    double sum = term;
    for (int m = 1; m <= 120; ++m) {
        term *= (q * q) / (static_cast<double>(m) * (m + order));
        sum += term;
    }
    return sum;
}

// Deterministic Rician sampler on its own stream constant, so test draws do
// not mirror the library's phantom noise.
struct RicianSampler {
    tscf::Rng rng;
    explicit RicianSampler(std::uint64_t seed) : rng(seed, 0x7465737473ULL) {}
    double draw(double y, double sigma) {
        double nr, ni;
        rng.next_gauss_pair(nr, ni);
        double re = y + sigma * nr;
        double im = sigma * ni;
        return std::sqrt(re * re + im * im);
    }
};

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

inline Moments rician_moments_mc(double y, double sigma, std::size_t n, std::uint64_t seed) {
    RicianSampler s(seed);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = s.draw(y, sigma);
        sum += z;
        sum2 += z * z;
    }
    Moments m;
    m.mean = sum / static_cast<double>(n);
    m.var = (sum2 - sum * m.mean) / static_cast<double>(n - 1);
    return m;
}

// Closed-form Tofts response for a step-onset biexponential AIF (rise = 0):
//   Ct(t) = K sum_i a_i/(m_i - kep) (exp(-kep u) - exp(-m_i u)), u = t - t0 (min).
// Independent check for the quadrature oracle.
inline double tofts_biexp_closed_form(double ktrans, double ve, double a1, double m1, double a2,
                                      double m2, double onset_s, double t_s) {
    if (t_s <= onset_s) return 0.0;
    double u = (t_s - onset_s) / 60.0;
    double kep = ktrans / ve;
    auto one = [&](double a, double mdecay) {
        if (std::abs(mdecay - kep) < 1e-12)
            return a * u * std::exp(-kep * u);
        return a / (mdecay - kep) * (std::exp(-kep * u) - std::exp(-mdecay * u));
    };
    return ktrans * (one(a1, m1) + one(a2, m2));
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace testutil
