#include <doctest.h>

#include <cmath>

#include "tscf/metrics.hpp"
#include "tscf/rng.hpp"

using namespace tscf;

namespace {

std::vector<std::size_t> all_roi(std::size_t n) {
    std::vector<std::size_t> roi(n);
    for (std::size_t i = 0; i < n; ++i) roi[i] = i;
    return roi;
}

}  // namespace

TEST_CASE("nrmse: identity, constant offset, invariances") {
    Rng rng(1);
    std::vector<double> truth(100);
    for (auto& v : truth) v = rng.next_unit();
    auto roi = all_roi(truth.size());

    CHECK(nrmse(truth, truth, roi) == 0.0);

    std::vector<double> shifted = truth;
    for (auto& v : shifted) v += 0.05;
    double range = 0.0;
    {
        double lo = truth[0], hi = truth[0];
        for (double v : truth) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        range = hi - lo;
    }
    CHECK(nrmse(shifted, truth, roi) == doctest::Approx(0.05 / range).epsilon(1e-12));

    // Translation invariance: nrmse(a+c, x+c) = nrmse(a, x).
    std::vector<double> est(100);
    for (auto& v : est) v = rng.next_unit();
    std::vector<double> est_c = est, truth_c = truth;
    for (auto& v : est_c) v += 3.7;
    for (auto& v : truth_c) v += 3.7;
    CHECK(nrmse(est_c, truth_c, roi) == doctest::Approx(nrmse(est, truth, roi)).epsilon(1e-12));

    // Scale covariance: nrmse(k a, k x) = nrmse(a, x) for k > 0.
    std::vector<double> est_k = est, truth_k = truth;
    for (auto& v : est_k) v *= 4.25;
    for (auto& v : truth_k) v *= 4.25;
    CHECK(nrmse(est_k, truth_k, roi) == doctest::Approx(nrmse(est, truth, roi)).epsilon(1e-12));

    std::vector<double> constant(100, 2.0);
    CHECK_THROWS_AS(nrmse(est, constant, roi), ArgumentError);
}

TEST_CASE("mssim: identity, symmetry, anticorrelated patch") {
    Rng rng(2);
    int h = 16, w = 16;
    std::vector<double> a(static_cast<std::size_t>(h) * w);
    for (auto& v : a) v = rng.next_unit();

    CHECK(mssim(a, a, h, w) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> b(a.size());
    for (auto& v : b) v = rng.next_unit();
    CHECK(mssim(a, b, h, w) == doctest::Approx(mssim(b, a, h, w)).epsilon(1e-12));

    // Zero-mean patch against its negation: covariance flips sign, SSIM < 0.
    std::vector<double> z(static_cast<std::size_t>(8) * 8), nz(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.1 * static_cast<double>(i % 5));
        nz[i] = -z[i];
    }
    CHECK(mssim(nz, z, 8, 8) < 0.0);

    CHECK_THROWS_AS(mssim(std::vector<double>(49, 0.0), std::vector<double>(49, 0.0), 7, 7),
                    ArgumentError);
}

TEST_CASE("bat_dispersion: trivial values and the two-voxel case") {
    BatResult b;
    b.per_voxel_bat = {10, 10, 10, -1};
    CHECK(bat_dispersion(b) == 0.0);

    b.per_voxel_bat = {10, 12};
    CHECK(bat_dispersion(b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    b.per_voxel_bat = {10, -1, -1};
    CHECK_THROWS_AS(bat_dispersion(b), ArgumentError);
}

TEST_CASE("c_statistic: separation, ties, monotone invariance, one-class error") {
    CHECK(c_statistic({3, 4, 5, 1, 2}, {1, 1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(c_statistic({2, 2, 2, 2}, {1, 0, 1, 0}) == doctest::Approx(0.5));

    Rng rng(3);
    std::vector<double> f(40);
    std::vector<int> lab(40);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = rng.next_gauss();
        lab[i] = rng.next_unit() < 0.4 ? 1 : 0;
    }
    lab[0] = 1;
    lab[1] = 0;
    double base = c_statistic(f, lab);
    std::vector<double> g = f;
    for (auto& v : g) v = std::exp(2.0 * v) + 5.0;  // strictly increasing transform
    CHECK(c_statistic(g, lab) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS(c_statistic({1, 2, 3}, {1, 1, 1}), ArgumentError);
}
