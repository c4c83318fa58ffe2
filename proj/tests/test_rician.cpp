#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tscf/phantom.hpp"
#include "tscf/rician.hpp"

using namespace tscf;

TEST_CASE("bessel: values at zero and against the series oracle") {
    CHECK(bessel_i(0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bessel_i(1, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(bessel_i(0, 1.0) == doctest::Approx(1.26606587775200833559824).epsilon(1e-12));

    for (double x : {0.05, 0.5, 1.0, 2.3, 5.0, 9.7, 14.0, 17.9, 18.1, 25.0, 60.0, 200.0}) {
        for (int order : {0, 1}) {
            double oracle = testutil::series_bessel_i(order, x);
            CHECK(bessel_i(order, x) == doctest::Approx(oracle).epsilon(1e-10));
        }
    }
    // Scaled forms: continuous across the series/asymptotic switch and finite
    // far beyond the overflow point of the unscaled function.
    CHECK(bessel_i0e(17.999999) == doctest::Approx(bessel_i0e(18.000001)).epsilon(1e-10));
    CHECK(bessel_i1e(17.999999) == doctest::Approx(bessel_i1e(18.000001)).epsilon(1e-10));
    CHECK(std::isfinite(bessel_i0e(1e6)));
    CHECK(bessel_i1e(1e6) < bessel_i0e(1e6));
}

TEST_CASE("correction factor: endpoints, limit, monotone rise toward 1") {
    CHECK(correction_factor(0.0) == doctest::Approx(2.0 - M_PI / 2.0).epsilon(1e-14));
    CHECK(std::abs(correction_factor(50.0) - 1.0) < 1e-3);
    CHECK(correction_factor(5.0) == doctest::Approx(0.979088533051683).epsilon(1e-12));

    double prev = correction_factor(0.0);
    CHECK(prev > 0.42);
    CHECK(prev < 0.43);
    for (int i = 1; i <= 600; ++i) {
        double cur = correction_factor(i * 0.1);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }
}

TEST_CASE("correction factor matches Monte-Carlo variance ratio") {
    double sigma = 3.0;
    for (double theta : {1.0, 2.0, 5.0}) {
        auto m = testutil::rician_moments_mc(theta * sigma, sigma, 1000000, 42 + int(theta));
        double ratio = m.var / (sigma * sigma);
        CHECK(ratio == doctest::Approx(correction_factor(theta)).epsilon(0.02));
    }
}

TEST_CASE("analytic xi derivative matches central differences") {
    for (double theta : {0.1, 0.7, 1.5, 3.0, 8.0, 20.0}) {
        double h = 1e-6 * std::max(1.0, theta);
        double fd = (correction_factor(theta + h) - correction_factor(theta - h)) / (2 * h);
        CHECK(correction_factor_deriv(theta) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("fixed point: boundary ratio gives the degenerate near-zero root") {
    double r = snr_ratio_threshold();
    CHECK(r == doctest::Approx(1.91305838027110).epsilon(1e-12));
    RicianStats st = fixed_point_snr(r, 1.0);
    CHECK(st.snr < 0.25);
}

TEST_CASE("fixed point: below-threshold ratio raises the fallback error") {
    CHECK_THROWS_AS(fixed_point_snr(1.0, 1.0), ConvergenceError);
    CHECK_THROWS_AS(fixed_point_snr(1.5, 1.0), ConvergenceError);
}

TEST_CASE("fixed point: recovers sigma and signal from Monte-Carlo moments") {
    double y = 100.0, sigma = 5.0;
    auto m = testutil::rician_moments_mc(y, sigma, 10000, 99);
    RicianStats st = fixed_point_snr(m.mean, std::sqrt(m.var));
    CHECK(st.sigma_g == doctest::Approx(sigma).epsilon(0.05));
    CHECK(st.y_hat == doctest::Approx(y).epsilon(0.01));
    CHECK(st.method == NoiseMethod::fixed_point);
}

TEST_CASE("fixed point consistency: theta solves its own equation") {
    for (double r : {1.95, 2.5, 4.0, 10.0, 40.0}) {
        RicianStats st = fixed_point_snr(r, 1.0);
        double rhs = std::sqrt(correction_factor(st.snr) * (1.0 + r * r) - 2.0);
        CHECK(st.snr == doctest::Approx(rhs).epsilon(1e-8));
    }
    // Finite-difference derivative path reaches the same root.
    RicianStats a = fixed_point_snr(4.0, 1.0, true);
    RicianStats b = fixed_point_snr(4.0, 1.0, false);
    CHECK(a.snr == doctest::Approx(b.snr).epsilon(1e-9));
}

TEST_CASE("estimator consistency: error shrinks when samples quadruple") {
    double sigma = 2.0, theta = 5.0;
    auto mean_abs_err = [&](std::size_t n, std::uint64_t seed0) {
        double acc = 0.0;
        int trials = 24;
        for (int t = 0; t < trials; ++t) {
            auto m = testutil::rician_moments_mc(theta * sigma, sigma, n, seed0 + t);
            RicianStats st = fixed_point_snr(m.mean, std::sqrt(m.var));
            acc += std::abs(st.sigma_g - sigma);
        }
        return acc / trials;
    };
    double e1 = mean_abs_err(2000, 1000);
    double e2 = mean_abs_err(8000, 5000);
    CHECK(e2 < 0.75 * e1);  // ~0.5 expected; slack for MC noise
}

TEST_CASE("debias_magnitude inverts the Rician mean") {
    double sigma = 4.0;
    for (double theta : {0.5, 1.2, 3.0, 10.0}) {
        double mu = rician_mean(theta) * sigma;
        CHECK(debias_magnitude(mu, sigma) == doctest::Approx(theta * sigma).epsilon(1e-8));
    }
    // At or below the Rayleigh mean there is no positive solution.
    CHECK(debias_magnitude(std::sqrt(M_PI / 2.0) * sigma, sigma) == 0.0);
    CHECK(debias_magnitude(0.5 * sigma, sigma) == 0.0);
}

TEST_CASE("estimate_noise_dual: homogeneous ROI takes the fixed-point path") {
    // 500 voxels x 10 pre-contrast scans of the same true level.
    double y = 6.326, sigma = 5.0;
    TimeSeriesVolume vol = make_volume({50, 10}, 12, 6.0, ValueKind::intensity);
    testutil::RicianSampler smp(2024);
    for (auto& v : vol.data) v = static_cast<float>(smp.draw(y, sigma));
    std::vector<std::size_t> roi(vol.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;

    RicianStats st = estimate_noise_dual(vol, roi, 0, 10, true);
    CHECK(st.method == NoiseMethod::fixed_point);
    CHECK(st.sigma_g == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("estimate_noise_dual: heterogeneous flag routes to the VST estimator") {
    double sigma = 4.0;
    TimeSeriesVolume vol = make_volume({12, 12}, 40, 6.0, ValueKind::intensity);
    testutil::RicianSampler smp(77);
    Rng lv(5);
    for (std::size_t v = 0; v < vol.n_voxels(); ++v) {
        double level = 20.0 + 60.0 * lv.next_unit();
        float* s = vol.series(v);
        for (int t = 0; t < vol.n_time; ++t) s[t] = static_cast<float>(smp.draw(level, sigma));
    }
    std::vector<std::size_t> roi(vol.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;

    RicianStats st = estimate_noise_dual(vol, roi, 0, 10, false);
    CHECK(st.method == NoiseMethod::vst_iterative);
    CHECK(st.sigma_g == doctest::Approx(sigma).epsilon(0.12));
}

TEST_CASE("estimate_noise_dual: noiseless input yields a near-zero sigma") {
    TimeSeriesVolume vol = make_volume({6, 6}, 10, 6.0, ValueKind::intensity, 50.0f);
    std::vector<std::size_t> roi(vol.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
    RicianStats st = estimate_noise_dual(vol, roi, 0, 10, true);
    CHECK(st.sigma_g < 1e-6 * 50.0);
}

TEST_CASE("estimate_noise_dual rejects an empty ROI") {
    TimeSeriesVolume vol = make_volume({2, 2}, 4, 6.0, ValueKind::intensity, 1.0f);
    CHECK_THROWS_AS(estimate_noise_dual(vol, {}, 0, 2, true), ArgumentError);
}
