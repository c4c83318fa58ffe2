#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tscf/rician.hpp"
#include "tscf/vst.hpp"

using namespace tscf;

namespace {

double mc_stabilized_std(const Stabilizer& st, double theta, std::size_t n, std::uint64_t seed) {
    testutil::RicianSampler smp(seed);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = st.forward(smp.draw(theta * st.sigma_g, st.sigma_g));
        sum += w;
        sum2 += w * w;
    }
    double mean = sum / n;
    return std::sqrt((sum2 - sum * mean) / (n - 1));
}

}  // namespace

TEST_CASE("stabilizer contract: unit noise std across the SNR range") {
    Stabilizer st = build_stabilizer(5.0);
    for (double theta : {2.0, 3.0, 5.0, 10.0, 20.0, 50.0}) {
        double sd = mc_stabilized_std(st, theta, 100000, 31 + int(theta));
        CHECK(sd > 0.9);
        CHECK(sd < 1.1);
    }
    // Tighter check at theta = 5 with a larger sample.
    double sd5 = mc_stabilized_std(st, 5.0, 1000000, 5150);
    CHECK(sd5 > 0.95);
    CHECK(sd5 < 1.05);
}

TEST_CASE("stabilizer is strictly increasing and asymptotically 1/sigma-sloped") {
    Stabilizer st = build_stabilizer(2.0);
    for (std::size_t k = 1; k < st.f.size(); ++k) CHECK(st.f[k] > st.f[k - 1]);

    double z = 50.0 * st.sigma_g;
    double h = 0.01 * st.sigma_g;
    double slope = (st.forward(z + h) - st.forward(z - h)) / (2 * h);
    CHECK(slope == doctest::Approx(1.0 / st.sigma_g).epsilon(0.01));
}

TEST_CASE("unbiased inverse recovers y from the forward expectation") {
    Stabilizer st = build_stabilizer(5.0);
    for (double theta : {3.0, 5.0, 10.0}) {
        double y = theta * st.sigma_g;
        // MC estimate of E[f(z)|y]; 1e6 draws keeps the SE near 0.001.
        testutil::RicianSampler smp(880 + int(theta));
        double acc = 0.0;
        std::size_t n = 1000000;
        for (std::size_t i = 0; i < n; ++i) acc += st.forward(smp.draw(y, st.sigma_g));
        double denoised = acc / n;
        double back = st.inverse_unbiased(denoised);
        CHECK(std::abs(back - y) < 0.01 * st.sigma_g);
    }
}

TEST_CASE("IVST bias bound holds at and above theta = 3") {
    Stabilizer st = build_stabilizer(4.0);
    for (double theta : {3.0, 4.0, 6.0, 12.0}) {
        double y = theta * st.sigma_g;
        testutil::RicianSampler smp(12000 + int(theta));
        double acc = 0.0;
        std::size_t n = 100000;
        for (std::size_t i = 0; i < n; ++i) acc += st.forward(smp.draw(y, st.sigma_g));
        double back = st.inverse_unbiased(acc / n);
        CHECK(std::abs(back - y) <= 0.05 * st.sigma_g);
    }
}

TEST_CASE("algebraic inverse is the exact round trip of the forward table") {
    Stabilizer st = build_stabilizer(3.0);
    for (double v : {0.1, 0.8, 1.5, 3.0, 7.7, 30.0, 100.0}) {
        double z = v * st.sigma_g;
        double back = st.inverse_algebraic(st.forward(z));
        CHECK(back == doctest::Approx(z).epsilon(1e-6));
    }
}

TEST_CASE("noiseless round trip through the unbiased inverse: documented bias curve") {
    // The unbiased inverse maps f(y) (not E[f(z)|y]) slightly low; the bias
    // shrinks like the Rician mean offset and is below 1% relative for
    // theta >= 8, while staying bounded in sigma units at theta >= 3.
    Stabilizer st = build_stabilizer(5.0);
    for (double theta : {8.0, 10.0, 20.0, 50.0}) {
        double y = theta * st.sigma_g;
        double back = st.inverse_unbiased(st.forward(y));
        CHECK(std::abs(back - y) / y < 0.01);
    }
    for (double theta : {3.0, 4.0, 5.0}) {
        double y = theta * st.sigma_g;
        double back = st.inverse_unbiased(st.forward(y));
        CHECK(std::abs(back - y) < 0.2 * st.sigma_g);
    }
}

TEST_CASE("apply_vst / apply_ivst volume plumbing") {
    Stabilizer st = build_stabilizer(5.0);
    TimeSeriesVolume v = make_volume({4, 4}, 6, 6.0, ValueKind::intensity, 40.0f);
    TimeSeriesVolume w = apply_vst(v, st);
    CHECK(w.value_kind == ValueKind::stabilized);
    for (float x : w.data) CHECK(x == w.data[0]);  // constant in, constant out

    std::uint64_t clamped = 0;
    TimeSeriesVolume back = apply_ivst(w, st, &clamped);
    CHECK(back.value_kind == ValueKind::intensity);
    CHECK(clamped == 0);
    // theta = 8 here, so the documented round-trip tolerance applies.
    CHECK(back.data[0] == doctest::Approx(40.0).epsilon(0.01));

    TimeSeriesVolume neg = v;
    neg.value_kind = ValueKind::intensity;
    neg.data[3] = -1.0f;
    CHECK_THROWS_AS(apply_vst(neg, st), DataError);
    CHECK_THROWS_AS(apply_vst(w, st), ArgumentError);       // wrong kind
    CHECK_THROWS_AS(apply_ivst(v, st), ArgumentError);      // wrong kind
}

TEST_CASE("stabilized residual std is level-independent across blocks") {
    // 30 homogeneous blocks spanning theta ~ 1.8 .. 20; after VST each block's
    // residual std sits in [0.9, 1.1] and varies below 10% across blocks.
    double sigma = 5.0;
    Stabilizer st = build_stabilizer(sigma);
    testutil::RicianSampler smp(443);
    double mn = 1e9, mx = -1e9;
    for (int b = 0; b < 30; ++b) {
        double theta = 1.8 + (20.0 - 1.8) * b / 29.0;
        double sd = 0.0, sum = 0.0, sum2 = 0.0;
        std::size_t n = 6100;
        for (std::size_t i = 0; i < n; ++i) {
            double w = st.forward(smp.draw(theta * sigma, sigma));
            sum += w;
            sum2 += w * w;
        }
        double mean = sum / n;
        sd = std::sqrt((sum2 - sum * mean) / (n - 1));
        CHECK(sd > 0.9);
        CHECK(sd < 1.1);
        mn = std::min(mn, sd);
        mx = std::max(mx, sd);
    }
    CHECK((mx - mn) / (0.5 * (mx + mn)) < 0.10);
}

TEST_CASE("estimate_sigma_vst recovers sigma on trending heterogeneous data") {
    double sigma = 5.0;
    TimeSeriesVolume vol = make_volume({20, 30}, 61, 6.0, ValueKind::intensity);
    testutil::RicianSampler smp(321);
    Rng lv(9);
    for (std::size_t v = 0; v < vol.n_voxels(); ++v) {
        double base = 9.0 + 3.0 * lv.next_unit();
        double gain = 0.2 + 0.8 * lv.next_unit();
        float* s = vol.series(v);
        for (int t = 0; t < vol.n_time; ++t) {
            double tt = t * 6.0;
            double trend = 1.0 + gain * (tt > 60.0 ? 1.0 - std::exp(-(tt - 60.0) / 80.0) : 0.0);
            s[t] = static_cast<float>(smp.draw(base * trend * 3.0, sigma));
        }
    }
    std::vector<std::size_t> roi(vol.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;

    RicianStats st = estimate_sigma_vst(vol, roi, 2.0);
    CHECK(st.method == NoiseMethod::vst_iterative);
    CHECK(st.sigma_g == doctest::Approx(sigma).epsilon(0.10));

    // Starting at the answer converges immediately.
    RicianStats st2 = estimate_sigma_vst(vol, roi, st.sigma_g);
    CHECK(st2.iterations <= 3);
    CHECK(st2.sigma_g == doctest::Approx(st.sigma_g).epsilon(0.03));
}

TEST_CASE("estimate_sigma_vst on noiseless input reports zero sigma") {
    TimeSeriesVolume vol = make_volume({5, 5}, 10, 6.0, ValueKind::intensity, 25.0f);
    std::vector<std::size_t> roi(vol.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
    RicianStats st = estimate_sigma_vst(vol, roi, 1.0);
    CHECK(st.sigma_g < 1e-3 * 25.0);
}
