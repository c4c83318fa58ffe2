#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tscf/phantom.hpp"
#include "tscf/rician.hpp"

using namespace tscf;

TEST_CASE("spgr signal: frozen pre-contrast value and the baseline identity") {
    AcquisitionParams acq;  // TR 5 ms, flip 30, T10 1000/1440, r1 0.0045, hct 0.45
    acq.validate();
    // High-precision evaluation of the pre-contrast signal for S0 = 500.
    CHECK(spgr_signal(500.0, 0.0, acq, 1000.0) ==
          doctest::Approx(9.01616093076017).epsilon(1e-12));
    // ct = 0 leaves the ratio y(t)/y(0) at exactly 1 for any parameters.
    AcquisitionParams other;
    other.tr_ms = 4.2;
    other.flip_angle_deg = 17.0;
    double y0 = spgr_signal(123.0, 0.0, other, 800.0);
    CHECK(spgr_signal(123.0, 0.0, other, 800.0) / y0 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tofts oracle: zero transfer and causality") {
    AifModel aif;
    std::vector<double> times;
    for (int t = 0; t < 61; ++t) times.push_back(6.0 * t);
    auto zero = tofts_concentration_oracle(aif, 0.0, 0.2, times);
    for (double c : zero) CHECK(c == 0.0);

    auto ct = tofts_concentration_oracle(aif, 0.1, 0.2, times);
    for (int t = 0; t <= 10; ++t) CHECK(ct[static_cast<std::size_t>(t)] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ct[12] > 0.0);
}

TEST_CASE("tofts oracle agrees with the closed form for a step-onset biexponential") {
    AifModel aif;
    aif.rise_s = 0.0;  // closed form exists only for the pure step
    std::vector<double> times;
    for (int t = 0; t < 61; ++t) times.push_back(6.0 * t);
    for (double kt : {0.05, 0.2}) {
        for (double ve : {0.1, 0.4}) {
            auto ct = tofts_concentration_oracle(aif, kt, ve, times, 0.02);
            std::vector<double> closed(times.size());
            for (std::size_t i = 0; i < times.size(); ++i)
                closed[i] = testutil::tofts_biexp_closed_form(kt, ve, aif.a1, aif.m1, aif.a2,
                                                              aif.m2, aif.onset_s, times[i]);
            CHECK(testutil::rel_l2(ct, closed) < 2e-4);
        }
    }
}

TEST_CASE("rician noise: zero sigma is the identity") {
    TimeSeriesVolume v = make_volume({4, 4}, 5, 6.0, ValueKind::intensity, 17.0f);
    TimeSeriesVolume out = add_rician_noise(v, 0.0, 9);
    CHECK(out.data == v.data);
}

TEST_CASE("rician noise: Rayleigh mean at zero signal") {
    TimeSeriesVolume v = make_volume({100, 100}, 100, 6.0, ValueKind::intensity, 0.0f);
    double sigma = 3.0;
    TimeSeriesVolume out = add_rician_noise(v, sigma, 123);
    double sum = 0.0;
    for (float x : out.data) sum += x;
    double mean = sum / static_cast<double>(out.data.size());
    CHECK(mean == doctest::Approx(sigma * std::sqrt(M_PI / 2.0)).epsilon(0.02));
}

TEST_CASE("rician noise: variance ratio matches the correction factor at theta = 5") {
    double sigma = 4.0, theta = 5.0;
    TimeSeriesVolume v = make_volume({100, 100}, 100, 6.0, ValueKind::intensity,
                                     static_cast<float>(theta * sigma));
    TimeSeriesVolume out = add_rician_noise(v, sigma, 321);
    double sum = 0.0, sum2 = 0.0;
    for (float x : out.data) {
        sum += x;
        sum2 += static_cast<double>(x) * x;
    }
    double n = static_cast<double>(out.data.size());
    double mean = sum / n;
    double var = (sum2 - sum * mean) / (n - 1.0);
    CHECK(var / (sigma * sigma) == doctest::Approx(correction_factor(theta)).epsilon(0.02));
}

TEST_CASE("rician noise: positive bias at moderate SNR and thread-count independence") {
    double sigma = 5.0, y = 3.0 * sigma;
    TimeSeriesVolume v = make_volume({60, 60}, 60, 6.0, ValueKind::intensity,
                                     static_cast<float>(y));
    TimeSeriesVolume a = add_rician_noise(v, sigma, 777, 1);
    TimeSeriesVolume b = add_rician_noise(v, sigma, 777, 8);
    CHECK(a.data == b.data);  // bit-identical across thread counts

    double sum = 0.0;
    for (float x : a.data) sum += x;
    CHECK(sum / static_cast<double>(a.data.size()) > y);
}

TEST_CASE("generate_dro: layout, pre-contrast window, exact truth blocks") {
    DroSpec spec;
    AifModel aif;
    AcquisitionParams acq;
    DroOutput dro = generate_dro(spec, aif, acq, 42);

    CHECK(dro.noiseless.dims == std::vector<int>{70, 50});
    CHECK(dro.noiseless.n_time == 61);
    CHECK(dro.noisy.dims == dro.noiseless.dims);
    CHECK(dro.aif_series.values.size() == 610);
    CHECK(dro.aif_series.upsample_factor == 10);

    // Injection at 60 s with 6 s sampling: the first 10 scans sit at baseline
    // everywhere (tissue and blood).
    for (std::size_t v = 0; v < dro.noiseless.n_voxels(); ++v) {
        const float* s = dro.noiseless.series(v);
        for (int t = 1; t < 10; ++t) CHECK(s[t] == s[0]);
        CHECK(s[60] > s[0]);  // enhanced by the end for every voxel
    }

    // Truth map carries the exact grid values per 10x10 block.
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 50; ++x) {
            std::size_t vox = static_cast<std::size_t>(y) * 50 + x;
            CHECK(dro.truth.ktrans[vox] == spec.ktrans_grid[static_cast<std::size_t>(y / 10)]);
            CHECK(dro.truth.ve[vox] == spec.ve_grid[static_cast<std::size_t>(x / 10)]);
        }

    // 30 distinct (ktrans, ve) combinations over the tissue region.
    CHECK(spec.ktrans_grid.size() * spec.ve_grid.size() == 30);

    // AIF ROI rows hold one shared blood series.
    const float* blood = dro.noiseless.series(static_cast<std::size_t>(60) * 50);
    for (int y = 60; y < 70; ++y)
        for (int x = 0; x < 50; ++x) {
            const float* s = dro.noiseless.series(static_cast<std::size_t>(y) * 50 + x);
            for (int t = 0; t < 61; ++t) CHECK(s[t] == blood[t]);
        }
}

TEST_CASE("generate_dro: noiseless tissue rises monotonically to its peak") {
    DroSpec spec;
    AifModel aif;
    AcquisitionParams acq;
    DroOutput dro = generate_dro(spec, aif, acq, 43);
    for (int by = 0; by < 6; ++by)
        for (int bx = 0; bx < 5; ++bx) {
            const float* s =
                dro.noiseless.series(static_cast<std::size_t>(by * 10 + 5) * 50 + bx * 10 + 5);
            int peak = 0;
            for (int t = 1; t < 61; ++t)
                if (s[t] > s[peak]) peak = t;
            for (int t = 1; t <= peak; ++t) CHECK(s[t] >= s[t - 1]);
        }
}

TEST_CASE("generate_dro rejects inconsistent specs") {
    DroSpec spec;
    spec.injection_time_s = 500.0;  // past the end of the scan
    AifModel aif;
    AcquisitionParams acq;
    CHECK_THROWS_AS(generate_dro(spec, aif, acq, 1), ArgumentError);
}
