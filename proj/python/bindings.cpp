#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tscf/metrics.hpp"
#include "tscf/phantom.hpp"
#include "tscf/pipeline.hpp"
#include "tscf/pk.hpp"
#include "tscf/rician.hpp"
#include "tscf/tscf_filter.hpp"
#include "tscf/volume_io.hpp"
#include "tscf/vst.hpp"

namespace py = pybind11;
using namespace tscf;

namespace {

// Volumes cross the boundary as float32 arrays shaped (spatial..., time).
TimeSeriesVolume volume_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr,
                                   double dt_seconds, ValueKind kind) {
    if (arr.ndim() < 2 || arr.ndim() > 4)
        throw ArgumentError("expected an array shaped (spatial..., time)");
    TimeSeriesVolume v;
    for (int a = 0; a + 1 < arr.ndim(); ++a) v.dims.push_back(static_cast<int>(arr.shape(a)));
    v.n_time = static_cast<int>(arr.shape(arr.ndim() - 1));
    v.dt_seconds = dt_seconds;
    v.value_kind = kind;
    v.data.assign(arr.data(), arr.data() + arr.size());
    v.validate();
    return v;
}

py::array_t<float> array_from_volume(const TimeSeriesVolume& v) {
    std::vector<py::ssize_t> shape;
    for (int d : v.dims) shape.push_back(d);
    shape.push_back(v.n_time);
    py::array_t<float> arr(shape);
    std::copy(v.data.begin(), v.data.end(), arr.mutable_data());
    return arr;
}

py::array_t<double> map_field(const std::vector<double>& field, const std::vector<int>& dims) {
    std::vector<py::ssize_t> shape(dims.begin(), dims.end());
    py::array_t<double> arr(shape);
    std::copy(field.begin(), field.end(), arr.mutable_data());
    return arr;
}

py::dict param_map_to_dict(const ParamMap& m) {
    py::dict d;
    d["ktrans"] = map_field(m.ktrans, m.dims);
    d["ve"] = map_field(m.ve, m.dims);
    d["kep"] = map_field(m.kep, m.dims);
    d["residual"] = map_field(m.residual, m.dims);
    std::vector<double> conv(m.converged.begin(), m.converged.end());
    d["converged"] = map_field(conv, m.dims);
    std::vector<double> bat(m.bat_index.begin(), m.bat_index.end());
    d["bat_index"] = map_field(bat, m.dims);
    d["roi_mean_bat"] = m.roi_mean_bat;
    return d;
}

std::vector<std::size_t> full_roi(const TimeSeriesVolume& v) {
    std::vector<std::size_t> roi(v.n_voxels());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
    return roi;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Rician noise estimation, temporo-spatial collaborative filtering, and "
              "Tofts-model fitting for DCE-MRI time series";

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // Rician statistics
    m.def("bessel_i", &bessel_i, py::arg("order"), py::arg("x"));
    m.def("correction_factor", py::vectorize(&correction_factor), py::arg("theta"));
    m.def("rician_mean", py::vectorize(&rician_mean), py::arg("theta"));
    m.def("snr_ratio_threshold", &snr_ratio_threshold);
    m.def("debias_magnitude", &debias_magnitude, py::arg("mu_m"), py::arg("sigma_g"));
    m.def(
        "fixed_point_snr",
        [](double mu, double sd) {
            RicianStats st = fixed_point_snr(mu, sd);
            py::dict d;
            d["sigma_g"] = st.sigma_g;
            d["snr"] = st.snr;
            d["y_hat"] = st.y_hat;
            d["iterations"] = st.iterations;
            return d;
        },
        py::arg("mu_m"), py::arg("sigma_m"));

    // SPGR / Tofts forward models
    m.def(
        "spgr_signal",
        [](double y0, double ct, double tr_ms, double flip_deg, double t10_ms, double r1) {
            AcquisitionParams acq;
            acq.tr_ms = tr_ms;
            acq.flip_angle_deg = flip_deg;
            acq.r1 = r1;
            return spgr_signal(y0, ct, acq, t10_ms);
        },
        py::arg("y0"), py::arg("ct"), py::arg("tr_ms") = 5.0, py::arg("flip_angle_deg") = 30.0,
        py::arg("t10_ms") = 1000.0, py::arg("r1") = 0.0045);
    m.def(
        "horsfield_forward",
        [](const std::vector<double>& cp, double ktrans, double ve, double dt_s) {
            std::vector<double> ct;
            horsfield_forward(cp, ktrans, ve, dt_s, ct);
            return ct;
        },
        py::arg("cp"), py::arg("ktrans"), py::arg("ve"), py::arg("dt_s"));

    // Noise injection and restoration
    m.def(
        "add_rician_noise",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           double sigma, std::uint64_t seed, int threads) {
            auto v = volume_from_array(arr, dt, ValueKind::intensity);
            return array_from_volume(add_rician_noise(v, sigma, seed, threads));
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("sigma_g"), py::arg("seed") = 0,
        py::arg("threads") = 1);

    py::class_<Stabilizer>(m, "Stabilizer")
        .def_readonly("sigma_g", &Stabilizer::sigma_g)
        .def("forward", py::vectorize([](const Stabilizer& s, double z) { return s.forward(z); }))
        .def("inverse_algebraic", py::vectorize([](const Stabilizer& s, double f) {
                 return s.inverse_algebraic(f);
             }))
        .def("inverse_unbiased", py::vectorize([](const Stabilizer& s, double d) {
                 return s.inverse_unbiased(d);
             }));
    m.def("build_stabilizer", &build_stabilizer, py::arg("sigma_g"), py::arg("n_knots") = 1024,
          py::arg("theta_max") = 60.0);
    m.def(
        "apply_vst",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           const Stabilizer& stab) {
            auto v = volume_from_array(arr, dt, ValueKind::intensity);
            return array_from_volume(apply_vst(v, stab));
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("stabilizer"));
    m.def(
        "apply_ivst",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           const Stabilizer& stab) {
            auto v = volume_from_array(arr, dt, ValueKind::stabilized);
            return array_from_volume(apply_ivst(v, stab));
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("stabilizer"));

    // Collaborative filtering
    py::class_<TscfConfig>(m, "TscfConfig")
        .def(py::init<>())
        .def_readwrite("zeta_sim", &TscfConfig::zeta_sim)
        .def_readwrite("tau_dist", &TscfConfig::tau_dist)
        .def_readwrite("max_cluster", &TscfConfig::max_cluster)
        .def_readwrite("tau_shrink", &TscfConfig::tau_shrink)
        .def_readwrite("max_iters", &TscfConfig::max_iters)
        .def_readwrite("stop_rel_tol", &TscfConfig::stop_rel_tol)
        .def_readwrite("sigma_v", &TscfConfig::sigma_v);
    m.def("default_zeta_sim", &TscfConfig::default_zeta_sim, py::arg("n_time"),
          py::arg("sigma_v") = 1.0, py::arg("c") = 1.5);
    m.def(
        "tscf_denoise",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           const TscfConfig& cfg, int threads) {
            auto v = volume_from_array(arr, dt, ValueKind::stabilized);
            return array_from_volume(tscf_denoise(v, cfg, threads));
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("config"), py::arg("threads") = 1);
    m.def(
        "gaussian_smooth",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           double fwhm, int threads) {
            auto v = volume_from_array(arr, dt, ValueKind::intensity);
            return array_from_volume(gaussian_smooth(v, fwhm, threads));
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("fwhm_px"), py::arg("threads") = 1);

    // Phantom
    m.def(
        "generate_dro",
        [](std::uint64_t seed, int threads, double sigma_g) {
            DroSpec spec;
            spec.sigma_g = sigma_g;
            AifModel aif;
            AcquisitionParams acq;
            DroOutput out = generate_dro(spec, aif, acq, seed, threads);
            py::dict d;
            d["noiseless"] = array_from_volume(out.noiseless);
            d["noisy"] = array_from_volume(out.noisy);
            d["truth"] = param_map_to_dict(out.truth);
            d["aif_times"] = out.aif_series.times;
            d["aif_values"] = out.aif_series.values;
            d["aif_upsample"] = out.aif_series.upsample_factor;
            d["dt_seconds"] = spec.dt_s;
            return d;
        },
        py::arg("seed") = 20240901, py::arg("threads") = 1, py::arg("sigma_g") = 5.0);

    // PK estimation
    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("ktrans_min", &FitConfig::ktrans_min)
        .def_readwrite("ktrans_max", &FitConfig::ktrans_max)
        .def_readwrite("ve_min", &FitConfig::ve_min)
        .def_readwrite("ve_max", &FitConfig::ve_max)
        .def_readwrite("n_starts", &FitConfig::n_starts)
        .def_readwrite("max_lbfgs_iters", &FitConfig::max_lbfgs_iters)
        .def_readwrite("grad_tol", &FitConfig::grad_tol)
        .def_readwrite("cost_tol", &FitConfig::cost_tol);
    m.def(
        "fit_voxel",
        [](const std::vector<double>& ct, const std::vector<double>& cp, double dt_s,
           const FitConfig& cfg, std::uint64_t seed) {
            VoxelFit f = fit_voxel(ct, cp, dt_s, cfg, seed);
            py::dict d;
            d["ktrans"] = f.ktrans;
            d["ve"] = f.ve;
            d["residual"] = f.residual;
            d["converged"] = f.converged;
            return d;
        },
        py::arg("ct"), py::arg("cp"), py::arg("dt_s"), py::arg("config") = FitConfig{},
        py::arg("seed") = 0);
    m.def(
        "fit_volume",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> arr, double dt,
           const std::vector<double>& aif_times, const std::vector<double>& aif_values,
           const std::string& aif_kind, int upsample, const FitConfig& cfg, std::uint64_t seed,
           int threads) {
            auto v = volume_from_array(arr, dt, ValueKind::intensity);
            AifSeries aif;
            aif.times = aif_times;
            aif.values = aif_values;
            aif.kind = aif_kind_from_string(aif_kind);
            aif.upsample_factor = upsample;
            AcquisitionParams acq;
            ParamMap map = fit_volume(v, aif, acq, full_roi(v), cfg, BatConfig{}, seed, threads);
            return param_map_to_dict(map);
        },
        py::arg("volume"), py::arg("dt_seconds"), py::arg("aif_times"), py::arg("aif_values"),
        py::arg("aif_kind") = "plasma_concentration", py::arg("aif_upsample") = 10,
        py::arg("config") = FitConfig{}, py::arg("seed") = 0, py::arg("threads") = 1);

    // Metrics
    m.def(
        "nrmse",
        [](const std::vector<double>& est, const std::vector<double>& truth) {
            std::vector<std::size_t> roi(est.size());
            for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
            return nrmse(est, truth, roi);
        },
        py::arg("estimate"), py::arg("truth"));
    m.def(
        "mssim",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> est,
           py::array_t<double, py::array::c_style | py::array::forcecast> truth) {
            if (est.ndim() != 2 || truth.ndim() != 2) throw ArgumentError("mssim expects 2-D maps");
            std::vector<double> e(est.data(), est.data() + est.size());
            std::vector<double> t(truth.data(), truth.data() + truth.size());
            return mssim(e, t, static_cast<int>(est.shape(0)), static_cast<int>(est.shape(1)));
        },
        py::arg("estimate"), py::arg("truth"));
    m.def("c_statistic", &c_statistic, py::arg("feature"), py::arg("labels"));

    // File pipeline
    m.def(
        "run_pipeline",
        [](const std::string& dro_dir, const std::string& out_dir, const std::string& method,
           int threads, std::uint64_t seed) {
            RunConfig cfg;
            cfg.method = denoise_method_from_string(method);
            cfg.threads = threads;
            cfg.seed = seed;
            EvalReport rep = run_pipeline(cfg, dro_dir, out_dir);
            py::dict d;
            d["method"] = rep.method;
            d["nrmse_ktrans"] = rep.nrmse_ktrans;
            d["nrmse_ve"] = rep.nrmse_ve;
            d["mssim_ktrans"] = rep.mssim_ktrans;
            d["mssim_ve"] = rep.mssim_ve;
            d["bat_std"] = rep.bat_std;
            d["sigma_g_hat"] = rep.sigma_g_hat;
            return d;
        },
        py::arg("dro_dir"), py::arg("out_dir"), py::arg("method") = "tscf", py::arg("threads") = 0,
        py::arg("seed") = 20240901);
    m.def("run_dro_gen", [](const std::string& out_dir, std::uint64_t seed, int threads) {
        RunConfig cfg;
        cfg.seed = seed;
        cfg.threads = threads;
        run_dro_gen(cfg, out_dir);
    }, py::arg("out_dir"), py::arg("seed") = 20240901, py::arg("threads") = 0);

    m.attr("__version__") = TSCF_VERSION;
}
