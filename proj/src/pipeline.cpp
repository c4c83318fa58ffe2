#include "tscf/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tscf/rician.hpp"
#include "tscf/volume_io.hpp"
#include "tscf/vst.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace tscf {
namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void require_keys(const ordered_json& obj, std::initializer_list<const char*> known,
                  const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ArgumentError("unknown config key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void get_if(const ordered_json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const char* to_string(DenoiseMethod m) {
    switch (m) {
        case DenoiseMethod::none: return "none";
        case DenoiseMethod::gaussian: return "gaussian";
        case DenoiseMethod::tscf: return "tscf";
    }
    return "none";
}

DenoiseMethod denoise_method_from_string(const std::string& s) {
    if (s == "none") return DenoiseMethod::none;
    if (s == "gaussian") return DenoiseMethod::gaussian;
    if (s == "tscf") return DenoiseMethod::tscf;
    throw ArgumentError("unknown denoise method: " + s);
}

void RunConfig::validate() const {
    dro.validate();
    aif.validate();
    acq.validate();
    fit.validate();
    if (threads < 0) throw ArgumentError("threads must be >= 0");
    if (!(gaussian_fwhm_px > 0.0)) throw ArgumentError("gaussian_fwhm_px must be > 0");
    if (!(zeta_sim_chi2_factor > 0.0)) throw ArgumentError("zeta_sim_chi2_factor must be > 0");
    TscfConfig materialized = tscf;
    materialized.zeta_sim =
        zeta_sim_override > 0.0 ? zeta_sim_override
                                : TscfConfig::default_zeta_sim(dro.n_time(), tscf.sigma_v,
                                                                zeta_sim_chi2_factor);
    materialized.validate();
}

RunConfig run_config_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    require_keys(j,
                 {"seed", "threads", "method", "keep_intermediates", "gaussian_fwhm_px",
                  "zeta_sim_chi2_factor", "zeta_sim_override", "dro", "aif", "acquisition",
                  "tscf", "fit", "bat", "noise"},
                 "top level");
    get_if(j, "seed", cfg.seed);
    get_if(j, "threads", cfg.threads);
    if (j.contains("method")) cfg.method = denoise_method_from_string(j.at("method").get<std::string>());
    get_if(j, "keep_intermediates", cfg.keep_intermediates);
    get_if(j, "gaussian_fwhm_px", cfg.gaussian_fwhm_px);
    get_if(j, "zeta_sim_chi2_factor", cfg.zeta_sim_chi2_factor);
    get_if(j, "zeta_sim_override", cfg.zeta_sim_override);

    if (j.contains("dro")) {
        const auto& d = j.at("dro");
        require_keys(d,
                     {"ktrans_grid", "ve_grid", "block_px", "aif_rows", "s0", "duration_s", "dt_s",
                      "injection_time_s", "sigma_g", "aif_upsample"},
                     "dro");
        get_if(d, "ktrans_grid", cfg.dro.ktrans_grid);
        get_if(d, "ve_grid", cfg.dro.ve_grid);
        get_if(d, "block_px", cfg.dro.block_px);
        get_if(d, "aif_rows", cfg.dro.aif_rows);
        get_if(d, "s0", cfg.dro.s0);
        get_if(d, "duration_s", cfg.dro.duration_s);
        get_if(d, "dt_s", cfg.dro.dt_s);
        get_if(d, "injection_time_s", cfg.dro.injection_time_s);
        get_if(d, "sigma_g", cfg.dro.sigma_g);
        get_if(d, "aif_upsample", cfg.dro.aif_upsample);
    }
    if (j.contains("aif")) {
        const auto& a = j.at("aif");
        require_keys(a, {"kind", "a1", "m1", "a2", "m2", "onset_s", "rise_s", "times_s", "values"},
                     "aif");
        if (a.contains("kind")) {
            std::string k = a.at("kind").get<std::string>();
            if (k == "biexponential") cfg.aif.kind = AifModel::Kind::biexponential;
            else if (k == "tabulated") cfg.aif.kind = AifModel::Kind::tabulated;
            else throw ArgumentError("unknown AIF model kind: " + k);
        }
        get_if(a, "a1", cfg.aif.a1);
        get_if(a, "m1", cfg.aif.m1);
        get_if(a, "a2", cfg.aif.a2);
        get_if(a, "m2", cfg.aif.m2);
        get_if(a, "onset_s", cfg.aif.onset_s);
        get_if(a, "rise_s", cfg.aif.rise_s);
        get_if(a, "times_s", cfg.aif.tab_times_s);
        get_if(a, "values", cfg.aif.tab_values);
    }
    if (j.contains("acquisition")) {
        const auto& a = j.at("acquisition");
        require_keys(a, {"tr_ms", "flip_angle_deg", "t10_tissue_ms", "t10_blood_ms", "r1", "hct"},
                     "acquisition");
        get_if(a, "tr_ms", cfg.acq.tr_ms);
        get_if(a, "flip_angle_deg", cfg.acq.flip_angle_deg);
        get_if(a, "t10_tissue_ms", cfg.acq.t10_tissue_ms);
        get_if(a, "t10_blood_ms", cfg.acq.t10_blood_ms);
        get_if(a, "r1", cfg.acq.r1);
        get_if(a, "hct", cfg.acq.hct);
    }
    if (j.contains("tscf")) {
        const auto& t = j.at("tscf");
        require_keys(t,
                     {"tau_dist", "max_cluster", "tau_shrink", "max_iters", "stop_rel_tol",
                      "sigma_v"},
                     "tscf");
        get_if(t, "tau_dist", cfg.tscf.tau_dist);
        get_if(t, "max_cluster", cfg.tscf.max_cluster);
        get_if(t, "tau_shrink", cfg.tscf.tau_shrink);
        get_if(t, "max_iters", cfg.tscf.max_iters);
        get_if(t, "stop_rel_tol", cfg.tscf.stop_rel_tol);
        get_if(t, "sigma_v", cfg.tscf.sigma_v);
    }
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        require_keys(f,
                     {"ktrans_min", "ktrans_max", "ve_min", "ve_max", "n_starts",
                      "max_lbfgs_iters", "grad_tol", "cost_tol", "history_size"},
                     "fit");
        get_if(f, "ktrans_min", cfg.fit.ktrans_min);
        get_if(f, "ktrans_max", cfg.fit.ktrans_max);
        get_if(f, "ve_min", cfg.fit.ve_min);
        get_if(f, "ve_max", cfg.fit.ve_max);
        get_if(f, "n_starts", cfg.fit.n_starts);
        get_if(f, "max_lbfgs_iters", cfg.fit.max_lbfgs_iters);
        get_if(f, "grad_tol", cfg.fit.grad_tol);
        get_if(f, "cost_tol", cfg.fit.cost_tol);
        get_if(f, "history_size", cfg.fit.history_size);
    }
    if (j.contains("bat")) {
        const auto& b = j.at("bat");
        require_keys(b, {"smooth_window", "gradient_fraction", "rise_sigma", "slope_sigma"}, "bat");
        get_if(b, "smooth_window", cfg.bat.smooth_window);
        get_if(b, "gradient_fraction", cfg.bat.gradient_fraction);
        get_if(b, "rise_sigma", cfg.bat.rise_sigma);
        get_if(b, "slope_sigma", cfg.bat.slope_sigma);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        require_keys(n, {"pre_contrast_scans", "homogeneous"}, "noise");
        get_if(n, "pre_contrast_scans", cfg.noise.pre_contrast_scans);
        get_if(n, "homogeneous", cfg.noise.homogeneous);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json_text(read_text_file(path));
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["method"] = to_string(cfg.method);
    j["keep_intermediates"] = cfg.keep_intermediates;
    j["gaussian_fwhm_px"] = cfg.gaussian_fwhm_px;
    j["zeta_sim_chi2_factor"] = cfg.zeta_sim_chi2_factor;
    j["zeta_sim_override"] = cfg.zeta_sim_override;
    j["dro"] = {{"ktrans_grid", cfg.dro.ktrans_grid},
                {"ve_grid", cfg.dro.ve_grid},
                {"block_px", cfg.dro.block_px},
                {"aif_rows", cfg.dro.aif_rows},
                {"s0", cfg.dro.s0},
                {"duration_s", cfg.dro.duration_s},
                {"dt_s", cfg.dro.dt_s},
                {"injection_time_s", cfg.dro.injection_time_s},
                {"sigma_g", cfg.dro.sigma_g},
                {"aif_upsample", cfg.dro.aif_upsample}};
    j["aif"] = {{"kind", cfg.aif.kind == AifModel::Kind::biexponential ? "biexponential"
                                                                       : "tabulated"},
                {"a1", cfg.aif.a1},
                {"m1", cfg.aif.m1},
                {"a2", cfg.aif.a2},
                {"m2", cfg.aif.m2},
                {"onset_s", cfg.aif.onset_s},
                {"rise_s", cfg.aif.rise_s}};
    if (cfg.aif.kind == AifModel::Kind::tabulated) {
        j["aif"]["times_s"] = cfg.aif.tab_times_s;
        j["aif"]["values"] = cfg.aif.tab_values;
    }
    j["acquisition"] = {{"tr_ms", cfg.acq.tr_ms},
                        {"flip_angle_deg", cfg.acq.flip_angle_deg},
                        {"t10_tissue_ms", cfg.acq.t10_tissue_ms},
                        {"t10_blood_ms", cfg.acq.t10_blood_ms},
                        {"r1", cfg.acq.r1},
                        {"hct", cfg.acq.hct}};
    j["tscf"] = {{"tau_dist", cfg.tscf.tau_dist},
                 {"max_cluster", cfg.tscf.max_cluster},
                 {"tau_shrink", cfg.tscf.tau_shrink},
                 {"max_iters", cfg.tscf.max_iters},
                 {"stop_rel_tol", cfg.tscf.stop_rel_tol},
                 {"sigma_v", cfg.tscf.sigma_v}};
    j["fit"] = {{"ktrans_min", cfg.fit.ktrans_min},
                {"ktrans_max", cfg.fit.ktrans_max},
                {"ve_min", cfg.fit.ve_min},
                {"ve_max", cfg.fit.ve_max},
                {"n_starts", cfg.fit.n_starts},
                {"max_lbfgs_iters", cfg.fit.max_lbfgs_iters},
                {"grad_tol", cfg.fit.grad_tol},
                {"cost_tol", cfg.fit.cost_tol},
                {"history_size", cfg.fit.history_size}};
    j["bat"] = {{"smooth_window", cfg.bat.smooth_window},
                {"gradient_fraction", cfg.bat.gradient_fraction},
                {"rise_sigma", cfg.bat.rise_sigma},
                {"slope_sigma", cfg.bat.slope_sigma}};
    j["noise"] = {{"pre_contrast_scans", cfg.noise.pre_contrast_scans},
                  {"homogeneous", cfg.noise.homogeneous}};
    return j.dump(2) + "\n";
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string config_hash(const RunConfig& cfg) {
    // Seed and method are part of reproducibility; thread count is not.
    RunConfig c = cfg;
    c.threads = 0;
    return fnv1a_hex(run_config_to_json_text(c));
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::string& out_dir) {
    ordered_json m;
    m["tool"] = "tscf";
    m["version"] = TSCF_VERSION;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["config_hash"] = config_hash(cfg);
    m["config"] = ordered_json::parse(run_config_to_json_text(cfg));
    write_text_file((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

std::vector<std::size_t> tissue_roi(const DroSpec& spec) {
    std::vector<std::size_t> roi;
    std::size_t nx = static_cast<std::size_t>(spec.width());
    roi.reserve(static_cast<std::size_t>(spec.tissue_rows()) * nx);
    for (int y = 0; y < spec.tissue_rows(); ++y)
        for (std::size_t x = 0; x < nx; ++x) roi.push_back(static_cast<std::size_t>(y) * nx + x);
    return roi;
}

std::vector<std::size_t> aif_roi(const DroSpec& spec) {
    std::vector<std::size_t> roi;
    std::size_t nx = static_cast<std::size_t>(spec.width());
    for (int y = spec.tissue_rows(); y < spec.height(); ++y)
        for (std::size_t x = 0; x < nx; ++x) roi.push_back(static_cast<std::size_t>(y) * nx + x);
    return roi;
}

std::vector<double> truth_block_values(const DroSpec& spec, bool ktrans) {
    std::vector<double> out;
    for (int y = 0; y < spec.tissue_rows(); ++y)
        for (int x = 0; x < spec.width(); ++x)
            out.push_back(ktrans ? spec.ktrans_grid[static_cast<std::size_t>(y / spec.block_px)]
                                 : spec.ve_grid[static_cast<std::size_t>(x / spec.block_px)]);
    return out;
}

void run_dro_gen(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    int threads = resolve_threads(cfg.threads);

    DroOutput dro = generate_dro(cfg.dro, cfg.aif, cfg.acq, cfg.seed, threads);
    fs::path dir(out_dir);
    write_volume(dro.noiseless, (dir / "noiseless").string());
    write_volume(dro.noisy, (dir / "noisy").string());
    write_param_map(dro.truth, cfg.dro.dt_s, (dir / "truth").string());
    write_aif(dro.aif_series, (dir / "aif.csv").string());
    write_manifest(cfg, "dro-gen", out_dir);
}

EvalReport run_pipeline(const RunConfig& cfg, const std::string& dro_dir,
                        const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    int threads = resolve_threads(cfg.threads);
    fs::path in(dro_dir);

    double t_start = now_seconds();

    TimeSeriesVolume noisy = read_volume((in / "noisy").string());
    ParamMap truth = read_param_map((in / "truth").string());
    AifSeries aif = read_aif((in / "aif.csv").string());
    if (noisy.dims != std::vector<int>{cfg.dro.height(), cfg.dro.width()})
        throw ArgumentError("pipeline: volume dims do not match the configured DRO layout");

    std::vector<std::size_t> t_roi = tissue_roi(cfg.dro);
    std::vector<std::size_t> a_roi = aif_roi(cfg.dro);

    // Stage 1: dual noise estimation on the homogeneous AIF ROI pre-contrast.
    int pre = cfg.noise.pre_contrast_scans > 0
                  ? cfg.noise.pre_contrast_scans
                  : static_cast<int>(cfg.dro.injection_time_s / cfg.dro.dt_s);
    pre = std::max(1, std::min(pre, noisy.n_time));
    const std::vector<std::size_t>& noise_roi = a_roi.empty() ? t_roi : a_roi;
    RicianStats noise = estimate_noise_dual(noisy, noise_roi, 0, pre, cfg.noise.homogeneous);

    // Stage 2: signal restoration.
    double t_denoise0 = now_seconds();
    TimeSeriesVolume restored = noisy;
    TscfDiagnostics tscf_diag;
    std::uint64_t ivst_clamped = 0;
    if (cfg.method == DenoiseMethod::tscf) {
        if (!(noise.sigma_g > 0.0))
            throw DataError("pipeline: estimated sigma_g is zero; nothing to stabilize");
        Stabilizer stab = build_stabilizer(noise.sigma_g);
        TimeSeriesVolume stabilized = apply_vst(noisy, stab);
        TscfConfig tcfg = cfg.tscf;
        tcfg.zeta_sim = cfg.zeta_sim_override > 0.0
                            ? cfg.zeta_sim_override
                            : TscfConfig::default_zeta_sim(noisy.n_time, tcfg.sigma_v,
                                                            cfg.zeta_sim_chi2_factor);
        TimeSeriesVolume denoised = tscf_denoise(stabilized, tcfg, threads, &tscf_diag);
        restored = apply_ivst(denoised, stab, &ivst_clamped);
        if (cfg.keep_intermediates) {
            write_volume(stabilized, (fs::path(out_dir) / "stabilized").string());
            write_volume(denoised, (fs::path(out_dir) / "denoised_stabilized").string());
        }
    } else if (cfg.method == DenoiseMethod::gaussian) {
        restored = gaussian_smooth(noisy, cfg.gaussian_fwhm_px, threads);
    }
    double t_denoise = now_seconds() - t_denoise0;
    if (cfg.keep_intermediates && cfg.method != DenoiseMethod::none)
        write_volume(restored, (fs::path(out_dir) / "restored").string());

    // Stage 3: PK estimation on the tissue ROI.
    double t_fit0 = now_seconds();
    FitVolumeDiagnostics fit_diag;
    ParamMap fitted = fit_volume(restored, aif, cfg.acq, t_roi, cfg.fit, cfg.bat, cfg.seed,
                                 threads, &fit_diag);
    double t_fit = now_seconds() - t_fit0;

    write_param_map(fitted, cfg.dro.dt_s, (fs::path(out_dir) / "fitted").string());

    // Metrics against truth over the tissue ROI.
    EvalReport rep;
    rep.method = to_string(cfg.method);
    rep.nrmse_ktrans = nrmse(fitted.ktrans, truth.ktrans, t_roi);
    rep.nrmse_ve = nrmse(fitted.ve, truth.ve, t_roi);

    // MSSIM maps cover the tissue rectangle only.
    int th = cfg.dro.tissue_rows(), tw = cfg.dro.width();
    std::vector<double> est_k(t_roi.size()), tru_k(t_roi.size()), est_v(t_roi.size()),
        tru_v(t_roi.size());
    for (std::size_t i = 0; i < t_roi.size(); ++i) {
        est_k[i] = fitted.ktrans[t_roi[i]];
        tru_k[i] = truth.ktrans[t_roi[i]];
        est_v[i] = fitted.ve[t_roi[i]];
        tru_v[i] = truth.ve[t_roi[i]];
    }
    rep.mssim_ktrans = mssim(est_k, tru_k, th, tw);
    rep.mssim_ve = mssim(est_v, tru_v, th, tw);
    rep.bat_std = bat_dispersion(fit_diag.bat);
    rep.bat_mean = fit_diag.bat.roi_mean_bat;
    rep.sigma_g_hat = noise.sigma_g;
    rep.converged_fraction = fit_diag.n_fitted
                                 ? static_cast<double>(fit_diag.n_converged) /
                                       static_cast<double>(fit_diag.n_fitted)
                                 : 0.0;
    rep.runtime_denoise_s = t_denoise;
    rep.runtime_fit_s = t_fit;
    rep.runtime_total_s = now_seconds() - t_start;
    rep.config_hash = config_hash(cfg);

    ordered_json rj;
    rj["method"] = rep.method;
    rj["nrmse_ktrans"] = rep.nrmse_ktrans;
    rj["nrmse_ve"] = rep.nrmse_ve;
    rj["mssim_ktrans"] = rep.mssim_ktrans;
    rj["mssim_ve"] = rep.mssim_ve;
    rj["bat_std"] = rep.bat_std;
    rj["bat_mean"] = rep.bat_mean;
    rj["sigma_g_hat"] = rep.sigma_g_hat;
    rj["noise_method"] = noise.method == NoiseMethod::fixed_point ? "fixed_point" : "vst_iterative";
    rj["converged_fraction"] = rep.converged_fraction;
    rj["bat_valid_fraction"] = fit_diag.bat.valid_fraction;
    rj["conc_clamped"] = fit_diag.conc_clamped;
    rj["ivst_clamped"] = ivst_clamped;
    rj["tscf_iterations"] = tscf_diag.iterations;
    rj["tscf_degenerate_clusters"] = tscf_diag.degenerate_clusters;
    rj["config_hash"] = rep.config_hash;
    // Wall-clock timings are environment-dependent and live in their own
    // object so reports stay comparable across runs.
    rj["timings"] = {{"denoise_s", rep.runtime_denoise_s},
                     {"fit_s", rep.runtime_fit_s},
                     {"total_s", rep.runtime_total_s}};
    write_text_file((fs::path(out_dir) / "report.json").string(), rj.dump(2) + "\n");

    // Per-block breakdown for offline comparison.
    std::ostringstream csv;
    csv << "block_y,block_x,ktrans_true,ve_true,ktrans_mean,ve_mean,ktrans_rmse,ve_rmse\n";
    int bpx = cfg.dro.block_px;
    int nbx = tw / bpx;
    int nby = th / bpx;
    csv.precision(10);
    for (int by = 0; by < nby; ++by)
        for (int bx = 0; bx < nbx; ++bx) {
            double sk = 0, sv = 0, ssk = 0, ssv = 0;
            int n = 0;
            double kt = cfg.dro.ktrans_grid[static_cast<std::size_t>(by)];
            double ve = cfg.dro.ve_grid[static_cast<std::size_t>(bx)];
            for (int y = by * bpx; y < (by + 1) * bpx; ++y)
                for (int x = bx * bpx; x < (bx + 1) * bpx; ++x) {
                    std::size_t v = static_cast<std::size_t>(y) * tw + x;
                    sk += fitted.ktrans[v];
                    sv += fitted.ve[v];
                    ssk += (fitted.ktrans[v] - kt) * (fitted.ktrans[v] - kt);
                    ssv += (fitted.ve[v] - ve) * (fitted.ve[v] - ve);
                    ++n;
                }
            csv << by << "," << bx << "," << kt << "," << ve << "," << sk / n << "," << sv / n
                << "," << std::sqrt(ssk / n) << "," << std::sqrt(ssv / n) << "\n";
        }
    write_text_file((fs::path(out_dir) / "blocks.csv").string(), csv.str());

    write_manifest(cfg, "pipeline", out_dir);
    return rep;
}

std::vector<BenchRow> run_bench(const RunConfig& cfg, const std::vector<std::pair<int, int>>& sizes,
                                int reps, const std::string& out_dir) {
    cfg.validate();
    if (reps < 1) throw ArgumentError("bench reps must be >= 1");
    int threads = resolve_threads(cfg.threads);

    std::vector<BenchRow> rows;
    for (auto [h, w] : sizes) {
        // Synthetic stabilized volume of the requested size: tiled block
        // signals plus unit noise, matching the pipeline's TSCF input.
        DroSpec spec = cfg.dro;
        spec.aif_rows = 0;
        int blocks_y = std::max(1, h / spec.block_px);
        int blocks_x = std::max(1, w / spec.block_px);
        spec.ktrans_grid.assign(static_cast<std::size_t>(blocks_y), 0.0);
        for (int i = 0; i < blocks_y; ++i)
            spec.ktrans_grid[static_cast<std::size_t>(i)] =
                cfg.dro.ktrans_grid[static_cast<std::size_t>(i) % cfg.dro.ktrans_grid.size()];
        spec.ve_grid.assign(static_cast<std::size_t>(blocks_x), 0.0);
        for (int i = 0; i < blocks_x; ++i)
            spec.ve_grid[static_cast<std::size_t>(i)] =
                cfg.dro.ve_grid[static_cast<std::size_t>(i) % cfg.dro.ve_grid.size()];

        DroOutput dro = generate_dro(spec, cfg.aif, cfg.acq, cfg.seed, threads);
        // Trim to the exact requested extent (block tiling may overshoot).
        TimeSeriesVolume vol = make_volume({h, w}, dro.noisy.n_time, dro.noisy.dt_seconds,
                                           ValueKind::intensity);
        int full_w = spec.width();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float* src = dro.noisy.series(static_cast<std::size_t>(std::min(
                    y, spec.height() - 1)) * full_w + std::min(x, full_w - 1));
                float* dst = vol.series(static_cast<std::size_t>(y) * w + x);
                for (int t = 0; t < vol.n_time; ++t) dst[t] = src[t];
            }

        Stabilizer stab = build_stabilizer(std::max(spec.sigma_g, 1e-3));
        TimeSeriesVolume stabilized = apply_vst(vol, stab);
        TscfConfig tcfg = cfg.tscf;
        tcfg.zeta_sim = cfg.zeta_sim_override > 0.0
                            ? cfg.zeta_sim_override
                            : TscfConfig::default_zeta_sim(vol.n_time, tcfg.sigma_v,
                                                            cfg.zeta_sim_chi2_factor);

        BenchRow row;
        row.height = h;
        row.width = w;
        row.n_time = vol.n_time;
        for (int r = 0; r < reps; ++r) {
            double t0 = now_seconds();
            TimeSeriesVolume den = tscf_denoise(stabilized, tcfg, threads);
            double dt = now_seconds() - t0;
            row.run_seconds.push_back(dt);
            row.mean_seconds += dt;
            (void)den;
        }
        row.mean_seconds /= reps;
        rows.push_back(std::move(row));
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        ordered_json j = ordered_json::array();
        for (const auto& r : rows)
            j.push_back({{"height", r.height},
                         {"width", r.width},
                         {"n_time", r.n_time},
                         {"mean_seconds", r.mean_seconds},
                         {"run_seconds", r.run_seconds}});
        write_text_file((fs::path(out_dir) / "bench.json").string(), j.dump(2) + "\n");
        write_manifest(cfg, "bench", out_dir);
    }
    return rows;
}

}  // namespace tscf
