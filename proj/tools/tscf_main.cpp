#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tscf/pipeline.hpp"
#include "tscf/rician.hpp"
#include "tscf/volume_io.hpp"
#include "tscf/vst.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace tscf;

namespace {

// Exit codes per error class.
constexpr int kExitInternal = 1;
constexpr int kExitArgument = 2;
constexpr int kExitFormat = 3;
constexpr int kExitData = 4;
constexpr int kExitConvergence = 5;
constexpr int kExitIo = 6;

struct CommonOpts {
    std::string config_path;
    int threads = -1;          // -1: not set on the command line
    long long seed = -1;
    std::string method;
    bool keep_intermediates = false;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_out = true) {
    cmd->add_option("--config", o.config_path, "JSON run configuration");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--method", o.method, "denoise method: tscf|gaussian|none");
    cmd->add_flag("--keep-intermediates", o.keep_intermediates, "write intermediate volumes");
    if (with_out) cmd->add_option("--out", o.out, "output directory")->required();
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.method.empty()) cfg.method = denoise_method_from_string(o.method);
    if (o.keep_intermediates) cfg.keep_intermediates = true;
    cfg.validate();
    return cfg;
}

std::vector<std::size_t> parse_roi(const std::string& roi_spec, const TimeSeriesVolume& vol,
                                   const RunConfig& cfg) {
    if (roi_spec == "all" || roi_spec.empty()) {
        std::vector<std::size_t> roi(vol.n_voxels());
        for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
        return roi;
    }
    if (roi_spec == "tissue") return tissue_roi(cfg.dro);
    if (roi_spec == "aif") return aif_roi(cfg.dro);
    // rect: y0,y1,x0,x1 (half-open) on a 2-D volume
    if (vol.dims.size() != 2) throw ArgumentError("rect ROI requires a 2-D volume");
    int v[4];
    if (std::sscanf(roi_spec.c_str(), "%d,%d,%d,%d", &v[0], &v[1], &v[2], &v[3]) != 4)
        throw ArgumentError("ROI must be all|tissue|aif|y0,y1,x0,x1");
    if (v[0] < 0 || v[1] > vol.dims[0] || v[0] >= v[1] || v[2] < 0 || v[3] > vol.dims[1] ||
        v[2] >= v[3])
        throw ArgumentError("rect ROI out of bounds");
    std::vector<std::size_t> roi;
    for (int y = v[0]; y < v[1]; ++y)
        for (int x = v[2]; x < v[3]; ++x)
            roi.push_back(static_cast<std::size_t>(y) * vol.dims[1] + x);
    return roi;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DCE-MRI denoising and pharmacokinetic estimation pipeline"};
    app.require_subcommand(1);

    CommonOpts gen_o;
    auto* gen = app.add_subcommand("dro-gen", "generate the synthetic reference phantom");
    add_common(gen, gen_o);

    CommonOpts na_o;
    std::string na_in;
    double na_sigma = 5.0;
    auto* noise_add = app.add_subcommand("noise-add", "add Rician noise to a volume");
    add_common(noise_add, na_o);
    noise_add->add_option("--in", na_in, "input volume (.json)")->required();
    noise_add->add_option("--sigma", na_sigma, "Gaussian channel noise std")->required();

    CommonOpts ne_o;
    std::string ne_in, ne_roi = "aif";
    int ne_pre = 0;
    bool ne_heterogeneous = false;
    auto* noise_est = app.add_subcommand("noise-estimate", "estimate Rician noise statistics");
    add_common(noise_est, ne_o, false);
    noise_est->add_option("--in", ne_in, "input volume (.json)")->required();
    noise_est->add_option("--roi", ne_roi, "all|tissue|aif|y0,y1,x0,x1");
    noise_est->add_option("--pre-scans", ne_pre, "pre-contrast scan count (0 = from config)");
    noise_est->add_flag("--heterogeneous", ne_heterogeneous, "force the VST-iterative path");

    CommonOpts dn_o;
    std::string dn_in;
    double dn_sigma = 0.0;
    auto* denoise = app.add_subcommand("denoise", "denoise a volume");
    add_common(denoise, dn_o);
    denoise->add_option("--in", dn_in, "input volume (.json)")->required();
    denoise->add_option("--sigma", dn_sigma, "noise sigma (0 = estimate from the volume)");

    CommonOpts fit_o;
    std::string fit_in, fit_aif, fit_roi = "all";
    auto* fit_cmd = app.add_subcommand("fit", "fit PK parameters to an intensity volume");
    add_common(fit_cmd, fit_o);
    fit_cmd->add_option("--in", fit_in, "input volume (.json)")->required();
    fit_cmd->add_option("--aif", fit_aif, "AIF CSV")->required();
    fit_cmd->add_option("--roi", fit_roi, "all|tissue|aif|y0,y1,x0,x1");

    CommonOpts met_o;
    std::string met_est, met_truth;
    auto* metrics_cmd = app.add_subcommand("metrics", "compare fitted maps against truth maps");
    add_common(metrics_cmd, met_o);
    metrics_cmd->add_option("--estimate", met_est, "fitted param map stem")->required();
    metrics_cmd->add_option("--truth", met_truth, "truth param map stem")->required();

    CommonOpts pipe_o;
    std::string pipe_dro;
    auto* pipe = app.add_subcommand("pipeline", "noise estimation + denoising + fitting + metrics");
    add_common(pipe, pipe_o);
    pipe->add_option("--dro", pipe_dro, "dro-gen output directory")->required();

    CommonOpts bench_o;
    int bench_reps = 3;
    std::vector<std::string> bench_sizes;
    auto* bench = app.add_subcommand("bench", "time the collaborative filter over volume sizes");
    add_common(bench, bench_o);
    bench->add_option("--reps", bench_reps, "repetitions per size");
    bench->add_option("--sizes", bench_sizes, "sizes as HxW (default Table-2 ladder)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitArgument;
    }

    try {
        if (*gen) {
            run_dro_gen(resolve_config(gen_o), gen_o.out);
            std::cout << "wrote phantom to " << gen_o.out << "\n";
        } else if (*noise_add) {
            RunConfig cfg = resolve_config(na_o);
            TimeSeriesVolume vol = read_volume(na_in);
            TimeSeriesVolume noisy =
                add_rician_noise(vol, na_sigma, cfg.seed, resolve_threads(cfg.threads));
            fs::create_directories(na_o.out);
            write_volume(noisy, (fs::path(na_o.out) / "noisy").string());
            write_manifest(cfg, "noise-add", na_o.out);
            std::cout << "wrote " << (fs::path(na_o.out) / "noisy.json").string() << "\n";
        } else if (*noise_est) {
            RunConfig cfg = resolve_config(ne_o);
            TimeSeriesVolume vol = read_volume(ne_in);
            auto roi = parse_roi(ne_roi, vol, cfg);
            int pre = ne_pre > 0 ? ne_pre
                                 : std::max(1, static_cast<int>(cfg.dro.injection_time_s /
                                                                cfg.dro.dt_s));
            pre = std::min(pre, vol.n_time);
            RicianStats st = estimate_noise_dual(vol, roi, 0, pre, !ne_heterogeneous);
            ordered_json j;
            j["sigma_g"] = st.sigma_g;
            j["snr"] = st.snr;
            j["y_hat"] = st.y_hat;
            j["method"] = st.method == NoiseMethod::fixed_point ? "fixed_point" : "vst_iterative";
            j["iterations"] = st.iterations;
            std::cout << j.dump(2) << "\n";
        } else if (*denoise) {
            RunConfig cfg = resolve_config(dn_o);
            TimeSeriesVolume vol = read_volume(dn_in);
            int threads = resolve_threads(cfg.threads);
            fs::create_directories(dn_o.out);
            TimeSeriesVolume out = vol;
            if (cfg.method == DenoiseMethod::tscf) {
                double sigma = dn_sigma;
                if (!(sigma > 0.0)) {
                    auto roi = parse_roi("all", vol, cfg);
                    RicianStats st = estimate_noise_dual(vol, roi, 0,
                                                         std::max(1, vol.n_time / 6), false);
                    sigma = st.sigma_g;
                }
                Stabilizer stab = build_stabilizer(sigma);
                TimeSeriesVolume stabilized = apply_vst(vol, stab);
                TscfConfig tcfg = cfg.tscf;
                tcfg.zeta_sim = cfg.zeta_sim_override > 0.0
                                    ? cfg.zeta_sim_override
                                    : TscfConfig::default_zeta_sim(vol.n_time, tcfg.sigma_v,
                                                                    cfg.zeta_sim_chi2_factor);
                TscfDiagnostics diag;
                TimeSeriesVolume den = tscf_denoise(stabilized, tcfg, threads, &diag);
                out = apply_ivst(den, stab);
                std::cout << "tscf iterations: " << diag.iterations
                          << ", sigma_g: " << sigma << "\n";
            } else if (cfg.method == DenoiseMethod::gaussian) {
                out = gaussian_smooth(vol, cfg.gaussian_fwhm_px, threads);
            }
            write_volume(out, (fs::path(dn_o.out) / "restored").string());
            write_manifest(cfg, "denoise", dn_o.out);
        } else if (*fit_cmd) {
            RunConfig cfg = resolve_config(fit_o);
            TimeSeriesVolume vol = read_volume(fit_in);
            AifSeries aif = read_aif(fit_aif);
            auto roi = parse_roi(fit_roi, vol, cfg);
            FitVolumeDiagnostics diag;
            ParamMap map = fit_volume(vol, aif, cfg.acq, roi, cfg.fit, cfg.bat, cfg.seed,
                                      resolve_threads(cfg.threads), &diag);
            fs::create_directories(fit_o.out);
            write_param_map(map, vol.dt_seconds, (fs::path(fit_o.out) / "fitted").string());
            write_manifest(cfg, "fit", fit_o.out);
            std::cout << "fitted " << diag.n_fitted << " voxels, converged " << diag.n_converged
                      << ", mean BAT " << diag.bat.roi_mean_bat << "\n";
        } else if (*metrics_cmd) {
            RunConfig cfg = resolve_config(met_o);
            ParamMap est = read_param_map(met_est);
            ParamMap truth = read_param_map(met_truth);
            if (est.dims != truth.dims) throw ArgumentError("metrics: map dims mismatch");
            if (est.dims.size() != 2) throw ArgumentError("metrics: expects 2-D maps");
            std::vector<std::size_t> roi(est.n_voxels());
            for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
            ordered_json j;
            j["nrmse_ktrans"] = nrmse(est.ktrans, truth.ktrans, roi);
            j["nrmse_ve"] = nrmse(est.ve, truth.ve, roi);
            j["mssim_ktrans"] = mssim(est.ktrans, truth.ktrans, est.dims[0], est.dims[1]);
            j["mssim_ve"] = mssim(est.ve, truth.ve, est.dims[0], est.dims[1]);
            fs::create_directories(met_o.out);
            std::ofstream out((fs::path(met_o.out) / "metrics.json").string());
            out << j.dump(2) << "\n";
            std::cout << j.dump(2) << "\n";
        } else if (*pipe) {
            RunConfig cfg = resolve_config(pipe_o);
            EvalReport rep = run_pipeline(cfg, pipe_dro, pipe_o.out);
            std::cout << "method=" << rep.method << " nrmse_ktrans=" << rep.nrmse_ktrans
                      << " nrmse_ve=" << rep.nrmse_ve << " mssim_ktrans=" << rep.mssim_ktrans
                      << " mssim_ve=" << rep.mssim_ve << " bat_std=" << rep.bat_std << "\n";
        } else if (*bench) {
            RunConfig cfg = resolve_config(bench_o);
            std::vector<std::pair<int, int>> sizes;
            for (const auto& s : bench_sizes) {
                int h, w;
                if (std::sscanf(s.c_str(), "%dx%d", &h, &w) != 2)
                    throw ArgumentError("bench size must look like 50x60: " + s);
                sizes.emplace_back(h, w);
            }
            if (sizes.empty())
                sizes = {{30, 30}, {40, 40}, {50, 50}, {50, 60}};
            auto rows = run_bench(cfg, sizes, bench_reps, bench_o.out);
            for (const auto& r : rows)
                std::cout << r.height << "x" << r.width << "x" << r.n_time << ": mean "
                          << r.mean_seconds << " s\n";
        }
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return kExitArgument;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return 0;
}
