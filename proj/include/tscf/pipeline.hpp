#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tscf/metrics.hpp"
#include "tscf/phantom.hpp"
#include "tscf/pk.hpp"
#include "tscf/tscf_filter.hpp"
#include "tscf/types.hpp"

namespace tscf {

enum class DenoiseMethod { none, gaussian, tscf };
const char* to_string(DenoiseMethod m);
DenoiseMethod denoise_method_from_string(const std::string& s);

struct NoiseEstimateConfig {
    int pre_contrast_scans = 0;  // 0 = derive from injection_time/dt
    bool homogeneous = true;
};

/// Whole-run configuration; JSON round-trippable, unknown keys rejected.
struct RunConfig {
    std::uint64_t seed = 20240901;
    int threads = 0;             // 0 = hardware
    DenoiseMethod method = DenoiseMethod::tscf;
    bool keep_intermediates = false;
    double gaussian_fwhm_px = 1.5;
    double zeta_sim_chi2_factor = 1.5;
    double zeta_sim_override = 0.0;  // >0 uses the absolute value

    DroSpec dro;
    AifModel aif;
    AcquisitionParams acq;
    TscfConfig tscf;  // zeta_sim materialized per-volume from the factor unless overridden
    FitConfig fit;
    BatConfig bat;
    NoiseEstimateConfig noise;

    void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

/// FNV-1a 64-bit, hex string.
std::string fnv1a_hex(const std::string& text);

void write_manifest(const RunConfig& cfg, const std::string& command, const std::string& out_dir);

/// Phantom geometry helpers shared by the pipeline and the acceptance suite.
std::vector<std::size_t> tissue_roi(const DroSpec& spec);
std::vector<std::size_t> aif_roi(const DroSpec& spec);
std::vector<double> truth_block_values(const DroSpec& spec, bool ktrans);

/// dro-gen: writes noiseless/noisy volumes, truth maps, AIF CSV, manifest.
void run_dro_gen(const RunConfig& cfg, const std::string& out_dir);

/// Full pipeline on a dro-gen output directory: noise estimation, optional
/// denoising, PK fitting, metrics. Writes param maps, report.json, manifest.
EvalReport run_pipeline(const RunConfig& cfg, const std::string& dro_dir,
                        const std::string& out_dir);

struct BenchRow {
    int height = 0;
    int width = 0;
    int n_time = 0;
    double mean_seconds = 0.0;
    std::vector<double> run_seconds;
};

/// Times tscf_denoise over phantom sizes, `reps` repetitions each.
std::vector<BenchRow> run_bench(const RunConfig& cfg, const std::vector<std::pair<int, int>>& sizes,
                                int reps, const std::string& out_dir);

}  // namespace tscf
