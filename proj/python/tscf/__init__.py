"""DCE-MRI denoising and pharmacokinetic estimation.

Thin python surface over the C++ core: Rician noise estimation, variance
stabilization, temporo-spatial collaborative filtering, and Tofts-model
fitting. Volumes are numpy float32 arrays shaped (y, x, time).
"""

from ._core import (  # noqa: F401
    ArgumentError,
    ConvergenceError,
    DataError,
    FitConfig,
    FormatError,
    IoError,
    Stabilizer,
    TscfConfig,
    __version__,
    add_rician_noise,
    apply_ivst,
    apply_vst,
    bessel_i,
    build_stabilizer,
    c_statistic,
    correction_factor,
    debias_magnitude,
    default_zeta_sim,
    fit_voxel,
    fit_volume,
    fixed_point_snr,
    gaussian_smooth,
    generate_dro,
    horsfield_forward,
    mssim,
    nrmse,
    rician_mean,
    run_dro_gen,
    run_pipeline,
    snr_ratio_threshold,
    spgr_signal,
    tscf_denoise,
)
