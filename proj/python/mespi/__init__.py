"""Multi-echo spiral fMRI reconstruction: NUFFT operators, self-supervised
physics-driven reconstruction, and BOLD analysis."""

from ._mespi import (
    ModelParams,
    Trajectory,
    build_design,
    canonical_hrf,
    cg_sense,
    default_tes,
    estimate_coil_maps,
    glm_fit,
    gridding_recon,
    load_store,
    make_masks,
    make_phantom,
    make_spiral,
    nrmse,
    nufft_adjoint,
    nufft_forward,
    phantom_echo_images,
    pipe_menon,
    reconstruct,
    simulate_coils,
    simulate_kspace,
    subsample_arms,
    subsample_points,
    train_ssdu,
)

__all__ = [
    "ModelParams",
    "Trajectory",
    "build_design",
    "canonical_hrf",
    "cg_sense",
    "default_tes",
    "estimate_coil_maps",
    "glm_fit",
    "gridding_recon",
    "load_store",
    "make_masks",
    "make_phantom",
    "make_spiral",
    "nrmse",
    "nufft_adjoint",
    "nufft_forward",
    "phantom_echo_images",
    "pipe_menon",
    "reconstruct",
    "simulate_coils",
    "simulate_kspace",
    "subsample_arms",
    "subsample_points",
    "train_ssdu",
]
