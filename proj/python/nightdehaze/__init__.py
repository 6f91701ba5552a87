"""Night-time haze removal: Retinex decomposition, illumination enhancement
and reflectance dehazing."""

from ._core import (  # noqa: F401
    Manifest,
    Model,
    __version__,
    build_manifest,
    comparison_grid,
    darken_night,
    dehaze_oracle,
    load_image,
    load_manifest,
    load_model,
    psnr,
    recompose,
    save_image,
    split_scenes,
    ssim,
    synthesize_dataset,
    synthesize_haze,
    train_stage1,
    train_stage2,
)
