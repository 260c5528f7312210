"""Anisotropic nonlocal means denoising for Horizon-class edge images.

Submodules
----------
image      PGM I/O, seeded noise, MSE/PSNR.
horizon    Edge contours, rendering and orientation fields.
geometry   Rotated rectangular neighborhoods and patch distances.
denoise    Mean filter, NLM, OANLM, DANLM and GANLM.
risklab    Monte Carlo risk, schedules, sweeps and rate fits.
estimators scikit-learn style wrappers.
cli        Command-line interface.
"""

__version__ = "0.1.0"

from .denoise import (  # noqa: E402
    DenoiseParams,
    danlm,
    denoise_oriented,
    ganlm,
    mean_filter,
    nlm,
)
from .horizon import make_contour, oracle_orientations, render_horizon  # noqa: E402
from .image import add_gaussian_noise, load_pgm, psnr, save_pgm  # noqa: E402

__all__ = [
    "DenoiseParams",
    "danlm",
    "denoise_oriented",
    "ganlm",
    "mean_filter",
    "nlm",
    "make_contour",
    "oracle_orientations",
    "render_horizon",
    "add_gaussian_noise",
    "load_pgm",
    "psnr",
    "save_pgm",
]
