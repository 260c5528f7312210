"""Monte Carlo risk estimation, parameter schedules, angle sweeps, power-law
rate fits and chi-square concentration bounds."""

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import denoise as _dn
from .horizon import EdgeContour, contour_from_json, oracle_orientations, perturb_orientations, render_horizon
from .image import add_gaussian_noise, make_rng, mse, psnr

__all__ = [
    "TheorySchedule",
    "theory_schedule",
    "mean_filter_width",
    "derive_seed",
    "SceneSpec",
    "TrialConfig",
    "resolve_params",
    "RiskCell",
    "RiskReport",
    "CSV_COLUMNS",
    "reports_to_csv",
    "monte_carlo_risk",
    "angle_sweep",
    "RateFit",
    "rate_fit",
    "concentration_bound",
    "chi_square_tail",
    "ESTIMATORS",
]

ESTIMATORS = ("identity", "mean", "nlm", "oanlm", "danlm", "ganlm")

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class TheorySchedule:
    """Output of :func:`theory_schedule`.

    ``params`` holds the clamped sizes, ``xi = sigma * n`` and the
    asymptotic threshold ``tau = 2 / sqrt(|ln sigma|)``. ``raw_delta_s`` and
    ``raw_delta_l`` are the values before clamping to ``[1/n, 1]``.
    """

    params: _dn.DenoiseParams
    raw_delta_s: float
    raw_delta_l: float
    clamped_s: bool
    clamped_l: bool

    @property
    def clamped(self):
        return self.clamped_s or self.clamped_l


def theory_schedule(sigma, n):
    """Quadratic-scaling neighborhood sizes and threshold for noise ``sigma``.

    ``delta_l = 2 sigma^(2/3) |ln sigma|^(2/3)``, ``delta_s = delta_l**2`` and
    ``tau = 2 / sqrt(|ln sigma|)``; sizes are clamped to ``[1/n, 1]``.
    """
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    log_s = abs(math.log(sigma))
    raw_l = 2.0 * sigma ** (2 / 3) * log_s ** (2 / 3)
    raw_s = 4.0 * sigma ** (4 / 3) * log_s ** (4 / 3)
    lo = 1.0 / n
    delta_l = min(max(raw_l, lo), 1.0)
    delta_s = min(max(raw_s, lo), delta_l)
    params = _dn.DenoiseParams(
        delta_s=delta_s, delta_l=delta_l, xi=sigma * n, tau=2.0 / math.sqrt(log_s)
    )
    return TheorySchedule(params, raw_s, raw_l, delta_s != raw_s, delta_l != raw_l)


def mean_filter_width(delta_l, n):
    """Odd mean-filter side closest to ``n * delta_l`` pixels (at least 1)."""
    k = max(1, int(round(n * delta_l)))
    return k if k % 2 else k + 1


def _splitmix64(x):
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed, xi_index, trial, stream=0):
    """64-bit seed for one Monte Carlo cell.

    The indices are packed into one word (``stream`` < 2**16,
    ``xi_index`` < 2**16, ``trial`` < 2**32), scaled by an odd constant and
    passed through the SplitMix64 finalizer. Both steps are bijections mod
    2**64, so distinct cells get distinct seeds for a fixed base seed.
    """
    if not (0 <= stream < 1 << 16 and 0 <= xi_index < 1 << 16 and 0 <= trial < 1 << 32):
        raise ValueError("seed indices out of range")
    packed = (stream << 48) | (xi_index << 32) | trial
    return _splitmix64((int(base_seed) + packed * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class SceneSpec:
    contour: EdgeContour
    n: int

    def render(self):
        return render_horizon(self.contour, self.n)

    def to_dict(self):
        return {"contour": self.contour.to_dict(), "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(contour_from_json(d["contour"], n=d["n"]), int(d["n"]))


@dataclass(frozen=True)
class TrialConfig:
    """One Monte Carlo experiment.

    ``params`` is a :class:`~anlm.denoise.DenoiseParams` (its ``xi`` and
    ``tau`` are re-derived per noise level unless ``fixed_tau``), or ``None``
    with ``schedule="theory"`` to take sizes from :func:`theory_schedule`
    with ``sigma = xi / n``. ``options`` carries estimator extras: ``k``
    (mean filter side), ``lam``/``pilot``/``gradient_sigma`` (GANLM),
    ``angle`` (constant orientation for OANLM instead of the oracle),
    ``perturb`` (``{"mode", "magnitude"}`` applied to the oracle field),
    ``tau_factor`` (threshold ``tau = tau_factor * xi**2``).
    """

    scene: SceneSpec
    estimator: str
    xis: tuple
    trials: int
    base_seed: int = 0
    params: _dn.DenoiseParams = None
    schedule: str = None
    options: dict = field(default_factory=dict, hash=False)
    edge_band: float = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        xis = tuple(float(x) for x in self.xis)
        if not xis or any(x < 0 for x in xis) or list(xis) != sorted(set(xis)):
            raise ValueError(f"noise levels must be nonnegative, distinct and ascending, got {xis}")
        object.__setattr__(self, "xis", xis)
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.schedule not in (None, "theory"):
            raise ValueError(f"schedule must be None or 'theory', got {self.schedule!r}")
        needs_params = self.estimator not in ("identity",) and not (
            self.estimator == "mean" and "k" in self.options
        )
        if needs_params and self.params is None and self.schedule is None:
            raise ValueError(f"estimator {self.estimator!r} needs params or schedule='theory'")

    def to_dict(self):
        return {
            "scene": self.scene.to_dict(),
            "estimator": self.estimator,
            "xis": list(self.xis),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "params": None if self.params is None else self.params.to_dict(),
            "schedule": self.schedule,
            "options": dict(self.options),
            "edge_band": self.edge_band,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise TypeError(f"unknown TrialConfig fields {sorted(unknown)}")
        d["scene"] = SceneSpec.from_dict(d["scene"])
        if d.get("params") is not None:
            d["params"] = _dn.DenoiseParams.from_dict(d["params"])
        d["xis"] = tuple(d["xis"])
        d.setdefault("options", {})
        return cls(**d)


def resolve_params(config, xi):
    """DenoiseParams used at noise level ``xi``."""
    opts = config.options
    tau_factor = opts.get("tau_factor", _dn.DEFAULT_TAU_FACTOR)
    n = config.scene.n
    if config.schedule == "theory":
        # sigma = xi / n bridges pixel noise to the continuous noise scale
        sched = theory_schedule(xi / n, n)
        base = sched.params
        if config.params is not None:
            base = replace(config.params, delta_s=base.delta_s, delta_l=base.delta_l)
        if opts.get("tau_rule", "discrete") == "theory":
            return replace(base, xi=xi, tau=sched.params.tau)
        return replace(base, xi=xi, tau=tau_factor * xi * xi)
    if config.params is None:
        return None
    if opts.get("fixed_tau"):
        return replace(config.params, xi=xi)
    return replace(config.params, xi=xi, tau=tau_factor * xi * xi)


def _estimate(config, params, obs, clean, xi_index, trial, threads):
    name = config.estimator
    opts = config.options
    if name == "identity":
        return obs
    if name == "mean":
        k = opts.get("k") or mean_filter_width(params.delta_l, config.scene.n)
        return _dn.mean_filter(obs, k)
    if name == "nlm":
        return _dn.nlm(obs, params, threads)
    if name == "danlm":
        return _dn.danlm(obs, params, threads)
    if name == "ganlm":
        pilot = opts.get("pilot", "nlm")
        return _dn.ganlm(
            obs, params, opts.get("lam", 0.05), pilot=pilot,
            clean=clean if pilot == "oracle" else None,
            angle_rule=opts.get("angle_rule", "edge"),
            gradient_sigma=opts.get("gradient_sigma", _dn.DEFAULT_GRADIENT_SIGMA),
            threads=threads,
        )
    # oanlm
    n = config.scene.n
    if "angle" in opts:
        field = np.full((n, n), float(opts["angle"]))
    else:
        field = oracle_orientations(config.scene.contour, n)
    perturb = opts.get("perturb")
    if perturb:
        seed = derive_seed(config.base_seed, xi_index, trial, stream=1)
        field = perturb_orientations(field, perturb["mode"], perturb["magnitude"], seed)
    return _dn.denoise_oriented(obs, field, params, threads)


@dataclass
class RiskCell:
    xi: float
    mean_mse: float
    se_mse: float
    mean_psnr: float
    se_psnr: float
    trials: int
    psnr_values: list
    mean_band_mse: float = None

    def to_dict(self):
        d = {
            "xi": self.xi,
            "mean_mse": self.mean_mse,
            "se_mse": self.se_mse,
            "mean_psnr": self.mean_psnr,
            "se_psnr": self.se_psnr,
            "trials": self.trials,
            "psnr_values": list(self.psnr_values),
        }
        if self.mean_band_mse is not None:
            d["mean_band_mse"] = self.mean_band_mse
        return d


@dataclass
class RiskReport:
    scene: dict
    estimator: str
    params: list
    cells: list

    def cell(self, xi):
        for c in self.cells:
            if c.xi == xi:
                return c
        raise KeyError(xi)

    def to_dict(self):
        return {
            "scene": self.scene,
            "estimator": self.estimator,
            "params": self.params,
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    def csv_rows(self):
        return [
            [c.xi, self.estimator, c.mean_mse, c.se_mse, c.mean_psnr, c.trials] for c in self.cells
        ]


CSV_COLUMNS = ["xi", "estimator", "mean_mse", "se_mse", "mean_psnr", "trials"]


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        w.writerows([repr(v) if isinstance(v, float) else v for v in row] for row in rep.csv_rows())
    return buf.getvalue()


def _mean_se(values):
    m = math.fsum(values) / len(values)
    if len(values) < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in values) / (len(values) - 1)
    return m, math.sqrt(var / len(values))


def _edge_band_mask(contour, n, width):
    t = np.arange(n) / n
    dist = np.abs(t[None, :] - contour(t)[:, None]) * n
    return dist <= width


def monte_carlo_risk(config, threads=None, progress=None):
    """Estimate the whole-image risk of ``config.estimator`` by simulation.

    Each (noise level, trial) cell renders the scene, adds noise seeded by
    :func:`derive_seed`, denoises and records MSE and PSNR. Means use exactly
    rounded sums, so the report does not depend on evaluation order.
    """
    clean = config.scene.render()
    band = None
    if config.edge_band is not None:
        band = _edge_band_mask(config.scene.contour, config.scene.n, config.edge_band)
    cells, echo = [], []
    for xi_index, xi in enumerate(config.xis):
        params = resolve_params(config, xi)
        echo.append({"xi": xi, **(params.to_dict() if params is not None else {})})
        mses, psnrs, band_mses = [], [], []
        for trial in range(int(config.trials)):
            obs = add_gaussian_noise(clean, xi, derive_seed(config.base_seed, xi_index, trial))
            est = _estimate(config, params, obs, clean, xi_index, trial, threads)
            mses.append(mse(clean, est))
            psnrs.append(psnr(clean, est))
            if band is not None:
                d = (est - clean)[band]
                band_mses.append(float(np.mean(d * d)))
            if progress is not None:
                progress(xi, trial)
        mean_mse, se_mse = _mean_se(mses)
        finite = [p for p in psnrs if math.isfinite(p)]
        mean_psnr, se_psnr = _mean_se(finite) if len(finite) == len(psnrs) else (math.inf, 0.0)
        cells.append(RiskCell(
            xi=xi, mean_mse=mean_mse, se_mse=se_mse, mean_psnr=mean_psnr, se_psnr=se_psnr,
            trials=len(mses), psnr_values=psnrs,
            mean_band_mse=_mean_se(band_mses)[0] if band_mses else None,
        ))
    return RiskReport(config.scene.to_dict(), config.estimator, echo, cells)


def angle_sweep(scene, delta_s, delta_l, angles, xi, trials, base_seed=0, tau=None,
                search_radius=21, center_inclusion=False, threads=None):
    """OANLM with a constant orientation field at each angle.

    Every angle sees the same noise realizations. Returns a list of
    ``(angle, RiskReport)``.
    """
    angles = list(angles)
    if not angles:
        raise ValueError("angle_sweep needs at least one angle")
    tau = _dn.DEFAULT_TAU_FACTOR * xi * xi if tau is None else tau
    params = _dn.DenoiseParams(delta_s, delta_l, xi, tau=tau, search_radius=search_radius,
                               center_inclusion=center_inclusion)
    out = []
    for angle in angles:
        cfg = TrialConfig(scene=scene, estimator="oanlm", xis=(xi,), trials=trials,
                          base_seed=base_seed, params=params,
                          options={"angle": float(angle), "fixed_tau": True})
        out.append((float(angle), monte_carlo_risk(cfg, threads)))
    return out


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    r2: float


def rate_fit(points):
    """Least-squares line through ``(ln xi, ln risk)``; the slope is the
    decay exponent."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("rate_fit needs at least 3 points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("rate_fit needs positive noise levels and risks")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    centered = ly - ly.mean()
    ss_tot = float(centered @ centered)
    # log-risks equal up to rounding: a flat line fits them exactly
    tiny = 1e-24 * len(pts) * max(1.0, float(np.max(np.abs(ly)))) ** 2
    if ss_tot <= tiny:
        r2 = 1.0 if ss_res <= tiny else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), r2)


def concentration_bound(r, t, side):
    """Chernoff bound on the tail of a chi-square mean ``(1/r) sum Z_i^2``.

    ``upper``: ``P(mean - 1 > t) <= exp(-(r/2)(t - ln(1+t)))``;
    ``lower``: ``P(mean - 1 < -t) <= exp(-(r/2)(-t - ln(1-t)))`` with ``t < 1``.
    Both exponents are nonpositive, so the bounds lie in ``(0, 1]``; the lower
    one follows from the same Chernoff argument with ``eta < 0``.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    if side == "upper":
        return math.exp(-(r / 2) * (t - math.log1p(t)))
    if side == "lower":
        if t >= 1:
            raise ValueError(f"lower-tail bound needs t < 1, got {t}")
        return math.exp(-(r / 2) * (-t - math.log1p(-t)))
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def chi_square_tail(r, t, side, draws, seed, chunk=1_000_000):
    """Monte Carlo tail frequency of ``(1/r) chi2_r`` and its standard error."""
    rng = make_rng(seed)
    hits = 0
    left = int(draws)
    while left > 0:
        m = min(chunk, left)
        mean = rng.chisquare(r, size=m) / r
        hits += int(np.count_nonzero(mean - 1 > t if side == "upper" else mean - 1 < -t))
        left -= m
    p = hits / draws
    return p, math.sqrt(p * (1 - p) / draws)
