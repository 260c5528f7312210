"""Command-line entry point.

Subcommands::

    generate     contour JSON + n        -> PGM + orientation sidecar
    noise        PGM + xi + seed         -> 16-bit PGM
    denoise      PGM + algorithm + params -> PGM
    bench        TrialConfig JSON        -> JSON + CSV risk reports
    angle-sweep  sweep JSON              -> JSON + CSV
    rate-sweep   sweep JSON              -> JSON + CSV + rate fits
    replay       manifest                -> re-run the recorded command

Every run writes ``<output>.manifest.json`` next to its outputs. JSON
arguments (``--contour``, ``--params``, ``--config``) take a file path or
inline JSON text; manifests record them inline so replays do not depend on
the original files.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 constraint violation.
"""

import argparse
import json
import logging
import math
import os
import sys

from . import __version__
from . import denoise as _dn
from . import risklab as _rl
from .horizon import (
    ContourConstraintError,
    contour_from_json,
    oracle_orientations,
    read_orientations,
    render_horizon,
    write_orientations,
)
from .image import PGMError, add_gaussian_noise, ensure_parent, load_pgm, save_pgm

__all__ = ["run_cli", "main", "SCHEMAS"]

log = logging.getLogger("anlm")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONSTRAINT = 0, 1, 2, 3

_NUM = {"type": "number"}
_PARAMS_SCHEMA = {
    "type": "object",
    "required": ["delta_s", "delta_l", "xi"],
    "properties": {
        "delta_s": _NUM,
        "delta_l": _NUM,
        "xi": _NUM,
        "tau": {"type": ["number", "null"], "default": "2.7*xi^2"},
        "search_radius": {"type": ["integer", "string"], "default": 21, "enum_string": ["full"]},
        "angles": {"type": "array", "items": _NUM},
        "center_inclusion": {"type": "boolean", "default": False},
    },
}
_CONTOUR_SCHEMA = {
    "type": "object",
    "required": ["family", "params", "C"],
    "properties": {
        "family": {"enum": ["constant", "line", "sine", "quadratic"]},
        "params": {
            "type": "object",
            "description": "constant: c; line: intercept, slope; "
                           "sine: offset, amplitude, frequency[, phase]; quadratic: a, b, c",
        },
        "C": _NUM,
    },
}
_SCENE_SCHEMA = {
    "type": "object",
    "required": ["contour", "n"],
    "properties": {"contour": _CONTOUR_SCHEMA, "n": {"type": "integer"}},
}
_TRIAL_SCHEMA = {
    "type": "object",
    "required": ["scene", "estimator", "xis", "trials"],
    "properties": {
        "scene": _SCENE_SCHEMA,
        "estimator": {"enum": list(_rl.ESTIMATORS)},
        "xis": {"type": "array", "items": _NUM},
        "trials": {"type": "integer"},
        "base_seed": {"type": "integer", "default": 0},
        "params": {"oneOf": [_PARAMS_SCHEMA, {"type": "null"}]},
        "schedule": {"enum": [None, "theory"]},
        "options": {
            "type": "object",
            "properties": {
                "k": {"type": "integer"},
                "lam": _NUM,
                "pilot": {"enum": ["noisy", "nlm", "oracle"]},
                "gradient_sigma": _NUM,
                "angle_rule": {"enum": ["edge", "gradient"]},
                "angle": _NUM,
                "perturb": {"type": "object", "properties": {
                    "mode": {"enum": ["additive", "relative"]}, "magnitude": _NUM}},
                "tau_factor": _NUM,
                "tau_rule": {"enum": ["discrete", "theory"]},
                "fixed_tau": {"type": "boolean"},
            },
        },
        "edge_band": {"type": ["number", "null"]},
    },
}
SCHEMAS = {
    "contour": _CONTOUR_SCHEMA,
    "params": _PARAMS_SCHEMA,
    "bench": {"oneOf": [_TRIAL_SCHEMA, {
        "type": "object", "required": ["configs"],
        "properties": {"configs": {"type": "array", "items": _TRIAL_SCHEMA}}}]},
    "angle-sweep": {
        "type": "object",
        "required": ["scene", "delta_s", "delta_l", "angles", "xi", "trials"],
        "properties": {
            "scene": _SCENE_SCHEMA,
            "delta_s": _NUM,
            "delta_l": _NUM,
            "angles": {"type": "array", "items": _NUM},
            "xi": _NUM,
            "trials": {"type": "integer"},
            "base_seed": {"type": "integer", "default": 0},
            "tau": {"type": ["number", "null"]},
            "search_radius": {"type": ["integer", "string"], "default": 21},
            "center_inclusion": {"type": "boolean", "default": False},
        },
    },
    "rate-sweep": {
        "type": "object",
        "required": ["scene", "estimators", "xis", "trials"],
        "properties": {
            "scene": _SCENE_SCHEMA,
            "estimators": {"type": "array", "items": {"enum": list(_rl.ESTIMATORS)}},
            "xis": {"type": "array", "items": _NUM},
            "trials": {"type": "integer"},
            "base_seed": {"type": "integer", "default": 0},
            "params": {"oneOf": [_PARAMS_SCHEMA, {"type": "null"}]},
            "schedule": {"enum": [None, "theory"], "default": "theory"},
            "options": {"type": "object"},
        },
    },
    "csv_columns": _rl.CSV_COLUMNS,
}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems surface as exit 1 instead of argparse's default 2
    def error(self, message):
        where = self.prog.partition(" ")[2]
        prefix = f"{where}: " if where else ""
        raise UsageError(f"{prefix}{message}\n{self.format_usage().strip()}")

    def exit(self, status=0, message=None):
        if status:
            raise UsageError((message or "").strip())
        if message:
            sys.stderr.write(message)
        raise _EarlyExit()


class _EarlyExit(Exception):
    pass


def _json_arg(text, what):
    """Parse inline JSON text or read a JSON file."""
    if text.lstrip().startswith("{"):
        src = text
    else:
        try:
            with open(text, encoding="utf-8") as fh:
                src = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {what} {text!r}: {exc.strerror}") from None
    try:
        obj = json.loads(src)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"{what} must be a JSON object")
    return obj


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


def _inline(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_text(path, text):
    ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_manifest(path, subcommand, argv, inputs, outputs, config, resolved):
    manifest = {
        "tool": "anlm",
        "version": __version__,
        "subcommand": subcommand,
        "argv": argv,
        "inputs": inputs,
        "outputs": outputs,
        "config": config,
        "resolved": resolved,
    }
    _write_text(path, _dumps(manifest) + "\n")
    return path


def _manifest_path(out):
    return out + ".manifest.json"


def _abs(path):
    return os.path.abspath(path)


def _load_image(path):
    try:
        return load_pgm(path)
    except OSError as exc:
        raise InputError(f"cannot read {path!r}: {exc.strerror}") from None
    except PGMError as exc:
        raise InputError(f"{path}: {exc}") from None


def _save_image(img, path, maxval):
    ensure_parent(path)
    save_pgm(img, path, maxval=maxval)


def _threads_argv(args):
    return [] if args.threads is None else ["--threads", str(args.threads)]


# --------------------------------------------------------------------------- commands

def _cmd_generate(args):
    contour_obj = _json_arg(args.contour, "contour")
    contour = contour_from_json(contour_obj, n=max(args.n, 1024))
    img = render_horizon(contour, args.n)
    out = _abs(args.out)
    sidecar = _abs(args.sidecar or os.path.splitext(out)[0] + ".ornt")
    _save_image(img, out, 255)
    ensure_parent(sidecar)
    write_orientations(oracle_orientations(contour, args.n), sidecar)
    argv = ["generate", "--contour", _inline(contour_obj), "--n", str(args.n),
            "--out", out, "--sidecar", sidecar]
    _write_manifest(_manifest_path(out), "generate", argv, {}, {"image": out, "sidecar": sidecar},
                    {"contour": contour_obj, "n": args.n}, {"contour": contour.to_dict()})
    return [out, sidecar]


def _cmd_noise(args):
    if not (args.xi >= 0 and math.isfinite(args.xi)):
        raise ValueError(f"xi must be a finite value >= 0, got {args.xi}")
    src = _abs(args.input)
    img = _load_image(src)
    noisy = add_gaussian_noise(img, args.xi, args.seed)
    out = _abs(args.out)
    _save_image(noisy, out, 65535)
    argv = ["noise", "--in", src, "--xi", repr(args.xi), "--seed", str(args.seed), "--out", out]
    _write_manifest(_manifest_path(out), "noise", argv, {"image": src}, {"image": out},
                    {"xi": args.xi, "seed": args.seed}, {"maxval": 65535})
    return [out]


def _cmd_denoise(args):
    params_obj = _json_arg(args.params, "params")
    params = _dn.DenoiseParams.from_dict(params_obj)
    src = _abs(args.input)
    obs = _load_image(src)
    inputs = {"image": src}
    extra = []
    resolved = {"algorithm": args.alg, "params": params.to_dict()}
    if args.alg == "mean":
        k = args.k if args.k is not None else _rl.mean_filter_width(params.delta_l, max(obs.shape))
        resolved["k"] = k
        if args.k is not None:
            extra += ["--k", str(args.k)]
        est = _dn.mean_filter(obs, k)
    elif args.alg == "nlm":
        est = _dn.nlm(obs, params, args.threads)
    elif args.alg == "danlm":
        est = _dn.danlm(obs, params, args.threads)
    elif args.alg == "oanlm":
        if args.orientation is None:
            raise UsageError("--alg oanlm requires --orientation SIDECAR")
        side = _abs(args.orientation)
        try:
            field = read_orientations(side)
        except OSError as exc:
            raise InputError(f"cannot read {side!r}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if field.shape != obs.shape:
            raise InputError(f"orientation sidecar is {field.shape}, image is {obs.shape}")
        inputs["orientation"] = side
        extra += ["--orientation", side]
        est = _dn.denoise_oriented(obs, field, params, args.threads)
    else:
        clean = None
        if args.pilot == "oracle":
            if args.clean is None:
                raise UsageError("--pilot oracle requires --clean PGM")
            inputs["clean"] = _abs(args.clean)
            clean = _load_image(inputs["clean"])
            extra += ["--clean", inputs["clean"]]
        resolved.update(lam=args.lam, pilot=args.pilot, gradient_sigma=args.gradient_sigma,
                        angle_rule=args.angle_rule)
        extra += ["--pilot", args.pilot, "--lambda", repr(args.lam),
                  "--gradient-sigma", repr(args.gradient_sigma), "--angle-rule", args.angle_rule]
        est = _dn.ganlm(obs, params, args.lam, pilot=args.pilot, clean=clean,
                        angle_rule=args.angle_rule, gradient_sigma=args.gradient_sigma,
                        threads=args.threads)
    out = _abs(args.out)
    _save_image(est, out, args.maxval)
    argv = (["denoise", "--in", src, "--alg", args.alg, "--params", _inline(params_obj),
             "--out", out, "--maxval", str(args.maxval)] + extra + _threads_argv(args))
    _write_manifest(_manifest_path(out), "denoise", argv, inputs, {"image": out},
                    {"params": params_obj}, resolved)
    return [out]


def _report_outputs(prefix):
    prefix = _abs(prefix)
    return prefix, prefix + ".json", prefix + ".csv"


def _progress(args):
    if not args.verbose:
        return None
    return lambda xi, trial: log.info("xi=%g trial=%d done", xi, trial)


def _cmd_bench(args):
    cfg_obj = _json_arg(args.config, "config")
    raw = cfg_obj["configs"] if "configs" in cfg_obj else [cfg_obj]
    if not isinstance(raw, list) or not raw:
        raise UsageError("config 'configs' must be a nonempty list")
    configs = [_rl.TrialConfig.from_dict(c) for c in raw]
    reports = [_rl.monte_carlo_risk(c, args.threads, _progress(args)) for c in configs]
    prefix, js, cs = _report_outputs(args.out)
    _write_text(js, _dumps({"reports": [r.to_dict() for r in reports]}) + "\n")
    _write_text(cs, _rl.reports_to_csv(reports))
    argv = ["bench", "--config", _inline(cfg_obj), "--out", prefix] + _threads_argv(args)
    _write_manifest(_manifest_path(prefix), "bench", argv, {}, {"json": js, "csv": cs},
                    cfg_obj, [c.to_dict() for c in configs])
    return [js, cs]


_SWEEP_KEYS = {"scene", "delta_s", "delta_l", "angles", "xi", "trials", "base_seed", "tau",
               "search_radius", "center_inclusion"}


def _cmd_angle_sweep(args):
    cfg = _json_arg(args.config, "config")
    unknown = set(cfg) - _SWEEP_KEYS
    if unknown:
        raise UsageError(f"unknown angle-sweep fields {sorted(unknown)}")
    scene = _rl.SceneSpec.from_dict(cfg["scene"])
    results = _rl.angle_sweep(
        scene, cfg["delta_s"], cfg["delta_l"], cfg["angles"], cfg["xi"], cfg["trials"],
        base_seed=cfg.get("base_seed", 0), tau=cfg.get("tau"),
        search_radius=cfg.get("search_radius", 21),
        center_inclusion=cfg.get("center_inclusion", False), threads=args.threads,
    )
    reports = []
    for angle, rep in results:
        rep.estimator = f"oanlm@{angle!r}"
        reports.append(rep)
    best = max(results, key=lambda ar: ar[1].cells[0].mean_psnr)[0]
    prefix, js, cs = _report_outputs(args.out)
    body = {
        "angles": [{"angle": a, "report": r.to_dict()} for a, r in results],
        "best_angle": best,
    }
    _write_text(js, _dumps(body) + "\n")
    _write_text(cs, _rl.reports_to_csv(reports))
    argv = ["angle-sweep", "--config", _inline(cfg), "--out", prefix] + _threads_argv(args)
    _write_manifest(_manifest_path(prefix), "angle-sweep", argv, {}, {"json": js, "csv": cs},
                    cfg, {"scene": scene.to_dict()})
    return [js, cs]


_RATE_KEYS = {"scene", "estimators", "xis", "trials", "base_seed", "params", "schedule", "options"}


def _cmd_rate_sweep(args):
    cfg = _json_arg(args.config, "config")
    unknown = set(cfg) - _RATE_KEYS
    if unknown:
        raise UsageError(f"unknown rate-sweep fields {sorted(unknown)}")
    estimators = cfg["estimators"]
    if not isinstance(estimators, list) or not estimators:
        raise UsageError("rate-sweep 'estimators' must be a nonempty list")
    reports, fits = [], {}
    for name in estimators:
        tc = _rl.TrialConfig.from_dict({
            "scene": cfg["scene"], "estimator": name, "xis": cfg["xis"],
            "trials": cfg["trials"], "base_seed": cfg.get("base_seed", 0),
            "params": cfg.get("params"), "schedule": cfg.get("schedule", "theory"),
            "options": cfg.get("options", {}),
        })
        rep = _rl.monte_carlo_risk(tc, args.threads, _progress(args))
        reports.append(rep)
        points = [(c.xi, c.mean_mse) for c in rep.cells]
        if len(points) >= 3 and all(x > 0 and y > 0 for x, y in points):
            fit = _rl.rate_fit(points)
            fits[name] = {"exponent": fit.exponent, "intercept": fit.intercept, "r2": fit.r2}
        else:
            fits[name] = None
    prefix, js, cs = _report_outputs(args.out)
    _write_text(js, _dumps({"reports": [r.to_dict() for r in reports], "fits": fits}) + "\n")
    _write_text(cs, _rl.reports_to_csv(reports))
    argv = ["rate-sweep", "--config", _inline(cfg), "--out", prefix] + _threads_argv(args)
    _write_manifest(_manifest_path(prefix), "rate-sweep", argv, {}, {"json": js, "csv": cs},
                    cfg, {"fits": fits})
    return [js, cs]


def _cmd_replay(args):
    manifest = _json_arg(args.manifest, "manifest")
    argv = manifest.get("argv")
    if not isinstance(argv, list) or not argv or argv[0] == "replay":
        raise UsageError("manifest has no replayable argv")
    argv = list(argv)
    if args.threads is not None and "--threads" not in argv and argv[0] in (
            "denoise", "bench", "angle-sweep", "rate-sweep"):
        argv += ["--threads", str(args.threads)]
    ns = _build_parser().parse_args(argv)
    return ns.func(ns)


# --------------------------------------------------------------------------- parser

def _build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None, metavar="N",
                        help="cap on worker threads (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="anlm", description="Anisotropic nonlocal means denoising and risk lab.")
    p.add_argument("--version", action="version", version=f"anlm {__version__}")
    p.add_argument("--print-schema", nargs="?", const="all", metavar="NAME",
                   choices=["all"] + sorted(SCHEMAS),
                   help="print the JSON config schemas and exit")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="render a Horizon-class image")
    g.add_argument("--contour", required=True, help="contour JSON file or inline JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--sidecar", help="orientation sidecar path (default: OUT with .ornt)")
    g.set_defaults(func=_cmd_generate)

    nz = sub.add_parser("noise", parents=[common], help="add seeded Gaussian noise")
    nz.add_argument("--in", dest="input", required=True)
    nz.add_argument("--xi", type=float, required=True)
    nz.add_argument("--seed", type=int, required=True)
    nz.add_argument("--out", required=True)
    nz.set_defaults(func=_cmd_noise)

    d = sub.add_parser("denoise", parents=[common], help="denoise a PGM image")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--alg", required=True, choices=["mean", "nlm", "oanlm", "danlm", "ganlm"])
    d.add_argument("--params", required=True, help="DenoiseParams JSON file or inline JSON")
    d.add_argument("--out", required=True)
    d.add_argument("--maxval", type=int, default=65535, choices=[255, 65535])
    d.add_argument("--orientation", help="orientation sidecar (required for oanlm)")
    d.add_argument("--k", type=int, help="mean filter side (default: odd width nearest n*delta_l)")
    d.add_argument("--pilot", choices=["noisy", "nlm", "oracle"], default="nlm")
    d.add_argument("--lambda", dest="lam", type=float, default=0.05)
    d.add_argument("--gradient-sigma", type=float, default=_dn.DEFAULT_GRADIENT_SIGMA)
    d.add_argument("--angle-rule", choices=["edge", "gradient"], default="edge")
    d.add_argument("--clean", help="clean PGM for --pilot oracle")
    d.set_defaults(func=_cmd_denoise)

    for name, func, help_ in (
        ("bench", _cmd_bench, "Monte Carlo risk reports"),
        ("angle-sweep", _cmd_angle_sweep, "OANLM risk per constant orientation"),
        ("rate-sweep", _cmd_rate_sweep, "risk decay exponents per estimator"),
    ):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--config", required=True, help="config JSON file or inline JSON")
        s.add_argument("--out", required=True, help="output prefix for .json/.csv/.manifest.json")
        s.set_defaults(func=func)

    r = sub.add_parser("replay", parents=[common], help="re-run a command from its manifest")
    r.add_argument("manifest")
    r.set_defaults(func=_cmd_replay)
    return p


def run_cli(argv=None):
    """Run the CLI and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        if args.print_schema:
            which = args.print_schema
            print(_dumps(SCHEMAS if which == "all" else SCHEMAS[which]))
            return EXIT_OK
        if args.command is None:
            raise UsageError(f"no command given\n{parser.format_usage().strip()}")
        for path in args.func(args):
            log.info("wrote %s", path)
        return EXIT_OK
    except _EarlyExit:
        return EXIT_OK
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except InputError as exc:
        return _fail(EXIT_IO, exc)
    except OSError as exc:
        return _fail(EXIT_IO, f"{exc.filename or ''}: {exc.strerror or exc}")
    except ContourConstraintError as exc:
        return _fail(EXIT_CONSTRAINT, f"contour constraint violated: {exc}")
    except (KeyError, TypeError) as exc:
        return _fail(EXIT_USAGE, f"bad config: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONSTRAINT, exc)


def _fail(code, exc):
    # one diagnostic line; usage errors follow it with the usage line
    lines = str(exc).splitlines() or ["error"]
    sys.stderr.write(f"anlm: error: {lines[0]}\n")
    if code == EXIT_USAGE and len(lines) > 1:
        sys.stderr.write("\n".join(lines[1:]) + "\n")
    return code


def main():
    sys.exit(run_cli())
