"""Command-line front end.

Every subcommand writes its artifact atomically (to ``--out`` or stdout) and
reports failures as a JSON object on stderr with exit code 2 (invalid input),
3 (solver did not converge) or 4 (construction constraint violated).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import mpmath

from . import _numbers
from .analysis import (
    _dumps,
    _encode,
    distortion_lp_norm,
    qc_rotation_check,
    spiral_trace,
    verify_main_1,
    verify_main_p,
)
from .construct import (
    GaugeFunction,
    LambdaSequence,
    RadialMap,
    TargetModulus,
    build_rotation,
    build_submain_1,
    build_submain_p,
    distortion_field,
    stage_distortion,
)
from .exceptions import SpiralMapsError, ValidationError
from .modulus import BallChain, PathFamily, Tube, check_modulus_inequality, discrete_modulus, weighted_energy


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spiralmaps", description="Extremal spiral maps of finite distortion.")
    parser.add_argument("--config", help="JSON file whose keys mirror the subcommand's flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct a map and write its JSON")
    b.add_argument("--theorem", choices=["submain_p", "submain_1", "rotation"], default="submain_p")
    b.add_argument("--p", type=float, default=2.0)
    b.add_argument("--beta", type=float, default=1.0)
    b.add_argument("--epsilon", type=float, default=0.1)
    b.add_argument("--depth", type=_positive_int, default=20)
    b.add_argument("--lambda-file", help="decreasing radii, one per line or a JSON list")
    b.add_argument("--phi", default="r^5", help="target modulus: r^k or table:PATH (CSV r,phi)")
    b.add_argument("--gauge", default="default", help="default or logpow:a")
    b.add_argument("--safety", type=float, default=0.5)
    b.add_argument("--out")

    t = sub.add_parser("trace", help="sample m, tau and K along the radius (CSV)")
    t.add_argument("--map", required=True)
    t.add_argument("--rmin", required=True)
    t.add_argument("--rmax", default="1")
    t.add_argument("--points", type=_positive_int, default=1000)
    t.add_argument("--out")

    d = sub.add_parser("distortion", help="L^p norms of the distortion")
    d.add_argument("--map", required=True)
    d.add_argument("--p", type=float, action="append")
    d.add_argument("--ball", help="ball radius (default R_1)")
    d.add_argument("--out")

    m = sub.add_parser("modulus", help="discrete or explicit-density modulus")
    m.add_argument("--family", choices=["ring", "segray", "ballchain", "tube"], default="ring")
    m.add_argument("--z0", type=float, default=0.25)
    m.add_argument("--grid", type=_positive_int, default=512)
    m.add_argument("--paths", type=_positive_int, default=720)
    m.add_argument("--aspect", type=float, default=math.e, help="R/r for the ring family")
    m.add_argument("--stencil", choices=["cubic", "exact"], default="cubic")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--tol", type=float, default=1e-4, help="relative duality gap for the QP")
    m.add_argument("--max-sweeps", type=_positive_int, default=100_000)
    m.add_argument("--map", help="weight by this map's distortion")
    m.add_argument("--p", type=float, default=2.0)
    m.add_argument("--density-out", help="write the density as CSV plus a .json sidecar")
    m.add_argument("--out")

    v = sub.add_parser("verify", help="check a spiraling or modulus bound and write a report")
    v.add_argument("--check", choices=["main_p", "main_1", "qc", "modeq"], required=True)
    v.add_argument("--map")
    v.add_argument("--p", type=float)
    v.add_argument("--z0", type=float)
    v.add_argument("--alpha", type=float)
    v.add_argument("--variant", choices=["modulus", "radius"], default="modulus")
    v.add_argument("--out")

    e = sub.add_parser("export", help="convert a JSON artifact to plot-ready CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--out")
    return parser


# --------------------------------------------------------------------------
# io


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    """Atomic write: a temporary file in the target directory replaced into place."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spiralmaps-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_map(path: str | None) -> RadialMap:
    if not path:
        raise ValidationError("--map is required for this command")
    return RadialMap.from_json(_read(path))


def _json(obj) -> str:
    return _dumps(_encode(obj)) + "\n"


# --------------------------------------------------------------------------
# commands


def _target(spec: str, p: float) -> TargetModulus:
    if spec.startswith("r^"):
        try:
            k = float(spec[2:])
        except ValueError:
            raise ValidationError(f"bad --phi {spec!r}") from None
        return TargetModulus.power(k, p)
    if spec.startswith("table:"):
        path = spec[len("table:"):]
        rows = [row for row in csv.reader(io.StringIO(_read(path))) if row and not row[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        try:
            return TargetModulus.table([r[0] for r in rows], [r[1] for r in rows], p, name=f"table:{os.path.basename(path)}")
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"bad table {path}: {exc}") from None
    raise ValidationError(f"--phi must be r^k or table:PATH, got {spec!r}")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _gauge(spec: str, target: TargetModulus | None) -> GaugeFunction | None:
    if spec == "default":
        return GaugeFunction.default_for(target) if target else None
    if spec.startswith("logpow:"):
        try:
            return GaugeFunction.log_power(float(spec[len("logpow:"):]))
        except ValueError:
            raise ValidationError(f"bad --gauge {spec!r}") from None
    raise ValidationError(f"--gauge must be default or logpow:a, got {spec!r}")


def _lambda(path: str | None):
    if path is None:
        return None
    text = _read(path).strip()
    try:
        values = json.loads(text, parse_float=_numbers.parse_number) if text.startswith("[") else text.split()
        return LambdaSequence([_numbers.to_mpf(v) for v in values])
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad lambda file {path}: {exc}") from None


def cmd_build(args) -> str:
    lam = _lambda(args.lambda_file)
    if args.theorem == "submain_p":
        target = _target(args.phi, args.p)
        radial = build_submain_p(target, args.depth, _gauge(args.gauge, target), lam, args.safety)
    elif args.theorem == "submain_1":
        radial = build_submain_1(args.depth, args.beta, _gauge(args.gauge, None), args.epsilon, lam, args.safety)
    else:
        radial = build_rotation(args.depth, _gauge(args.gauge, None), None, lam, args.safety)
    return radial.to_json() + "\n"


def cmd_trace(args) -> str:
    radial = _load_map(args.map)
    return spiral_trace(radial, _numbers.to_mpf(args.rmin), _numbers.to_mpf(args.rmax), args.points).to_csv()


def cmd_distortion(args) -> str:
    radial = _load_map(args.map)
    field = distortion_field(radial)
    ball = _numbers.to_mpf(args.ball) if args.ball else (radial.blocks[0].R if radial.blocks else mpmath.mpf(1))
    ps = args.p or [float(radial.meta.get("p", 1))]
    norms = [{"p": p, "norm": distortion_lp_norm(field, p, ball)} for p in ps]
    return _json({"ball_radius": ball, "depth": radial.depth, "norms": norms})


def cmd_modulus(args) -> str:
    weight = distortion_field(_load_map(args.map)) if args.map else None
    if args.family in ("ballchain", "tube"):
        density = BallChain(args.z0) if args.family == "ballchain" else Tube(args.z0)
        report = weighted_energy(density, weight, args.p)
        grid = density.to_grid(args.grid) if args.density_out else None
    else:
        if args.family == "ring":
            if not args.aspect > 1:
                raise ValidationError("--aspect must exceed 1")
            family = PathFamily.ring(args.paths, 1.0, args.aspect)
        else:
            family = PathFamily.segment_to_ray(args.z0, args.paths, args.seed)
        report = discrete_modulus(family, args.grid, weight, args.stencil, args.tol, args.max_sweeps)
        grid = report.density
    if args.density_out and grid is not None:
        _write(args.density_out, grid.to_csv())
        _write(args.density_out + ".json", json.dumps(grid.sidecar(), sort_keys=True) + "\n")
    return report.to_json() + "\n"


def cmd_verify(args) -> str:
    if args.check == "qc":
        if args.alpha is None:
            raise ValidationError("--alpha is required for --check qc")
        rec = qc_rotation_check(args.alpha)
        return _json({
            "check": "qc", "alpha": rec.alpha, "K": rec.K, "bound_coefficient": rec.bound_coefficient,
            "spiral_coefficient": rec.spiral_coefficient, "holds": rec.holds,
            "verdict": "holds" if rec.holds else "violated",
        })
    radial = _load_map(args.map)
    p = args.p if args.p is not None else float(radial.meta.get("p", 2))
    if args.check == "main_p":
        return verify_main_p(radial, p).to_json() + "\n"
    if args.check == "main_1":
        return verify_main_1(radial, variant=args.variant).to_json() + "\n"
    if args.z0 is None:
        raise ValidationError("--z0 is required for --check modeq")
    res = check_modulus_inequality(radial, args.z0, p)
    return _json({
        "check": "modeq", "z0": args.z0, "p": p, "depth": radial.depth,
        "lower": res.lower.value, "upper": res.upper.value, "constants": res.lower.constants,
        "holds": res.holds, "verdict": "holds" if res.holds else "violated",
    })


def cmd_export(args) -> str:
    text = _read(args.input)
    try:
        data = json.loads(text, parse_float=_numbers.parse_number)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.input} is not JSON: {exc}") from None
    f = _numbers.format_number
    if isinstance(data, dict) and "blocks" in data:
        radial = RadialMap.from_json(text)
        rows = ["stage,r,R,alpha,q,K"]
        for n, b in enumerate(radial.blocks, start=1):
            rows.append(f"{n},{f(b.r)},{f(b.R)},{f(b.alpha)},{f(b.q)},{f(stage_distortion(b.alpha, b.q))}")
    elif isinstance(data, dict) and "radii" in data and "ratios" in data:
        rows = ["radius,ratio"] + [f"{f(r)},{f(x)}" for r, x in zip(data["radii"], data["ratios"])]
    elif isinstance(data, dict):
        rows = ["key,value"] + [f"{k},{_flat(v)}" for k, v in sorted(_flatten(data).items())]
    else:
        raise ValidationError("unrecognised artifact")
    return "\n".join(rows) + "\n"


def _flatten(obj, prefix=""):
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _flat(v):
    if isinstance(v, mpmath.mpf):
        return _numbers.format_number(v)
    return json.dumps(v).replace(",", ";")


COMMANDS = {
    "build": cmd_build, "trace": cmd_trace, "distortion": cmd_distortion,
    "modulus": cmd_modulus, "verify": cmd_verify, "export": cmd_export,
}


def _parse(argv):
    parser = _parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ValidationError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = {k.replace("-", "_") for k in config} - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = _parse(sys.argv[1:] if argv is None else argv)
        output = COMMANDS[args.command](args)
        _write(args.out, output)
    except SpiralMapsError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}) + "\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
