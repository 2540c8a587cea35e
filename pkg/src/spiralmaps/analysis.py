"""Rotation, integrability and Hölder diagnostics for radial spiral maps.

Everything is specialised to spiraling at the origin: for a radial map the
lifted argument of ``f(t e^{i theta}) - f(0)`` along a radius is
``theta + tau(t)``, so rotation questions reduce to the profile ``tau``.
Functions accept any object exposing ``modulus(t)``, ``rotation(t)`` and
``depth`` (a :class:`~spiralmaps.construct.RadialMap` or a
:class:`SyntheticProfile`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import _numbers
from ._numbers import highprec, mpf, to_mpf
from .construct import DistortionField, RadialMap
from .exceptions import ValidationError

TWO_PI = 2 * mpmath.pi

# angles beyond this cannot be reduced mod 2 pi meaningfully at the working precision
PHASE_LIMIT = mpf(10) ** (_numbers.DPS - 10)


# --------------------------------------------------------------------------
# pointwise evaluation and rotation


@highprec
def eval_map(radial_map, z) -> mpmath.mpc:
    """``f(t e^{i theta}) = m(t) e^{i(theta + tau(t))}``; ``f(0) = 0``."""
    z = mpmath.mpc(z)
    if not (mpmath.isfinite(z.real) and mpmath.isfinite(z.imag)):
        raise ValidationError("z must be finite")
    t = abs(z)
    if t == 0:
        return mpmath.mpc(0)
    tau = radial_map.rotation(t)
    if abs(tau) > PHASE_LIMIT:
        raise ValidationError(
            f"rotation {_numbers.format_number(tau)} at |z| = {_numbers.format_number(t)} "
            "is beyond the resolvable phase range; use modulus/rotation profiles instead"
        )
    return radial_map.modulus(t) * mpmath.expj(mpmath.arg(z) + tau)


@highprec
def lifted_rotation(radial_map, r):
    """Signed lifted rotation ``tau(r) - tau(1)`` along the positive radius."""
    r = to_mpf(r)
    if not 0 < r <= 1:
        raise ValidationError(f"radius must lie in (0, 1], got {r}")
    return radial_map.rotation(r) - radial_map.rotation(1)


def winding_number(radial_map, z0_mod) -> int:
    """Number of full turns ``floor(|tau(z0)| / 2 pi)`` made between ``z0`` and 1."""
    with mpmath.workdps(_numbers.DPS):
        z0 = to_mpf(z0_mod)
        if not 0 < z0 < 1:
            raise ValidationError(f"z0 must lie in (0, 1), got {z0}")
        turns = abs(lifted_rotation(radial_map, z0)) / TWO_PI
        return int(mpmath.floor(turns))


@dataclass(frozen=True)
class SpiralRate:
    """Ratios ``|tau(r)| / g(r)`` and their tail maxima (a finite-depth limsup proxy)."""

    radii: list
    ratios: list
    tail_max: list
    limsup_estimate: object
    depth: int


@highprec
def spiral_rate(radial_map, radii: Sequence, rate_g: Callable) -> SpiralRate:
    """Compare the lifted rotation with a prescribed rate ``g`` at decreasing radii."""
    rs = [to_mpf(r) for r in radii]
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise ValidationError("radii must be strictly decreasing")
    ratios = []
    for r in rs:
        g = to_mpf(rate_g(r))
        if g <= 0:
            raise ValidationError(f"rate g vanishes at r = {_numbers.format_number(r)}")
        ratios.append(abs(lifted_rotation(radial_map, r)) / g)
    tail, best = [], mpf(0)
    for x in reversed(ratios):
        best = max(best, x)
        tail.append(best)
    tail.reverse()
    limsup = tail[len(tail) // 2] if tail else mpf(0)
    return SpiralRate(rs, ratios, tail, limsup, radial_map.depth)


# --------------------------------------------------------------------------
# distortion integrals


@highprec
def distortion_lp_norm(field: DistortionField, p, ball_radius):
    """``||K||_{L^p(B(0, ball_radius))}`` with annuli clipped to the ball exactly."""
    p = to_mpf(p)
    B = to_mpf(ball_radius)
    if p < 1:
        raise ValidationError("p must be >= 1")
    if B <= 0:
        raise ValidationError("ball radius must be positive")
    total = mpmath.pi * B * B
    for r, R, K in field.annuli:
        lo, hi = min(r, B), min(R, B)
        if hi > lo:
            total += mpmath.pi * (hi * hi - lo * lo) * (K**p - 1)
    return total ** (1 / p)


# --------------------------------------------------------------------------
# bound verification


@dataclass(frozen=True)
class BoundReport:
    """Observed quantity over the bound expression at each tested radius."""

    check: str
    radii: list
    ratios: list
    fitted_C: object
    verdict: str
    depth: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        f = _numbers.format_number
        body = {
            "check": self.check,
            "radii": [_Raw(f(r)) for r in self.radii],
            "ratios": [_Raw(f(x)) for x in self.ratios],
            "fitted_C": _Raw(f(self.fitted_C)),
            "verdict": self.verdict,
            "depth": self.depth,
            "details": _encode(self.details),
        }
        return _dumps(body)


class _Raw(str):
    """A pre-formatted JSON number literal."""


def _encode(obj):
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (mpmath.mpf, float)) and not isinstance(obj, bool):
        return _Raw(_numbers.format_number(obj))
    return obj


def _dumps(obj) -> str:
    """JSON with :class:`_Raw` literals emitted verbatim and sorted keys."""
    if isinstance(obj, _Raw):
        return str(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_dumps(obj[k])}" for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dumps(v) for v in obj) + "]"
    return json.dumps(obj)


def _default_radii(radial_map, radii):
    if radii is not None:
        return [to_mpf(r) for r in radii]
    blocks = getattr(radial_map, "blocks", None)
    if not blocks:
        raise ValidationError("no radii given and the map has no stages")
    return [to_mpf(b.r) for b in blocks]


def _log_inv_modulus(radial_map, r):
    lm = radial_map.log_modulus(r) if hasattr(radial_map, "log_modulus") else mpmath.log(radial_map.modulus(r))
    if lm >= 0:
        raise ValidationError(f"m(r) >= 1 at r = {_numbers.format_number(r)}")
    return -lm


def _grows_through_tail(values) -> bool:
    tail = values[len(values) // 2 :]
    return len(tail) >= 2 and all(b > a for a, b in zip(tail, tail[1:]))


@highprec
def verify_main_p(radial_map, p, radii: Sequence | None = None) -> BoundReport:
    """Ratios ``|tau(r)| / (r^(-1/p) log(1/m(r))^(1/2))`` at the tested radii.

    The verdict is ``consistent`` unless the ratios grow strictly through the
    whole second half of the tested radii (``violated``). ``fitted_C`` is
    the largest ratio.
    """
    p = to_mpf(p)
    if not p > 1:
        raise ValidationError("verify_main_p needs p > 1")
    rs = _default_radii(radial_map, radii)
    ratios = []
    for r in rs:
        bound = r ** (-1 / p) * mpmath.sqrt(_log_inv_modulus(radial_map, r))
        ratios.append(abs(lifted_rotation(radial_map, r)) / bound)
    verdict = "violated" if _grows_through_tail(ratios) else "consistent"
    return BoundReport("main_p", rs, ratios, max(ratios), verdict, radial_map.depth, {"p": float(p)})


@highprec
def verify_main_1(radial_map, radii: Sequence | None = None, variant: str = "modulus") -> BoundReport:
    """Scaled rotation ``r |tau(r)| / log(1/m(r))^(1/2)`` (``variant="radius"``: ``log(1/r)``).

    The verdict is ``tends to 0`` when the second half of the sequence
    strictly decreases and its last value is the smallest observed; else
    ``does not vanish``.
    """
    if variant not in ("modulus", "radius"):
        raise ValidationError("variant must be 'modulus' or 'radius'")
    rs = _default_radii(radial_map, radii)
    vals = []
    for r in rs:
        scale = _log_inv_modulus(radial_map, r) if variant == "modulus" else -mpmath.log(r)
        vals.append(r * abs(lifted_rotation(radial_map, r)) / mpmath.sqrt(scale))
    tail = vals[len(vals) // 2 :]
    decreasing = len(tail) >= 2 and all(b < a for a, b in zip(tail, tail[1:]))
    vanishing = decreasing and vals[-1] == min(vals) and vals[-1] < vals[0]
    verdict = "tends to 0" if vanishing else "does not vanish"
    return BoundReport("main_1", rs, vals, max(vals), verdict, radial_map.depth, {"variant": variant})


@dataclass(frozen=True)
class SyntheticProfile:
    """A radial profile given by callables, for negative controls.

    ``log_modulus(t)`` and ``rotation(t)`` receive mpf radii.
    """

    log_modulus_fn: Callable
    rotation_fn: Callable
    name: str = "synthetic"
    depth: int = 0

    @highprec
    def log_modulus(self, t):
        return to_mpf(self.log_modulus_fn(to_mpf(t)))

    @highprec
    def modulus(self, t):
        return mpmath.exp(self.log_modulus(t))

    @highprec
    def rotation(self, t):
        t = to_mpf(t)
        return to_mpf(self.rotation_fn(t)) if t < 1 else mpf(0)


# --------------------------------------------------------------------------
# Hölder-from-below statistic


@dataclass(frozen=True)
class PairSampler:
    """Random pairs ``(x, y)`` with ``|x - y|`` log-uniform in ``[d_min, d_max]``.

    ``x`` is placed by picking one of the map's regions (stage annuli and
    the gaps between them, inside the unit disc) uniformly, then a radius
    log-uniformly within it and a uniform angle.
    """

    n_pairs: int = 10_000
    d_min: float = 1e-6
    d_max: float = 1e-2
    seed: int = 0
    constant: float = 1.0

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValidationError("n_pairs must be >= 1")
        if not 0 < self.d_min < self.d_max < 1:
            raise ValidationError("need 0 < d_min < d_max < 1")
        if not self.constant > 0:
            raise ValidationError("constant must be positive")


@dataclass(frozen=True)
class HolderStatistic:
    """``sup log|f(x)-f(y)| / log|x-y|`` over sampled pairs.

    ``slack`` is ``log(1/C) / log(1/d)`` at the smallest sampled distance;
    Hölder-from-below with exponent ``a`` is consistent iff
    ``statistic <= a + slack``.
    """

    statistic: float
    slack: float
    n_pairs: int
    worst_pair: tuple
    smallest_distance: float

    def consistent_with(self, exponent: float) -> bool:
        return self.statistic <= exponent + self.slack


def _regions(radial_map):
    """(log_lo, log_hi) of annuli and gaps inside the unit disc, outside-in."""
    edges = [mpf(0)]
    for b in getattr(radial_map, "blocks", ()):
        edges += [mpmath.log(to_mpf(b.R)), mpmath.log(to_mpf(b.r))]
    edges.append(edges[-1] - 1)
    out = []
    for hi, lo in zip(edges, edges[1:]):
        hi = min(hi, mpf(0))
        if lo < hi:
            out.append((lo, hi))
    return out


def _image_gap(radial_map, x, y):
    """``|f(x) - f(y)|``, or the radial lower bound ``|m(|x|) - m(|y|)|`` when the
    relative phase is beyond the working precision."""
    tx, ty = abs(x), abs(y)
    tau_x, tau_y = radial_map.rotation(tx), radial_map.rotation(ty)
    mx, my = radial_map.modulus(tx), radial_map.modulus(ty)
    if max(abs(tau_x), abs(tau_y)) > PHASE_LIMIT:
        return abs(mx - my)
    turn = tau_y - tau_x
    return abs(mx * mpmath.expj(mpmath.arg(x)) - my * mpmath.expj(mpmath.arg(y) + turn))


@highprec
def holder_lower_exponent(radial_map, sampler: PairSampler | None = None) -> HolderStatistic:
    """Empirical Hölder-from-below exponent over randomly sampled close pairs.

    Where the rotation exceeds the resolvable phase range the radial gap
    ``|m(|x|) - m(|y|)| <= |f(x) - f(y)|`` is used, which can only raise the
    statistic.
    """
    sampler = sampler or PairSampler()
    rng = np.random.default_rng(sampler.seed)
    regions = _regions(radial_map)
    n = sampler.n_pairs
    which = rng.integers(len(regions), size=n)
    pos = rng.random(n)
    theta = rng.uniform(0, 2 * math.pi, size=n)
    psi = rng.uniform(0, 2 * math.pi, size=n)
    log_d = rng.uniform(math.log(sampler.d_min), math.log(sampler.d_max), size=n)
    best, worst = -mpmath.inf, None
    for k in range(n):
        lo, hi = regions[which[k]]
        x = mpmath.exp(lo + (hi - lo) * mpf(float(pos[k]))) * mpmath.expj(mpf(float(theta[k])))
        d = mpmath.exp(mpf(float(log_d[k])))
        y = x + d * mpmath.expj(mpf(float(psi[k])))
        diff = _image_gap(radial_map, x, y)
        if diff == 0:
            raise ValidationError("coincident images for a sampled pair")
        value = mpmath.log(diff) / mpmath.log(d)
        if value > best:
            best, worst = value, (complex(x), complex(y))
    d_small = float(np.exp(log_d.min()))
    slack = math.log(1 / sampler.constant) / math.log(1 / d_small)
    return HolderStatistic(float(best), slack, n, worst, d_small)


# --------------------------------------------------------------------------
# quasiconformal spiral check


@dataclass(frozen=True)
class QCCheck:
    alpha: object
    K: object
    bound_coefficient: object
    spiral_coefficient: object
    holds: bool


@highprec
def qc_rotation_check(alpha) -> QCCheck:
    """Distortion of ``z |z|^(i alpha)`` and the rotation coefficient it permits.

    ``K = ((sqrt(4 + alpha^2) + alpha)/2)^2`` and the admissible rotation per
    unit of ``log(1/r)`` is ``(K - 1/K)/2``; the spiral uses ``alpha``.
    """
    a = to_mpf(alpha)
    if not a > 0:
        raise ValidationError("alpha must be positive")
    K = ((mpmath.sqrt(4 + a * a) + a) / 2) ** 2
    bound = (K - 1 / K) / 2
    return QCCheck(a, K, bound, a, bool(a <= bound))


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class SpiralTrace:
    """Samples ``(t, m(t), tau(t), K(t))`` along the positive radius, ``t`` decreasing."""

    t: list
    modulus: list
    rotation: list
    distortion: list

    def to_csv(self) -> str:
        f = _numbers.format_number
        rows = ["t,modulus,rotation,distortion"]
        rows += [
            f"{f(a)},{f(b)},{f(c)},{f(d)}" for a, b, c, d in zip(self.t, self.modulus, self.rotation, self.distortion)
        ]
        return "\n".join(rows) + "\n"


@highprec
def spiral_trace(radial_map: RadialMap, rmin, rmax=1, points: int = 1000) -> SpiralTrace:
    """Log-spaced samples from ``rmax`` down to ``rmin``."""
    lo, hi = to_mpf(rmin), to_mpf(rmax)
    if not 0 < lo < hi:
        raise ValidationError("need 0 < rmin < rmax")
    if points < 2:
        raise ValidationError("points must be >= 2")
    a, b = mpmath.log(hi), mpmath.log(lo)
    ts = [mpmath.exp(a + (b - a) * k / (points - 1)) for k in range(points)]
    return SpiralTrace(
        ts,
        [radial_map.modulus(t) for t in ts],
        [radial_map.rotation(t) for t in ts],
        [radial_map.distortion(t) for t in ts],
    )
