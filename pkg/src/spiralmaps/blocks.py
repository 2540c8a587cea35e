"""Radial building blocks: the log-spiral rotation and the stretch-rotation map.

Both blocks are the identity outside ``|z| > R``, a similarity inside
``|z| < r`` and act as ``z -> z (|z|/R)^(q-1+i*alpha)`` on the closed annulus
``r <= |z| <= R`` (the annulus branch owns both boundary circles).

Everything here works in double precision on numpy arrays; parameters coming
from deep constructions (mpf values far outside the double range) belong in
:mod:`spiralmaps.construct` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np

from .exceptions import ValidationError


@dataclass(frozen=True)
class Annulus:
    """The closed ring ``r_inner <= |z| <= R_outer``."""

    r_inner: object
    R_outer: object

    def __post_init__(self):
        r, R = _real(self.r_inner, "r_inner"), _real(self.R_outer, "R_outer")
        if not 0 < r < R:
            raise ValidationError(f"need 0 < r_inner < R_outer, got {self.r_inner!r}, {self.R_outer!r}")

    def contains(self, t) -> bool:
        return self.r_inner <= t <= self.R_outer


@dataclass(frozen=True)
class BlockParams:
    """One stage of an iterated construction.

    ``q = 1`` is the pure rotation block. Values may be floats or mpmath
    numbers; the double-precision evaluators below convert on use.
    """

    annulus: Annulus
    alpha: object
    q: object = 1

    def __post_init__(self):
        _real(self.alpha, "alpha")
        if _real(self.q, "q") < 1:
            raise ValidationError(f"stretch exponent q must be >= 1, got {self.q!r}")

    @classmethod
    def on(cls, r, R, alpha, q=1) -> "BlockParams":
        return cls(Annulus(r, R), alpha, q)

    @property
    def r(self):
        return self.annulus.r_inner

    @property
    def R(self):
        return self.annulus.R_outer


@dataclass(frozen=True)
class DifferentialSample:
    op_norm: float
    jacobian: float
    distortion: float
    degenerate: bool = False


def _real(x, name: str):
    try:
        # huge mpf values are finite even if they do not fit a double
        ok = mpmath.isfinite(x) if isinstance(x, mpmath.mpf) else math.isfinite(x)
    except TypeError:
        raise ValidationError(f"{name} must be a real number, got {x!r}") from None
    if not ok:
        raise ValidationError(f"{name} must be finite, got {x!r}")
    return x


def _points(z) -> np.ndarray:
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must have finite coordinates")
    return arr


def _floats(block: BlockParams):
    return float(block.r), float(block.R), float(block.alpha), float(block.q)


def _regions(t: np.ndarray, r: float, R: float):
    outside = t > R
    inside = t < r
    return outside, inside, ~(outside | inside)


def stretch_block_eval(block: BlockParams, z):
    """Evaluate the stretch-rotation block at ``z`` (scalar or array)."""
    pts = _points(z)
    r, R, alpha, q = _floats(block)
    t = np.abs(pts)
    outside, inside, ring = _regions(t, r, R)
    # the annulus formula evaluated at t = r gives the inner similarity factor
    s = np.where(inside, r, np.where(ring, t, R)) / R
    with np.errstate(divide="ignore"):
        log_s = np.log(s)
    factor = np.exp((q - 1.0) * log_s + 1j * alpha * log_s)
    out = np.where(outside, pts, pts * factor)
    return out[()] if out.ndim == 0 else out


def rotation_block_eval(block: BlockParams, z):
    """Evaluate the rotation block; requires ``block.q == 1``."""
    if block.q != 1:
        raise ValidationError(f"rotation block needs q = 1, got q = {block.q!r}")
    return stretch_block_eval(block, z)


def _branch_values(block: BlockParams, z, ring_value, inside_value):
    pts = _points(z)
    t = np.abs(pts)
    if np.any(t == 0):
        raise ValidationError("differential quantities are evaluated at z != 0")
    r, R, _, _ = _floats(block)
    outside, inside, ring = _regions(t, r, R)
    out = np.ones_like(t)
    out = np.where(ring, ring_value(t), out)
    out = np.where(inside, inside_value, out)
    return out[()] if out.ndim == 0 else out


def _spiral_factor(alpha: float, q: float) -> float:
    """(|q+1+i*alpha| + |q-1+i*alpha|) / 2."""
    return (math.hypot(q + 1.0, alpha) + math.hypot(q - 1.0, alpha)) / 2.0


def block_differential_norm(block: BlockParams, z):
    """Operator norm ``|d phi| + |dbar phi|`` from the three-case closed form."""
    r, R, alpha, q = _floats(block)
    c = _spiral_factor(alpha, q)
    return _branch_values(block, z, lambda t: (t / R) ** (q - 1.0) * c, (r / R) ** (q - 1.0))


def block_jacobian(block: BlockParams, z):
    r, R, _, q = _floats(block)
    return _branch_values(block, z, lambda t: q * (t / R) ** (2.0 * (q - 1.0)), (r / R) ** (2.0 * (q - 1.0)))


def block_distortion(block: BlockParams, z):
    """Distortion ``|D phi|^2 / J``: constant on the annulus, 1 elsewhere."""
    return _branch_values(block, z, lambda t: np.full_like(t, annulus_distortion(block.alpha, block.q)), 1.0)


def annulus_distortion(alpha, q) -> float:
    """``(|q+1+i*alpha| + |q-1+i*alpha|)^2 / (4q)`` in double precision."""
    alpha, q = float(alpha), float(q)
    return _spiral_factor(alpha, q) ** 2 / q


def fd_oracle(
    map_eval: Callable[[complex], complex],
    z: complex,
    rel_step: float = 1e-6,
    breakpoints: Sequence[float] = (),
) -> DifferentialSample:
    """Central finite-difference estimate of ``|Df|``, ``J`` and ``K`` at ``z``.

    Parameters
    ----------
    map_eval : callable
        Complex-to-complex map. Only called at the four stencil points.
    z : complex
        Evaluation point.
    rel_step : float
        Step relative to ``|z|`` (absolute when ``z == 0``), in ``(0, 1e-3]``.
    breakpoints : sequence of float
        Radii where the map is only piecewise smooth; ``|z|`` must stay more
        than two steps away from each of them.
    """
    if not 0 < rel_step <= 1e-3:
        raise ValidationError(f"rel_step must lie in (0, 1e-3], got {rel_step!r}")
    z = complex(_points(z))
    step = rel_step * abs(z) if z != 0 else rel_step
    for b in breakpoints:
        if abs(abs(z) - float(b)) <= 2 * step:
            raise ValidationError(f"|z| = {abs(z)!r} is within two steps of the breakpoint {b!r}")
    fx = (complex(map_eval(z + step)) - complex(map_eval(z - step))) / (2 * step)
    fy = (complex(map_eval(z + 1j * step)) - complex(map_eval(z - 1j * step))) / (2 * step)
    d = abs((fx - 1j * fy) / 2)
    dbar = abs((fx + 1j * fy) / 2)
    op_norm = d + dbar
    jac = d * d - dbar * dbar
    if jac <= 1e-12 * op_norm * op_norm:
        return DifferentialSample(op_norm, jac, math.inf, degenerate=True)
    return DifferentialSample(op_norm, jac, op_norm * op_norm / jac)
