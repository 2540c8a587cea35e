"""Moduli of path families: explicit admissible densities, a grid QP, and bounds.

Two explicit densities bound the weighted modulus of the family of paths
joining ``E = [z0, 1]`` to ``F = (-inf, 0]``:

* the ball chain, ``rho = 2/r_j`` on ``B_j \\ B_{j-1}`` with
  ``B_j = B(2^j z0, 2^j z0)``, for ``K`` in ``L^p``, ``p > 1``;
* the tube, ``rho = 1/z0`` on the stadium ``{dist(z, E) < z0}``, for ``p = 1``.

Their energies against a radial piecewise-constant distortion are
integrated exactly through lens areas. Generic families go through
:func:`discrete_modulus`, a nonnegative least-squares style QP on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
import scipy.integrate
import scipy.sparse as sp

from . import _numbers
from ._numbers import highprec, mpf, to_mpf
from .analysis import winding_number
from .construct import DistortionField, RadialMap, distortion_field
from .exceptions import ConvergenceError, ValidationError

# --------------------------------------------------------------------------
# path families


@dataclass(frozen=True)
class PathFamily:
    """Polylines (complex vertex arrays) plus a descriptor of how they were generated."""

    paths: tuple
    descriptor: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        paths = tuple(np.asarray(p, dtype=complex) for p in self.paths)
        for p in paths:
            if p.ndim != 1 or len(p) < 2:
                raise ValidationError("every path needs at least two vertices")
            if not np.all(np.isfinite(p)):
                raise ValidationError("path vertices must be finite")
            if not np.sum(np.abs(np.diff(p))) > 0:
                raise ValidationError("paths must have positive length")
        object.__setattr__(self, "paths", paths)

    def __len__(self):
        return len(self.paths)

    @classmethod
    def ring(cls, n_paths: int, r_inner: float = 1.0, r_outer: float = math.e) -> "PathFamily":
        """Radial segments joining the two boundary circles at evenly spread angles."""
        if n_paths < 0:
            raise ValidationError("n_paths must be >= 0")
        if not 0 < r_inner < r_outer:
            raise ValidationError("need 0 < r_inner < r_outer")
        angles = 2 * np.pi * (np.arange(n_paths) + 0.5) / n_paths
        paths = tuple(np.array([r_inner, r_outer]) * np.exp(1j * a) for a in angles)
        return cls(paths, "ring", {"n_paths": n_paths, "r_inner": r_inner, "r_outer": r_outer})

    @classmethod
    def segment_to_ray(cls, z0: float, n_paths: int, seed: int = 0, max_bends: int = 3) -> "PathFamily":
        """Random polylines from ``[z0, 1]`` to ``(-inf, 0]`` with up to ``max_bends`` interior vertices."""
        if not 0 < z0 < 1:
            raise ValidationError("z0 must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        paths = []
        for _ in range(n_paths):
            start = rng.uniform(z0, 1.0)
            end = -rng.uniform(0.0, 1.5)
            bends = rng.uniform(-1.5, 1.5, size=(rng.integers(0, max_bends + 1), 2))
            paths.append(np.concatenate([[start], bends[:, 0] + 1j * bends[:, 1], [end]]))
        return cls(tuple(paths), "segment-to-ray", {"z0": z0, "n_paths": n_paths, "seed": seed})

    def subset(self, indices: Sequence[int]) -> "PathFamily":
        return PathFamily(tuple(self.paths[i] for i in indices), self.descriptor, {**self.params, "subset": len(indices)})

    def bounding_square(self) -> tuple[float, float, float]:
        """``(x0, y0, side)`` of the smallest centred square containing every path."""
        if not self.paths:
            raise ValidationError("empty family has no extent")
        pts = np.concatenate(self.paths)
        cx = (pts.real.max() + pts.real.min()) / 2
        cy = (pts.imag.max() + pts.imag.min()) / 2
        half = max(pts.real.max() - cx, pts.imag.max() - cy)
        return cx - half, cy - half, 2 * half


# --------------------------------------------------------------------------
# grid densities


@dataclass(frozen=True)
class GridDensity:
    """Cell values ``rho[iy, ix]`` on the square cells ``[x0 + ix h, x0 + (ix+1) h] x ...``."""

    x0: float
    y0: float
    h: float
    values: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError("grid values must be a 2-d array")
        if not self.h > 0:
            raise ValidationError("cell size must be positive")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValidationError("densities must be finite and nonnegative")
        object.__setattr__(self, "values", vals)
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.shape != vals.shape or np.any(w < 0):
                raise ValidationError("weight must be nonnegative with the grid's shape")
            object.__setattr__(self, "weight", w)

    @property
    def shape(self):
        return self.values.shape

    def centers(self) -> np.ndarray:
        ny, nx = self.values.shape
        xs = self.x0 + (np.arange(nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(ny) + 0.5) * self.h
        return xs[None, :] + 1j * ys[:, None]

    def energy(self, weight=None) -> float:
        """Midpoint rule for ``int omega rho^2``."""
        w = self.weight if weight is None else np.asarray(weight, dtype=float)
        rho2 = self.values**2
        if w is not None:
            with np.errstate(invalid="ignore"):
                rho2 = np.where(rho2 > 0, rho2 * w, 0.0)
        return float(rho2.sum() * self.h * self.h)

    def line_integral(self, path) -> float:
        """``int rho ds`` along a polyline by exact segment-cell intersection lengths."""
        cells, lengths = _polyline_cells(np.asarray(path, dtype=complex), self.x0, self.y0, self.h, self.values.shape)
        return float(np.sum(self.values.ravel()[cells] * lengths))

    def to_csv(self) -> str:
        f = _numbers.format_number
        c = self.centers().ravel()
        rows = ["x,y,rho"] + [f"{f(float(z.real))},{f(float(z.imag))},{f(float(v))}" for z, v in zip(c, self.values.ravel())]
        return "\n".join(rows) + "\n"

    def sidecar(self) -> dict:
        ny, nx = self.values.shape
        return {"x0": self.x0, "y0": self.y0, "h": self.h, "nx": nx, "ny": ny, "order": "row-major, y outer"}


def _segment_cells(p0: complex, p1: complex, x0: float, y0: float, h: float, shape):
    """Cells crossed by the segment and the length inside each."""
    d = p1 - p0
    cuts = [np.array([0.0, 1.0])]
    for a, b, o in ((p0.real, d.real, x0), (p0.imag, d.imag, y0)):
        if b != 0:
            lo, hi = sorted(((a - o) / h, (a + b - o) / h))
            ks = np.arange(math.ceil(lo), math.floor(hi) + 1)
            cuts.append((ks * h + o - a) / b)
    t = np.unique(np.clip(np.concatenate(cuts), 0.0, 1.0))
    mid = p0 + d * (t[:-1] + t[1:]) / 2
    seg = np.diff(t) * abs(d)
    ny, nx = shape
    ix = np.floor((mid.real - x0) / h).astype(int)
    iy = np.floor((mid.imag - y0) / h).astype(int)
    keep = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny) & (seg > 0)
    return iy[keep] * nx + ix[keep], seg[keep]


def _polyline_cells(path, x0, y0, h, shape):
    parts = [_segment_cells(a, b, x0, y0, h, shape) for a, b in zip(path[:-1], path[1:])]
    return np.concatenate([c for c, _ in parts]), np.concatenate([s for _, s in parts])


def _cubic_bspline(x):
    x = np.abs(x)
    return np.where(x < 1, 2 / 3 - x**2 + x**3 / 2, np.where(x < 2, (2 - x) ** 3 / 6, 0.0))


def _polyline_bspline(path, x0, y0, h, shape, oversample=4):
    """Quadrature of a cubic B-spline density (coefficients at cell centres) along a polyline."""
    ny, nx = shape
    cells, weights = [], []
    for p0, p1 in zip(path[:-1], path[1:]):
        length = abs(p1 - p0)
        n = max(1, math.ceil(length / (h / oversample)))
        pts = p0 + (p1 - p0) * (np.arange(n) + 0.5) / n
        ds = length / n
        u = (pts.real - x0) / h - 0.5
        v = (pts.imag - y0) / h - 0.5
        i0, j0 = np.floor(u).astype(int), np.floor(v).astype(int)
        for a in range(-1, 3):
            wu = _cubic_bspline(u - (i0 + a))
            ii = np.clip(i0 + a, 0, nx - 1)
            for b in range(-1, 3):
                wv = _cubic_bspline(v - (j0 + b))
                jj = np.clip(j0 + b, 0, ny - 1)
                cells.append(jj * nx + ii)
                weights.append(wu * wv * ds)
    return np.concatenate(cells), np.concatenate(weights)


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ModulusReport:
    """A modulus value labelled as an upper bound, lower bound or discrete estimate."""

    value: object
    kind: str
    inputs: dict = field(default_factory=dict)
    constants: dict | None = None
    iterations: int | None = None
    max_violation: float | None = None
    dual_value: float | None = None
    density: GridDensity | None = None

    KINDS = ("upper_bound", "lower_bound", "discrete_estimate")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown report kind {self.kind!r}")
        if self.value < 0:
            raise ValidationError("modulus values are nonnegative")

    def to_json(self) -> str:
        from .analysis import _dumps, _encode

        body = {"value": self.value, "kind": self.kind, "inputs": self.inputs}
        if self.constants is not None:
            body["constants"] = self.constants
        for key in ("iterations", "max_violation", "dual_value"):
            if getattr(self, key) is not None:
                body[key] = getattr(self, key)
        return _dumps(_encode(body))


# --------------------------------------------------------------------------
# lens areas


@highprec
def _lens_sliver(x):
    """``asin(x) - x sqrt(1 - x^2)`` without cancellation for small ``x``."""
    if x < mpf(10) ** -8:
        return (mpf(2) / 3) * x**3 + x**5 / 5 + 3 * x**7 / 28
    return mpmath.asin(x) - x * mpmath.sqrt(1 - x * x)


@highprec
def lens_area(t, c):
    """Area of ``B(0, t) ∩ B(c, c)`` for ``c > 0``."""
    t, c = to_mpf(t), to_mpf(c)
    if t <= 0:
        return mpf(0)
    if t >= 2 * c:
        return mpmath.pi * c * c
    x = t / (2 * c)
    return t * t * (mpmath.pi / 2 - mpmath.asin(x)) + 2 * c * c * _lens_sliver(x)


@highprec
def _nested_lens_gap(t, c_small, c_big):
    """``|B(0,t) ∩ B(c_big,c_big)| - |B(0,t) ∩ B(c_small,c_small)|`` with the leading terms cancelled."""
    t = to_mpf(t)
    if t >= 2 * c_small:
        return lens_area(t, c_big) - mpmath.pi * c_small * c_small
    xs, xb = t / (2 * c_small), t / (2 * c_big)
    return t * t * (mpmath.asin(xs) - mpmath.asin(xb)) + 2 * (c_big**2 * _lens_sliver(xb) - c_small**2 * _lens_sliver(xs))


# --------------------------------------------------------------------------
# explicit densities


class _ExplicitDensity:
    def line_integral(self, path) -> float:
        path = np.asarray(path, dtype=complex)
        return float(sum(self._segment_integral(a, b) for a, b in zip(path[:-1], path[1:])))

    def to_grid(self, n: int, box: tuple[float, float, float] | None = None) -> GridDensity:
        """Midpoint samples on an ``n x n`` grid over ``box = (x0, y0, side)``."""
        if n < 1:
            raise ValidationError("grid size must be >= 1")
        x0, y0, side = box or self.support_box()
        h = side / n
        xs = x0 + (np.arange(n) + 0.5) * h
        ys = y0 + (np.arange(n) + 0.5) * h
        return GridDensity(x0, y0, h, self.evaluate(xs[None, :] + 1j * ys[:, None]))


def _chord(p0: complex, p1: complex, center: complex, radius: float) -> float:
    """Length of the segment inside the open disc."""
    span = _chord_interval(p0, p1, center, radius)
    return (span[1] - span[0]) * abs(p1 - p0) if span else 0.0


@dataclass(frozen=True)
class BallChain(_ExplicitDensity):
    """``rho = 2/r_j`` on ``B_j \\ B_{j-1}``, ``B_j = B(r_j, r_j)``, ``r_j = 2^j z0``, ``j = 0..n``."""

    z0: float

    def __post_init__(self):
        if not 0 < self.z0 < 1:
            raise ValidationError("z0 must lie in (0, 1)")

    @property
    def n(self) -> int:
        """Smallest ``n`` with ``2^n z0 >= 1``."""
        n = 0
        while 2.0**n * self.z0 < 1:
            n += 1
        return n

    @property
    def radii(self) -> list[float]:
        return [2.0**j * self.z0 for j in range(self.n + 1)]

    def energy(self) -> float:
        """``pi (4 + 3n)``: ``(2/r_j)^2`` times ``|B_j| - |B_{j-1}| = (3/4) pi r_j^2`` (``pi r_0^2`` for ``j = 0``)."""
        return math.pi * (4 + 3 * self.n)

    def support_box(self):
        r = self.radii[-1]
        return (0.0, -r, 2 * r)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for r in reversed(self.radii):
            out = np.where(np.abs(z - r) < r, 2 / r, out)
        return out

    def _segment_integral(self, p0, p1):
        total, inner = 0.0, 0.0
        for r in self.radii:
            length = _chord(p0, p1, r, r)
            total += 2 / r * (length - inner)
            inner = length
        return total

    @highprec
    def weighted_energy(self, field: DistortionField):
        """Exact ``int K rho^2`` for a radial piecewise-constant ``K``."""
        radii = [to_mpf(r) for r in self.radii]
        total = mpf(0)
        for j, c in enumerate(radii):
            piece_area = mpmath.pi * c * c * (1 if j == 0 else mpf(3) / 4)
            excess = mpf(0)
            for r, R, K in field.annuli:
                if r >= 2 * c:
                    continue
                if j == 0:
                    gain = lens_area(R, c) - lens_area(r, c)
                else:
                    gain = _nested_lens_gap(R, radii[j - 1], c) - _nested_lens_gap(r, radii[j - 1], c)
                excess += (K - 1) * gain
            total += (2 / c) ** 2 * (piece_area + excess)
        return total

    @highprec
    def energy_dual_norm(self, p):
        """``||rho^2||_{L^{p/(p-1)}}`` for the Hölder split."""
        s = to_mpf(p) / (to_mpf(p) - 1)
        acc = mpf(0)
        for j, c in enumerate(to_mpf(r) for r in self.radii):
            acc += (2 / c) ** (2 * s) * mpmath.pi * c * c * (1 if j == 0 else mpf(3) / 4)
        return acc ** (1 / s)


@dataclass(frozen=True)
class Tube(_ExplicitDensity):
    """``rho = 1/z0`` on the stadium ``{dist(z, [z0, 1]) < z0}``."""

    z0: float

    def __post_init__(self):
        if not 0 < self.z0 < 1:
            raise ValidationError("z0 must lie in (0, 1)")

    @property
    def area(self) -> float:
        return 2 * self.z0 * (1 - self.z0) + math.pi * self.z0**2

    def energy(self) -> float:
        """``(2 z0 (1 - z0) + pi z0^2) / z0^2``."""
        return self.area / self.z0**2

    def support_box(self):
        z = self.z0
        side = 1 + 2 * z
        return (0.0, -side / 2, side)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x = np.clip(z.real, self.z0, 1.0)
        return np.where(np.abs(z - x) < self.z0, 1 / self.z0, 0.0)

    def _segment_integral(self, p0, p1):
        z = self.z0
        intervals = []
        d = p1 - p0
        length = abs(d)
        if length == 0:
            return 0.0
        for center in (z, 1.0):
            c = _chord_interval(p0, p1, center, z)
            if c:
                intervals.append(c)
        # the rectangle [z0, 1] x (-z0, z0)
        lo, hi = 0.0, 1.0
        for a, b, lo_b, hi_b in ((p0.real, d.real, z, 1.0), (p0.imag, d.imag, -z, z)):
            if b == 0:
                if not lo_b <= a <= hi_b:
                    lo, hi = 1.0, 0.0
            else:
                t1, t2 = sorted(((lo_b - a) / b, (hi_b - a) / b))
                lo, hi = max(lo, t1), min(hi, t2)
        if hi > lo:
            intervals.append((lo, hi))
        intervals.sort()
        covered, end = 0.0, -math.inf
        for a, b in intervals:
            if b > end:
                covered += b - max(a, end)
                end = b
        return covered * length / z

    def _slice_area(self, t: float) -> float:
        """Area of the stadium inside ``B(0, t)`` for ``t > z0``, by quadrature over heights."""
        z = self.z0

        def width(y):
            half = math.sqrt(max(z * z - y * y, 0.0))
            reach = math.sqrt(max(t * t - y * y, 0.0))
            return max(0.0, min(1 + half, reach) - max(z - half, -reach))

        value, _ = scipy.integrate.quad(width, 0.0, min(t, z), epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2 * value

    @highprec
    def stadium_in_disc(self, t):
        t = to_mpf(t)
        if t <= self.z0:
            return lens_area(t, self.z0)
        if t >= 1 + self.z0:
            return mpf(self.area)
        return mpf(self._slice_area(float(t)))

    @highprec
    def weighted_energy(self, field: DistortionField):
        """Exact ``int K rho^2`` for radial piecewise-constant ``K`` (quadrature beyond ``|z| > z0``)."""
        excess = mpf(0)
        for r, R, K in field.annuli:
            if r >= 1 + self.z0:
                continue
            excess += (K - 1) * (self.stadium_in_disc(R) - self.stadium_in_disc(r))
        return (mpf(self.area) + excess) / to_mpf(self.z0) ** 2

    @highprec
    def energy_dual_norm(self, p):
        s = to_mpf(p) / (to_mpf(p) - 1)
        z = to_mpf(self.z0)
        return (z ** (-2 * s) * mpf(self.area)) ** (1 / s)


def _chord_interval(p0, p1, center, radius):
    d = p1 - p0
    f = p0 - center
    a = abs(d) ** 2
    b = 2 * (f.real * d.real + f.imag * d.imag)
    c = abs(f) ** 2 - radius**2
    disc = b * b - 4 * a * c
    if a == 0 or disc <= 0:
        return None
    s = math.sqrt(disc)
    lo, hi = max((-b - s) / (2 * a), 0.0), min((-b + s) / (2 * a), 1.0)
    return (lo, hi) if hi > lo else None


def ball_chain_density(z0: float) -> BallChain:
    return BallChain(z0)


def tube_density(z0: float) -> Tube:
    return Tube(z0)


# --------------------------------------------------------------------------
# energies and bounds


def weighted_energy(density, field: DistortionField | None = None, p: float = 2, hoelder_split: bool = False,
                    ball_radius: float = 4.0) -> ModulusReport:
    """Upper bound ``int K rho^2`` on the weighted modulus of any family ``rho`` is admissible for.

    With ``hoelder_split`` the bound is ``||K||_{L^p(B(0, ball_radius))} ||rho^2||_{L^{p/(p-1)}}``,
    which needs ``p > 1``.
    """
    from .analysis import distortion_lp_norm

    field = field or DistortionField(())
    if p < 1:
        raise ValidationError("p must be >= 1")
    inputs = {"p": p, "hoelder_split": hoelder_split, "density": type(density).__name__}
    if isinstance(density, (BallChain, Tube)):
        inputs["z0"] = density.z0
    if hoelder_split:
        if not p > 1:
            raise ValidationError("the Hölder split needs p > 1")
        if isinstance(density, GridDensity):
            raise ValidationError("the Hölder split is only available for explicit densities")
        with mpmath.workdps(_numbers.DPS):
            value = distortion_lp_norm(field, p, ball_radius) * density.energy_dual_norm(p)
        inputs["ball_radius"] = ball_radius
    elif isinstance(density, GridDensity):
        K = field.values(np.abs(density.centers()))
        value = density.energy(K)
        inputs["grid"] = list(density.shape)
    else:
        value = density.weighted_energy(field)
    return ModulusReport(value, "upper_bound", inputs)


@highprec
def winding_lower_bound(radial_map, z0) -> ModulusReport:
    """``n(z0)^2 / log(c_f / r_f)`` with ``c_f = m(1)``, ``r_f = m(z0)``."""
    z0 = to_mpf(z0)
    if not 0 < z0 < 1:
        raise ValidationError("z0 must lie in (0, 1)")
    n = winding_number(radial_map, z0)
    c_f, r_f = radial_map.modulus(1), radial_map.modulus(z0)
    log_ratio = mpmath.log(c_f) - radial_map.log_modulus(z0)
    value = mpf(n) ** 2 / log_ratio if n else mpf(0)
    return ModulusReport(value, "lower_bound", {"z0": z0}, {"c_f": c_f, "r_f": r_f, "n": n})


@dataclass(frozen=True)
class ModulusCheck:
    lower: ModulusReport
    upper: ModulusReport
    holds: bool


def compare_bounds(lower: ModulusReport, upper: ModulusReport) -> ModulusCheck:
    if lower.kind != "lower_bound" or upper.kind != "upper_bound":
        raise ValidationError("compare a lower_bound report with an upper_bound report")
    return ModulusCheck(lower, upper, bool(lower.value <= upper.value))


def check_modulus_inequality(radial_map: RadialMap, z0, p: float) -> ModulusCheck:
    """Winding lower bound against the ball-chain (``p > 1``) or tube (``p = 1``) upper bound."""
    if p < 1:
        raise ValidationError("p must be >= 1")
    z0f = float(z0)
    density = BallChain(z0f) if p > 1 else Tube(z0f)
    upper = weighted_energy(density, distortion_field(radial_map), p)
    return compare_bounds(winding_lower_bound(radial_map, z0), upper)


def scaling_slope(z0s: Sequence[float], values: Sequence) -> float:
    """Least-squares slope of ``log value`` against ``log z0``."""
    x = np.log(np.asarray(z0s, dtype=float))
    y = np.array([float(mpmath.log(to_mpf(v))) for v in values])
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# discrete modulus


STENCILS = ("cubic", "exact")


def discrete_modulus(
    family: PathFamily,
    grid: int = 512,
    weight=None,
    stencil: str = "cubic",
    tol: float = 1e-4,
    max_sweeps: int = 100_000,
    box: tuple[float, float, float] | None = None,
) -> ModulusReport:
    """Minimise ``sum omega rho^2 h^2`` over ``rho >= 0`` with ``int_gamma rho ds >= 1`` for every path.

    ``stencil="cubic"`` represents ``rho`` by cubic B-spline coefficients at
    cell centres (path integrals by oversampled quadrature, energy lumped to
    the coefficients); ``"exact"`` uses piecewise-constant cells with exact
    segment-cell lengths. The QP is solved in its dual by cyclic coordinate
    ascent (Hildreth's method) until the relative duality gap is below
    ``tol``; the returned value is the energy of the primal iterate rescaled
    to be exactly admissible, so it is feasible for the discrete problem.

    ``weight`` is a :class:`DistortionField`, an ``(grid, grid)`` array or None.
    """
    if stencil not in STENCILS:
        raise ValidationError(f"stencil must be one of {STENCILS}")
    if grid < 2:
        raise ValidationError("grid must be >= 2")
    inputs = {"grid": grid, "paths": len(family), "stencil": stencil, "family": family.descriptor}
    if len(family) == 0:
        return ModulusReport(0.0, "discrete_estimate", inputs, iterations=0, max_violation=0.0)
    x0, y0, side = box or family.bounding_square()
    h = side / grid
    shape = (grid, grid)
    rows, cols, vals = [], [], []
    for i, path in enumerate(family.paths):
        if stencil == "cubic":
            c, w = _polyline_bspline(path, x0, y0, h, shape)
        else:
            c, w = _polyline_cells(path, x0, y0, h, shape)
        uc, inv = np.unique(c, return_inverse=True)
        rows.append(np.full(len(uc), i))
        cols.append(uc)
        vals.append(np.bincount(inv, weights=w))
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(family), grid * grid)
    )
    probe = GridDensity(x0, y0, h, np.zeros(shape))
    if weight is None:
        omega = np.ones(grid * grid)
    elif isinstance(weight, DistortionField):
        omega = weight.values(np.abs(probe.centers())).ravel()
    else:
        omega = np.asarray(weight, dtype=float).ravel()
        if omega.shape != (grid * grid,):
            raise ValidationError("weight array must match the grid")
    if np.any(omega <= 0) or not np.all(np.isfinite(omega)):
        raise ValidationError("weights must be positive and finite on the grid")
    W = omega * h * h
    G = (A @ sp.diags(1 / W) @ A.T).toarray() / 2
    diag = np.diag(G).copy()
    if np.any(diag <= 0):
        raise ValidationError("some path misses the grid entirely")
    lam = np.zeros(len(family))
    primal = dual = math.inf
    for sweep in range(1, max_sweeps + 1):
        for i in range(len(lam)):
            lam[i] = max(0.0, lam[i] + (1 - G[i] @ lam) / diag[i])
        dual = lam.sum() - 0.5 * lam @ G @ lam
        rho = (A.T @ lam) / (2 * W)
        reach = (A @ rho).min()
        if reach > 0:
            primal = float((rho**2 * W).sum() / reach**2)
            if primal - dual <= tol * primal:
                break
    else:
        raise ConvergenceError(f"duality gap above {tol} after {max_sweeps} sweeps")
    rho = rho / reach
    violation = float(max(0.0, 1 - (A @ rho).min()))
    weight_grid = None if weight is None else omega.reshape(shape)
    density = GridDensity(x0, y0, h, rho.reshape(shape), weight_grid)
    return ModulusReport(
        primal, "discrete_estimate", inputs, iterations=sweep, max_violation=violation,
        dual_value=float(dual), density=density,
    )
