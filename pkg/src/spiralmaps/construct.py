"""Iterated constructions of extremal spiral maps.

A construction picks disjoint annuli ``A_n = {r_n <= |z| <= R_n}``, ``R_n = e r_n``,
assigns each a stretch-rotation block ``(alpha_n, q_n)`` and composes them
outside-in. Because every block preserves circles centred at the origin the
composition is radial, and it is stored exactly as a modulus profile ``m(t)``
and a lifted rotation profile ``tau(t)`` (see :class:`RadialMap`).
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import mpmath

from . import _numbers
from ._numbers import highprec, mpf, to_mpf
from .blocks import Annulus, BlockParams
from .exceptions import ConstraintViolation, ValidationError

E = mpmath.e

THEOREMS = ("submain_p", "submain_1", "custom")


# --------------------------------------------------------------------------
# source sequences and radius schedules


class LambdaSequence:
    """A strictly decreasing positive sequence ``lambda_k -> 0``.

    Radii are always picked from such a sequence, so the resulting ``r_n``
    form a subsequence of it. Either an explicit finite list, or the
    geometric family ``lambda_k = exp(-(k+1) * log_step)`` which is indexed
    in closed form (deep stages need indices around 10^12).
    """

    def __init__(self, values: Sequence | None = None, *, log_step=None):
        if (values is None) == (log_step is None):
            raise ValidationError("give either explicit values or a log_step")
        if values is not None:
            vals = [to_mpf(v) for v in values]
            if not vals:
                raise ValidationError("lambda sequence is empty")
            if vals[-1] <= 0 or any(b >= a for a, b in zip(vals, vals[1:])):
                raise ValidationError("lambda sequence must be strictly decreasing and positive")
            self._values = vals
            self._neg = [-v for v in vals]
            self.log_step = None
        else:
            step = to_mpf(log_step)
            if step <= 0:
                raise ValidationError("log_step must be positive")
            self._values = None
            self.log_step = step

    @classmethod
    def geometric(cls, log_step=1) -> "LambdaSequence":
        return cls(log_step=log_step)

    @property
    def finite(self) -> bool:
        return self._values is not None

    def __len__(self):
        if self._values is None:
            raise TypeError("geometric lambda sequence is infinite")
        return len(self._values)

    @highprec
    def __getitem__(self, k: int):
        if k < 0:
            raise IndexError(k)
        if self._values is not None:
            return self._values[k]
        return mpmath.exp(-(k + 1) * self.log_step)

    @highprec
    def first_below(self, bound, start: int = 0) -> int:
        """Smallest index ``k >= start`` with ``lambda_k < bound``."""
        bound = to_mpf(bound)
        if self._values is not None:
            k = max(start, bisect.bisect_right(self._neg, -bound))
            if k >= len(self._values):
                raise ConstraintViolation(
                    f"lambda sequence exhausted: no member below {_numbers.format_number(bound)}"
                )
            return k
        if bound <= 0:
            raise ValidationError("bound must be positive")
        k = max(start, int(mpmath.floor(-mpmath.log(bound) / self.log_step)), 0)
        while self[k] >= bound:
            k += 1
        return k

    def describe(self) -> str:
        if self._values is None:
            return f"geometric:{_numbers.format_number(self.log_step)}"
        return f"explicit:{len(self._values)}"


@dataclass(frozen=True)
class RadiusSchedule:
    """Inner radii ``r_1 > r_2 > ... > r_N`` of the stage annuli; ``R_n = e r_n``."""

    radii: tuple
    source_indices: tuple | None = None

    def __post_init__(self):
        radii = tuple(to_mpf(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        _check_schedule(radii)
        if self.source_indices is not None:
            idx = tuple(self.source_indices)
            if len(idx) != len(radii) or any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValidationError("source indices must be strictly increasing, one per radius")
            object.__setattr__(self, "source_indices", idx)

    @property
    def outer_radii(self) -> tuple:
        with mpmath.workdps(_numbers.DPS):
            return tuple(E * r for r in self.radii)

    def __len__(self):
        return len(self.radii)

    @classmethod
    def from_logs(cls, log_inverse_radii: Sequence) -> "RadiusSchedule":
        """Schedule with ``r_n = exp(-L_n)``, computed at working precision."""
        with mpmath.workdps(_numbers.DPS):
            return cls(tuple(mpmath.exp(-to_mpf(L)) for L in log_inverse_radii))


@highprec
def _check_schedule(radii):
    if not radii:
        return
    if radii[-1] <= 0:
        raise ValidationError("radii must be positive")
    if not radii[0] < 1 / E:
        raise ConstraintViolation("the first radius must satisfy r_1 < 1/e")
    for n, (a, b) in enumerate(zip(radii, radii[1:]), start=1):
        if not b < a / (2 * E):
            raise ConstraintViolation(f"r_{n + 1} < r_{n}/(2e) fails")


@highprec
def _upper_bound(n: int, prev_radius, log_scale, safety):
    """Strict upper bound on r_n (1-based) including the safety factor.

    ``log_scale`` is ``-(q_1 + ... + q_{n-1} - (n-1))`` or None when the
    q-history is not known yet.
    """
    bound = 1 / E if n == 1 else prev_radius / (2 * E)
    if log_scale is not None and n > 1:
        bound = min(bound, mpmath.exp(log_scale))
    return safety * bound


def build_schedule(
    lambda_seq: LambdaSequence | Sequence,
    q_history: Sequence = (),
    depth: int = 1,
    safety: float = 0.5,
) -> RadiusSchedule:
    """Pick ``depth`` radii from ``lambda_seq`` honouring the stage constraints.

    Every radius is the first remaining member of the sequence below
    ``safety * min(1/e, r_{n-1}/(2e), exp(-(q_1 + ... + q_{n-1} - (n-1))))``;
    the last term only applies to stages whose preceding q's are in
    ``q_history``.
    """
    if not isinstance(lambda_seq, LambdaSequence):
        lambda_seq = LambdaSequence(lambda_seq)
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    if not 0 < safety < 1:
        raise ValidationError("safety must lie in (0, 1)")
    qs = [to_mpf(q) for q in q_history]
    radii, indices = [], []
    k, prev = 0, None
    with mpmath.workdps(_numbers.DPS):
        log_scale = mpf(0)
        for n in range(1, depth + 1):
            known = n - 1 <= len(qs)
            bound = _upper_bound(n, prev, log_scale if known else None, safety)
            k = lambda_seq.first_below(bound, start=k)
            prev = lambda_seq[k]
            radii.append(prev)
            indices.append(k)
            k += 1
            if n <= len(qs):
                log_scale -= qs[n - 1] - 1
    return RadiusSchedule(tuple(radii), tuple(indices))


# --------------------------------------------------------------------------
# gauges and target moduli


_PROBE_LOGS = (10, 10**3, 10**6, 10**12)


@dataclass(frozen=True)
class GaugeFunction:
    """A monotone gauge ``h(r)`` with ``h(r) -> 0`` as ``r -> 0``.

    The callable receives ``r`` as an mpf. Monotonicity and decay are probed
    at ``r = e^-10, e^-1e3, e^-1e6, e^-1e12`` on construction.
    """

    func: Callable
    name: str = "custom"

    def __post_init__(self):
        with mpmath.workdps(_numbers.DPS):
            vals = [to_mpf(self.func(mpmath.exp(-mpf(L)))) for L in _PROBE_LOGS]
        if any(v <= 0 for v in vals):
            raise ValidationError(f"gauge {self.name!r} must be positive")
        if any(b > a for a, b in zip(vals, vals[1:])) or not vals[-1] < vals[0] / 2:
            raise ValidationError(f"gauge {self.name!r} must decrease to 0 as r -> 0")

    @highprec
    def __call__(self, r):
        return to_mpf(self.func(to_mpf(r)))

    @classmethod
    def log_power(cls, a) -> "GaugeFunction":
        """``h(r) = log(1/r)^(-a)``."""
        a = to_mpf(a)
        if a <= 0:
            raise ValidationError("log-power exponent must be positive")
        return cls(lambda r: (-mpmath.log(r)) ** (-a), f"logpow:{_numbers.format_number(float(a))}")

    @classmethod
    def default_for(cls, target: "TargetModulus") -> "GaugeFunction":
        """``h = max(sqrt(g), log(1/r)^(-1/4))`` for the compression gauge ``g`` of ``target``."""
        g = target.compression_gauge

        def h(r):
            return max(mpmath.sqrt(max(g(r), 0)), (-mpmath.log(r)) ** mpf(-0.25))

        return cls(h, "default")


@dataclass(frozen=True)
class TargetModulus:
    """Prescribed modulus profile ``phi_mod`` with integrability exponent ``p``.

    ``log_inv(r)`` returns ``log(1/phi_mod(r))`` so that profiles far below
    the double range stay exact; ``compression_gauge`` is the increasing
    ``g`` of the compression corridor
    ``exp(-g(r) r^(-2/p)) <= phi_mod(r) < r^4``.
    """

    log_inv: Callable
    compression_gauge: Callable
    p: float
    name: str = "custom"
    validated_range: tuple | None = None
    exponent: float | None = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ValidationError(f"integrability exponent p must be >= 1, got {self.p!r}")

    @classmethod
    def power(cls, k, p) -> "TargetModulus":
        """``phi_mod(r) = r^k`` with the tightest compression gauge ``g(r) = k log(1/r) r^(2/p)``."""
        k, pp = to_mpf(k), to_mpf(p)
        if k <= 0:
            raise ValidationError("power must be positive")
        return cls(
            lambda r: -k * mpmath.log(r),
            lambda r: -k * mpmath.log(r) * r ** (2 / pp),
            float(p),
            f"r^{_numbers.format_number(float(k))}",
            exponent=float(k),
        )

    @classmethod
    def table(cls, radii: Sequence, values: Sequence, p, name: str = "table") -> "TargetModulus":
        """Piecewise log-log linear profile through ``(radii[i], values[i])``.

        Outside the tabulated range the profile is undefined and evaluation
        raises. The compression gauge is the running maximum of
        ``log(1/phi) r^(2/p)`` over the nodes below ``r``, hence increasing.
        """
        with mpmath.workdps(_numbers.DPS):
            pts = sorted((to_mpf(r), to_mpf(v)) for r, v in zip(radii, values, strict=True))
            if len(pts) < 2:
                raise ValidationError("table needs at least two nodes")
            xs = [mpmath.log(r) for r, _ in pts]
            ys = [mpmath.log(v) for _, v in pts]
            if any(b <= a for a, b in zip(xs, xs[1:])) or any(b <= a for a, b in zip(ys, ys[1:])):
                raise ValidationError("table radii and values must be strictly increasing")
            pp = to_mpf(p)
            env, best = [], mpf(0)
            for (r, _), y in zip(pts, ys):
                best = max(best, -y * r ** (2 / pp))
                env.append(best)

        def log_inv(r):
            x = mpmath.log(r)
            if not xs[0] <= x <= xs[-1]:
                raise ConstraintViolation(f"radius {_numbers.format_number(r)} outside the tabulated range")
            i = min(max(bisect.bisect_right(xs, x) - 1, 0), len(xs) - 2)
            w = (x - xs[i]) / (xs[i + 1] - xs[i])
            return -(ys[i] + w * (ys[i + 1] - ys[i]))

        def g(r):
            i = bisect.bisect_right(xs, mpmath.log(r)) - 1
            here = log_inv(r) * r ** (2 / pp)
            return max(here, env[i]) if i >= 0 else here

        return cls(log_inv, g, float(p), name, (pts[0][0], pts[-1][0]))

    @highprec
    def phi(self, r):
        return mpmath.exp(-self.log_inv(to_mpf(r)))

    @highprec
    def corridor_violation(self, r) -> str | None:
        """Describe how ``r`` breaks the compression corridor, or None."""
        r = to_mpf(r)
        lam = self.log_inv(r)
        if not lam > -4 * mpmath.log(r):
            return f"phi_mod(r) < r^4 fails at r = {_numbers.format_number(r)}"
        upper = self.compression_gauge(r) * r ** (-2 / to_mpf(self.p))
        if lam > upper * (1 + mpf(10) ** (-30)):
            return f"exp(-g(r) r^(-2/p)) <= phi_mod(r) fails at r = {_numbers.format_number(r)}"
        return None


# --------------------------------------------------------------------------
# parameter rules


def _blocks(radii, alphas, qs) -> list[BlockParams]:
    with mpmath.workdps(_numbers.DPS):
        return [BlockParams(Annulus(r, E * r), a, q) for r, a, q in zip(radii, alphas, qs)]


@highprec
def params_pure_rotation(schedule: RadiusSchedule, rule="submain1_stage1", gauge: GaugeFunction | None = None):
    """Rotation-only blocks (``q_n = 1``).

    ``rule`` is ``"submain1_stage1"`` (``alpha_n = h(r_n)/r_n``, needs ``gauge``)
    or an explicit sequence of ``alpha_n``. Every ``alpha_n`` must be >= 1.
    """
    if isinstance(rule, str):
        if rule != "submain1_stage1":
            raise ValidationError(f"unknown rotation rule {rule!r}")
        if gauge is None:
            raise ValidationError("rule submain1_stage1 needs a gauge")
        alphas = [gauge(r) / r for r in schedule.radii]
    else:
        alphas = [to_mpf(a) for a in rule]
        if len(alphas) != len(schedule):
            raise ValidationError("need one alpha per radius")
    for n, a in enumerate(alphas, start=1):
        if a < 1:
            raise ConstraintViolation(f"alpha_{n} = {_numbers.format_number(a)} < 1")
    return _blocks(schedule.radii, alphas, [mpf(1)] * len(alphas))


@highprec
def _stage_p(r, log_scale, target: TargetModulus, gauge: GaugeFunction):
    """q_n and alpha_n for one stage of the p-integrable construction."""
    lam = target.log_inv(r)
    q = 1 + mpmath.log(r) + log_scale + lam
    alpha = gauge(r) * mpmath.sqrt(lam) * r ** (-1 / to_mpf(target.p))
    return q, alpha


@highprec
def _stage_p_problem(n, r, log_scale, q, alpha, target, gauge) -> str | None:
    problem = target.corridor_violation(r)
    if problem:
        return problem
    if not r < mpmath.exp(log_scale) or n == 1 and not r < 1:
        return f"ansatz r_{n} < exp(-(q_1+...+q_{n - 1}-({n - 1}))) fails"
    if q < 1:
        return f"q_{n} = {_numbers.format_number(q)} < 1"
    if q > alpha:
        return f"q_{n} = {_numbers.format_number(q)} > alpha_{n} = {_numbers.format_number(alpha)}"
    if alpha < 1:
        return f"alpha_{n} = {_numbers.format_number(alpha)} < 1"
    h = gauge(r)
    if h * h < target.compression_gauge(r):
        return f"gauge condition h(r_{n}) >= sqrt(g(r_{n})) fails"
    return None


@highprec
def params_submain_p(schedule: RadiusSchedule, target: TargetModulus, gauge: GaugeFunction):
    """Blocks for the p-integrable extremal construction.

    ``q_n = log(e r_n s_{n-1} / phi_mod(r_n))`` with the accumulated
    contraction ``s_{n-1} = exp(-(q_1 + ... + q_{n-1} - (n-1)))`` and
    ``alpha_n = h(r_n) log(1/phi_mod(r_n))^(1/2) r_n^(-1/p)``. Raises
    :class:`ConstraintViolation` at the first stage breaking the corridor,
    the ansatz ``r_n < s_{n-1}``, ``1 <= q_n <= alpha_n`` or ``h >= sqrt(g)``.
    """
    qs, alphas = [], []
    log_scale = mpf(0)
    for n, r in enumerate(schedule.radii, start=1):
        q, alpha = _stage_p(r, log_scale, target, gauge)
        problem = _stage_p_problem(n, r, log_scale, q, alpha, target, gauge)
        if problem:
            raise ConstraintViolation(problem)
        qs.append(q)
        alphas.append(alpha)
        log_scale -= q - 1
    return _blocks(schedule.radii, alphas, qs)


@highprec
def _stage_1(r, beta, gauge):
    L = -mpmath.log(r)
    return beta * L, gauge(r) / r * mpmath.sqrt(beta * L)


@highprec
def _stage_1_problem(n, r, log_scale, q, alpha, beta, gauge, epsilon) -> str | None:
    if n > 1 and not r < mpmath.exp(log_scale):
        return f"ansatz r_{n} < exp(-(q_1+...+q_{n - 1}-({n - 1}))) fails"
    if q < 1:
        return f"q_{n} = {_numbers.format_number(q)} < 1"
    if not q < alpha:
        return f"q_{n} = {_numbers.format_number(q)} >= alpha_{n} = {_numbers.format_number(alpha)}"
    if epsilon is not None:
        cap = mpmath.sqrt(beta) * gauge(r) * r ** (-1 / (1 - to_mpf(epsilon)))
        if alpha > cap:
            return f"growth estimate alpha_{n} <= sqrt(beta) h(r_{n}) r_{n}^(-1/(1-eps)) fails"
    return None


@highprec
def params_submain_1(schedule: RadiusSchedule, beta, gauge: GaugeFunction, epsilon=None):
    """Blocks for the integrable-distortion construction with Hölder-from-below inverse.

    ``alpha_n = (h(r_n)/r_n) (beta log(1/r_n))^(1/2)`` and
    ``q_n = beta log(1/r_n)``; requires ``q_n < alpha_n`` and the ansatz at
    every stage, plus the growth estimate for ``epsilon`` when given.
    """
    beta = to_mpf(beta)
    if beta < 1:
        raise ValidationError("beta must be >= 1")
    if epsilon is not None and not 0 < epsilon < 1:
        raise ValidationError("epsilon must lie in (0, 1)")
    qs, alphas = [], []
    log_scale = mpf(0)
    for n, r in enumerate(schedule.radii, start=1):
        q, alpha = _stage_1(r, beta, gauge)
        problem = _stage_1_problem(n, r, log_scale, q, alpha, beta, gauge, epsilon)
        if problem:
            raise ConstraintViolation(problem)
        qs.append(q)
        alphas.append(alpha)
        log_scale -= q - 1
    return _blocks(schedule.radii, alphas, qs)


def alpha_growth_check(blocks: Sequence[BlockParams], beta, gauge: GaugeFunction, epsilon) -> list[bool]:
    """Per stage, whether ``alpha_n <= sqrt(beta) h(r_n) r_n^(-1/(1-epsilon))``."""
    with mpmath.workdps(_numbers.DPS):
        beta, eps = to_mpf(beta), to_mpf(epsilon)
        return [
            b.alpha <= mpmath.sqrt(beta) * gauge(b.r) * to_mpf(b.r) ** (-1 / (1 - eps)) for b in blocks
        ]


# --------------------------------------------------------------------------
# exact radial representation


@dataclass(frozen=True)
class RadialMap:
    """Exact piecewise-radial map ``f(t e^{i theta}) = m(t) e^{i(theta + tau(t))}``.

    Stages are ordered outside-in. With ``rho_n = r_n / R_n``, the inner
    scales are ``s_n = prod_{j<=n} rho_j^(q_j - 1)`` and inner twists
    ``theta_n = sum_{j<=n} alpha_j log rho_j`` (``rho = 1/e`` recovers
    ``s_n = exp(-(q_1+...+q_n-n))`` and ``theta_n = -(alpha_1+...+alpha_n)``).
    On ``A_n``: ``m = s_{n-1} t (t/R_n)^(q_n-1)``,
    ``tau = theta_{n-1} + alpha_n log(t/R_n)``; on the gap below ``A_n``:
    ``m = s_n t``, ``tau = theta_n``; ``m = t``, ``tau = 0`` for ``t >= R_1``.
    Below ``r_N`` the truncated map is the similarity ``s_N e^{i theta_N} z``.
    """

    blocks: tuple
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "meta", dict(self.meta))
        _check_disjoint(self.blocks)

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @cached_property
    def _tables(self):
        with mpmath.workdps(_numbers.DPS):
            r = [to_mpf(b.r) for b in self.blocks]
            R = [to_mpf(b.R) for b in self.blocks]
            a = [to_mpf(b.alpha) for b in self.blocks]
            q = [to_mpf(b.q) for b in self.blocks]
            logR = [mpmath.log(x) for x in R]
            log_rho = [mpmath.log(x) - y for x, y in zip(r, logR)]
            log_scale, twist = [mpf(0)], [mpf(0)]
            for lr, aa, qq in zip(log_rho, a, q):
                log_scale.append(log_scale[-1] + (qq - 1) * lr)
                twist.append(twist[-1] + aa * lr)
        return {
            "r": r, "R": R, "alpha": a, "q": q, "logR": logR,
            "log_scale": log_scale, "twist": twist, "negR": [-x for x in R],
        }

    @property
    def inner_scales(self) -> list:
        """``s_0 = 1, s_1, ..., s_N``."""
        with mpmath.workdps(_numbers.DPS):
            return [mpmath.exp(x) for x in self._tables["log_scale"]]

    @property
    def inner_twists(self) -> list:
        """``theta_0 = 0, theta_1, ..., theta_N``."""
        return list(self._tables["twist"])

    def locate(self, t) -> tuple[str, int]:
        """``("outer", -1)``, ``("annulus", i)`` or ``("gap", i)`` (gap just inside block ``i``)."""
        tab = self._tables
        t = to_mpf(t)
        i = bisect.bisect_right(tab["negR"], -t)
        if i == 0:
            return "outer", -1
        j = i - 1
        if t >= tab["r"][j]:
            return "annulus", j
        return "gap", j

    @highprec
    def log_modulus(self, t):
        """``log m(t)`` for ``t > 0``."""
        t = to_mpf(t)
        if t <= 0:
            raise ValidationError("log_modulus needs t > 0")
        kind, j = self.locate(t)
        lt = mpmath.log(t)
        tab = self._tables
        if kind == "outer":
            return lt
        if kind == "annulus":
            return tab["log_scale"][j] + lt + (tab["q"][j] - 1) * (lt - tab["logR"][j])
        return tab["log_scale"][j + 1] + lt

    @highprec
    def modulus(self, t):
        t = to_mpf(t)
        if t == 0:
            return mpf(0)
        return mpmath.exp(self.log_modulus(t))

    @highprec
    def rotation(self, t):
        """Lifted rotation ``tau(t)``, continuous in ``t`` and 0 for ``t >= R_1``."""
        t = to_mpf(t)
        tab = self._tables
        if t <= 0:
            return tab["twist"][-1]
        kind, j = self.locate(t)
        if kind == "outer":
            return mpf(0)
        if kind == "annulus":
            return tab["twist"][j] + tab["alpha"][j] * (mpmath.log(t) - tab["logR"][j])
        return tab["twist"][j + 1]

    @highprec
    def distortion(self, t):
        """Distortion ``K`` at radius ``t``: the stage value on ``A_n``, 1 elsewhere."""
        kind, j = self.locate(t)
        if kind != "annulus":
            return mpf(1)
        tab = self._tables
        return stage_distortion(tab["alpha"][j], tab["q"][j])

    @highprec
    def __call__(self, z):
        z = mpmath.mpc(z)
        t = abs(z)
        if t == 0:
            return mpmath.mpc(0)
        return self.modulus(t) * mpmath.expj(mpmath.arg(z) + self.rotation(t))

    def with_blocks(self, blocks, **meta) -> "RadialMap":
        return RadialMap(tuple(blocks), {**self.meta, **meta})

    def stretch_component(self) -> "RadialMap":
        """The same stages with ``alpha = 0``: the radial stretch ``g``."""
        return self.with_blocks([BlockParams(b.annulus, 0, b.q) for b in self.blocks], component="stretch")

    def rotation_component(self) -> "RadialMap":
        """The same stages with ``q = 1``: the pure rotation part."""
        return self.with_blocks([BlockParams(b.annulus, b.alpha, 1) for b in self.blocks], component="rotation")

    # -- serialization

    def to_json(self) -> str:
        """Deterministic JSON with shortest round-trip number literals."""
        f = _numbers.format_number
        items = ",".join(
            '{"r":%s,"R":%s,"alpha":%s,"q":%s}' % (f(b.r), f(b.R), f(b.alpha), f(b.q)) for b in self.blocks
        )
        return '{"blocks":[%s],"meta":%s}' % (items, json.dumps(self.meta, sort_keys=True))

    @classmethod
    def from_json(cls, text: str) -> "RadialMap":
        try:
            data = json.loads(text, parse_float=_numbers.parse_number, parse_int=_numbers.parse_number)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid map JSON: {exc}") from None
        if not isinstance(data, dict) or not isinstance(data.get("blocks"), list):
            raise ValidationError("map JSON needs a 'blocks' list")
        try:
            blocks = [BlockParams(Annulus(b["r"], b["R"]), b["alpha"], b["q"]) for b in data["blocks"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed block entry: {exc}") from None
        meta = json.loads(text).get("meta", {})
        if not isinstance(meta, dict):
            raise ValidationError("map JSON 'meta' must be an object")
        return cls(tuple(blocks), meta)


def _check_disjoint(blocks):
    for n, b in enumerate(blocks):
        if not isinstance(b, BlockParams):
            raise ValidationError("blocks must be BlockParams")
        if n and not b.R < blocks[n - 1].r:
            raise ValidationError(f"annuli {n} and {n + 1} overlap or are not decreasing")


def compose_radial(blocks: Iterable[BlockParams], meta: Mapping | None = None) -> RadialMap:
    """Compose stages (outside-in) into an exact :class:`RadialMap`."""
    return RadialMap(tuple(blocks), dict(meta or {}))


@highprec
def stage_distortion(alpha, q):
    """``(|q+1+i alpha| + |q-1+i alpha|)^2 / (4q)`` at working precision."""
    alpha, q = to_mpf(alpha), to_mpf(q)
    return (mpmath.hypot(q + 1, alpha) + mpmath.hypot(q - 1, alpha)) ** 2 / (4 * q)


# --------------------------------------------------------------------------
# co-construction drivers


def _default_lambda(lambda_seq):
    if lambda_seq is None:
        return LambdaSequence.geometric(1)
    if isinstance(lambda_seq, LambdaSequence):
        return lambda_seq
    return LambdaSequence(lambda_seq)


@highprec
def _co_construct(depth, lambda_seq, safety, max_skips, stage, problem_of):
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    if not 0 < safety < 1:
        raise ValidationError("safety must lie in (0, 1)")
    radii, indices = [], []
    log_scale, k, prev = mpf(0), 0, None
    for n in range(1, depth + 1):
        k = lambda_seq.first_below(_upper_bound(n, prev, log_scale, safety), start=k)
        for _ in range(max_skips):
            r = lambda_seq[k]
            q, alpha = stage(r, log_scale)
            problem = problem_of(n, r, log_scale, q, alpha)
            if problem is None:
                break
            # thinning: move further along the source sequence
            k += 1
            if lambda_seq.finite and k >= len(lambda_seq):
                raise ConstraintViolation(f"lambda sequence exhausted at stage {n}: {problem}")
        else:
            raise ConstraintViolation(f"stage {n}: no admissible radius within {max_skips} candidates ({problem})")
        radii.append(r)
        indices.append(k)
        prev = r
        log_scale -= q - 1
        k += 1
    return RadiusSchedule(tuple(radii), tuple(indices))


def build_submain_p(
    target: TargetModulus,
    depth: int,
    gauge: GaugeFunction | None = None,
    lambda_seq=None,
    safety: float = 0.5,
    max_skips: int = 10_000,
) -> RadialMap:
    """Co-construct radii and parameters for the p-integrable extremal map.

    Stage by stage, the first admissible ``lambda_k`` below the safety-scaled
    bounds is accepted; candidates breaking any constraint, or the summability
    thinning ``h(r_n)^(2p) <= n^-2``, are skipped.
    """
    gauge = gauge or GaugeFunction.default_for(target)
    lam = _default_lambda(lambda_seq)
    two_p = 2 * target.p
    if target.exponent is not None and target.exponent <= 4:
        # scale-free: r^k < r^4 fails at every radius, so thinning cannot help
        raise ConstraintViolation(f"phi_mod(r) < r^4 fails for every r < 1 when phi_mod = {target.name}")

    def problem_of(n, r, log_scale, q, alpha):
        problem = _stage_p_problem(n, r, log_scale, q, alpha, target, gauge)
        if problem is None and gauge(r) ** two_p > mpf(n) ** -2:
            problem = f"summability thinning h(r_{n})^(2p) <= n^-2 fails"
        return problem

    schedule = _co_construct(
        depth, lam, safety, max_skips, lambda r, s: _stage_p(r, s, target, gauge), problem_of
    )
    blocks = params_submain_p(schedule, target, gauge)
    meta = {
        "theorem": "submain_p", "p": target.p, "depth": depth, "phi": target.name,
        "gauge": gauge.name, "safety": safety, "lambda": lam.describe(),
    }
    return compose_radial(blocks, meta)


def build_submain_1(
    depth: int,
    beta=1,
    gauge: GaugeFunction | None = None,
    epsilon: float | None = 0.1,
    lambda_seq=None,
    safety: float = 0.5,
    max_skips: int = 10_000,
) -> RadialMap:
    """Co-construct the integrable-distortion map with Hölder-from-below inverse."""
    gauge = gauge or GaugeFunction.log_power(0.25)
    lam = _default_lambda(lambda_seq)
    b = to_mpf(beta)
    if b < 1:
        raise ValidationError("beta must be >= 1")

    def problem_of(n, r, log_scale, q, alpha):
        problem = _stage_1_problem(n, r, log_scale, q, alpha, b, gauge, None)
        if problem is None and gauge(r) ** 2 > mpf(n) ** -2:
            problem = f"summability thinning h(r_{n})^2 <= n^-2 fails"
        return problem

    schedule = _co_construct(depth, lam, safety, max_skips, lambda r, s: _stage_1(r, b, gauge), problem_of)
    blocks = params_submain_1(schedule, b, gauge)
    meta = {
        "theorem": "submain_1", "p": 1, "beta": float(beta), "depth": depth, "gauge": gauge.name,
        "safety": safety, "lambda": lam.describe(),
    }
    if epsilon is not None:
        meta["epsilon"] = epsilon
    return compose_radial(blocks, meta)


def build_rotation(
    depth: int,
    gauge: GaugeFunction | None = None,
    alphas: Sequence | None = None,
    lambda_seq=None,
    safety: float = 0.5,
) -> RadialMap:
    """Pure rotation map on a base schedule (``alpha_n = h(r_n)/r_n`` unless given)."""
    gauge = gauge or GaugeFunction.log_power(0.25)
    schedule = build_schedule(_default_lambda(lambda_seq), (), depth, safety)
    rule = "submain1_stage1" if alphas is None else alphas
    blocks = params_pure_rotation(schedule, rule, gauge)
    meta = {"theorem": "custom", "rule": "rotation", "p": 1, "depth": depth, "gauge": gauge.name}
    return compose_radial(blocks, meta)


# --------------------------------------------------------------------------
# distortion field and series certificates


@dataclass(frozen=True)
class DistortionField:
    """Radial, piecewise-constant distortion: ``K_n`` on ``[r_n, R_n]``, 1 elsewhere."""

    annuli: tuple  # (r, R, K) triples, outside-in

    @highprec
    def value(self, t):
        t = to_mpf(t)
        for r, R, K in self.annuli:
            if r <= t <= R:
                return K
        return mpf(1)

    def values(self, t):
        """Vectorized double-precision lookup (``inf`` where ``K`` exceeds the double range)."""
        import numpy as np

        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for r, R, K in self.annuli:
            rf, Rf = _numbers.to_float(r), _numbers.to_float(R)
            if Rf == 0:
                break
            out = np.where((t >= rf) & (t <= Rf), _numbers.to_float(K), out)
        return out

    def scaled(self, factor) -> "DistortionField":
        return DistortionField(tuple((r, R, K * factor) for r, R, K in self.annuli))


def distortion_field(radial_map: RadialMap) -> DistortionField:
    with mpmath.workdps(_numbers.DPS):
        return DistortionField(
            tuple((to_mpf(b.r), to_mpf(b.R), stage_distortion(b.alpha, b.q)) for b in radial_map.blocks)
        )


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-stage series terms with verdicts for ``K in L^p`` and ``Df in L^1``.

    ``lp_terms`` are the exact ``|A_n| K_n^p``; ``proxy_terms`` the
    ``|A_n| alpha_n^(2p) / q_n^p`` form that dominates them up to ``4^p``.
    A verdict of ``converges`` always carries a witness (ratio bound or a
    p-series domination verified stage by stage); bounded partial sums alone
    give ``inconclusive``.
    """

    p: float
    depth: int
    lp_terms: list
    proxy_terms: list
    w11_terms: list
    partial_sums: list
    w11_partial_sums: list
    verdict: str
    witness: dict
    w11_verdict: str
    w11_witness: dict
    reduction_ratios: list | None = None

    @property
    def total(self):
        return self.partial_sums[-1] if self.partial_sums else mpf(0)


def _partial(terms):
    out, acc = [], mpf(0)
    for x in terms:
        acc += x
        out.append(acc)
    return out


def _ratio_verdict(terms) -> tuple[str, dict]:
    n = len(terms)
    if n == 0:
        return "converges", {"type": "empty"}
    if n == 1:
        return "inconclusive", {"type": "none", "reason": "single term"}
    start = (n - 1) // 2
    ratios = [terms[k + 1] / terms[k] for k in range(start, n - 1) if terms[k] > 0]
    if len(ratios) != n - 1 - start:
        return "inconclusive", {"type": "none", "reason": "zero terms"}
    if all(x >= 1 for x in ratios):
        return "diverges", {"type": "term_test", "lower_bound": min(terms[start:]), "from_stage": start + 1}
    if max(ratios) < 1:
        return "converges", {"type": "ratio", "sup_ratio": max(ratios), "from_stage": start + 1}
    return "inconclusive", {"type": "none", "reason": "tail neither contracting nor non-decreasing"}


@highprec
def series_certificate(blocks: Sequence[BlockParams], p: float, gauge: GaugeFunction | None = None) -> ConvergenceReport:
    """Integrability certificate for a block list.

    With ``gauge`` the p-series domination is checked stage by stage:
    ``h(r_n)^(2p) <= n^-2``, ``K_n <= 4 alpha_n^2 / q_n`` and the reduction
    ratio ``alpha_n^(2p) r_n^2 / (q_n^p h(r_n)^(2p))`` in ``[1, 2^p]`` give
    ``|A_n| K_n^p <= 8^p (|A_n|/r_n^2) n^-2``.
    """
    if not p >= 1:
        raise ValidationError("p must be >= 1")
    pp = to_mpf(p)
    areas, lp, proxy, w11, reductions = [], [], [], [], []
    for b in blocks:
        r, R, a, q = (to_mpf(x) for x in (b.r, b.R, b.alpha, b.q))
        area = mpmath.pi * (R * R - r * r)
        K = stage_distortion(a, q)
        areas.append(area)
        lp.append(area * K**pp)
        proxy.append(area * abs(a) ** (2 * pp) / q**pp)
        w11.append(area * abs(a))
    verdict, witness = _ratio_verdict(lp)
    if gauge is not None and blocks:
        ok = True
        C = 8**pp * max(area / to_mpf(b.r) ** 2 for area, b in zip(areas, blocks))
        tol = 1 + mpf(10) ** -30
        for n, (b, term) in enumerate(zip(blocks, lp), start=1):
            r, a, q = to_mpf(b.r), to_mpf(b.alpha), to_mpf(b.q)
            h2p = gauge(r) ** (2 * pp)
            red = abs(a) ** (2 * pp) * r * r / (q**pp * h2p)
            reductions.append(red)
            ok &= h2p <= mpf(n) ** -2 * tol
            ok &= stage_distortion(a, q) <= 4 * a * a / q
            ok &= 1 / tol <= red <= 2**pp * tol
            ok &= term <= C / mpf(n) ** 2
        if ok:
            verdict = "converges"
            witness = {
                "type": "p_series", "C": C, "exponent": 2,
                "conditions": "h(r_n)^(2p) <= n^-2, K_n <= 4 alpha_n^2/q_n, reduction ratio in [1, 2^p]",
            }
    w11_verdict, w11_witness = _ratio_verdict(w11)
    if verdict == "converges" and blocks:
        exponent = pp / (2 * pp - 1)
        if all(to_mpf(b.q) ** exponent <= abs(to_mpf(b.alpha)) for b in blocks):
            w11_verdict = "converges"
            w11_witness = {"type": "implied_by_lp", "condition": "q_n^(p/(2p-1)) <= alpha_n"}
    return ConvergenceReport(
        p=float(p), depth=len(blocks), lp_terms=lp, proxy_terms=proxy, w11_terms=w11,
        partial_sums=_partial(lp), w11_partial_sums=_partial(w11), verdict=verdict, witness=witness,
        w11_verdict=w11_verdict, w11_witness=w11_witness, reduction_ratios=reductions or None,
    )
