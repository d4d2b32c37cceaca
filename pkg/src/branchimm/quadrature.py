"""Improper integrals on [lo, 1) with a possible singularity at 1.

The integral is approached through a geometric ladder of cutoffs
``1 - eps_k`` with ``eps_k = 2**-k * (1 - lo)``.  The increments between
rungs decide the outcome: geometrically decaying increments converge (the
remaining tail is extrapolated from the decay ratio), increments that fail
to shrink certify divergence.  A run of large but constant ratios below one
is a geometric tail and is extrapolated rather than called divergent.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "IntegralVerdict",
    "gauss_kronrod",
    "adaptive_integrate",
    "integrate_to_one",
]

# 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_W_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
_W_G = np.zeros(15)
_W_G[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

CONV_TOL = 1e-9
CONV_RUNGS = 3
DIV_RATIO = 0.9
DIV_RUNGS = 6
GEOM_TOL = 1e-6


class QuadratureError(ArithmeticError):
    """Non-finite integrand value at an interior abscissa."""

    def __init__(self, abscissa: float, value: float):
        super().__init__(f"integrand is not finite at {abscissa!r} (value {value!r})")
        self.abscissa = abscissa
        self.value = value


@dataclass(frozen=True)
class IntegralVerdict:
    """Outcome of :func:`integrate_to_one`.

    ``status`` is ``"converged"``, ``"diverges"`` or ``"inconclusive"``.
    ``value`` is the integral, ``+inf``/``-inf`` when it diverges, and
    ``nan`` when inconclusive.  ``evidence`` holds ``(eps_k, partial_k)``
    pairs, the partial integral over ``[lo, 1 - eps_k]``.
    """

    status: str
    value: float
    abs_err: float
    evidence: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def diverges(self) -> bool:
        return self.status == "diverges"

    @property
    def inconclusive(self) -> bool:
        return self.status == "inconclusive"

    @property
    def sign(self) -> int:
        if not self.diverges:
            return 0
        return 1 if self.value > 0 else -1

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "value": _json_float(self.value),
            "abs_err": _json_float(self.abs_err),
            "cutoffs": [e for e, _ in self.evidence],
            "partials": [p for _, p in self.evidence],
        }


def _json_float(x):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _panel(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _NODES
    fx = np.asarray(f(x), dtype=np.float64)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        k = int(np.flatnonzero(~np.isfinite(fx))[0])
        raise QuadratureError(float(x[k]), float(fx[k]))
    k15 = half * float(np.dot(_W_K, fx))
    g7 = half * float(np.dot(_W_G, fx))
    resasc = half * float(np.dot(_W_K, np.abs(fx - k15 / (b - a) if b != a else fx)))
    err = abs(k15 - g7)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return k15, err


def gauss_kronrod(f: Callable, a: float, b: float) -> tuple[float, float]:
    """One G7/K15 panel on [a, b]; returns (integral, error estimate)."""
    return _panel(f, a, b)


def adaptive_integrate(f: Callable, a: float, b: float, *, rtol: float = 1e-12,
                       atol: float = 1e-15, max_panels: int = 4000) -> tuple[float, float]:
    """Globally adaptive G7/K15 quadrature of a vectorized ``f`` over [a, b].

    Panels are bisected largest-error first.  The result is summed in
    ascending panel order so it does not depend on the refinement history.
    """
    if a == b:
        return 0.0, 0.0
    if b < a:
        val, err = adaptive_integrate(f, b, a, rtol=rtol, atol=atol, max_panels=max_panels)
        return -val, err
    val, err = _panel(f, a, b)
    heap = [(-err, a, b, val)]
    total_err = err
    total_val = val
    n = 1
    while n < max_panels:
        if total_err <= max(atol, rtol * abs(total_val)):
            break
        neg_err, lo, hi, old = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            heapq.heappush(heap, (neg_err, lo, hi, old))
            break
        v1, e1 = _panel(f, lo, mid)
        v2, e2 = _panel(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total_err += e1 + e2 + neg_err
        total_val += v1 + v2 - old
        n += 1
    panels = sorted(heap, key=lambda p: p[1])
    return math.fsum(p[3] for p in panels), math.fsum(-p[0] for p in panels)


def _integrate_split(g, a: float, b: float, cuts: Sequence[float], **kw) -> tuple[float, float]:
    pts = [a] + sorted(c for c in cuts if a < c < b) + [b]
    vals, errs = [], []
    for lo, hi in zip(pts, pts[1:]):
        v, e = adaptive_integrate(g, lo, hi, **kw)
        vals.append(v)
        errs.append(e)
    return math.fsum(vals), math.fsum(errs)


def _steady_ratio(ratios: Sequence[float]) -> bool:
    """Last DIV_RUNGS ratios agree to GEOM_TOL and lie in (0, 1)."""
    if len(ratios) < DIV_RUNGS:
        return False
    tail = ratios[-DIV_RUNGS:]
    if any(not (0.0 < r < 1.0) for r in tail):
        return False
    return max(tail) - min(tail) <= GEOM_TOL * max(tail)


def integrate_to_one(f: Callable, lo: float = 0.0, *, splits: Sequence[float] = (),
                     gap_form: bool = False, k_start: int = 4, k_stop: int = 52,
                     rtol: float = 1e-12) -> IntegralVerdict:
    """Integrate ``f`` over [lo, 1), deciding convergence or divergence.

    Parameters
    ----------
    f : callable
        Vectorized integrand.  With ``gap_form=True`` it receives the
        distance ``t = 1 - y`` to the endpoint instead of ``y``, which keeps
        full relative precision next to the singular endpoint.
    lo : float
        Lower limit in [0, 1).
    splits : sequence of float
        Interior points (in ``y``) where panels must break, e.g. known
        zeros of a denominator.
    k_start, k_stop : int
        First and last rung of the cutoff ladder.

    Returns
    -------
    IntegralVerdict
    """
    if not (0.0 <= lo < 1.0):
        raise ValueError("lower limit must lie in [0, 1)")
    if k_start < 1 or k_stop <= k_start:
        raise ValueError("need 1 <= k_start < k_stop")
    width = 1.0 - lo
    g = f if gap_form else (lambda t: f(1.0 - t))
    cuts = [1.0 - s for s in splits]
    eps = [width * 2.0**-k for k in range(k_start, k_stop + 1)]

    base, base_err = _integrate_split(g, eps[0], width, cuts, rtol=rtol)
    partial = base
    quad_err = base_err
    evidence = [(eps[0], partial)]
    increments: list[float] = []
    ratios: list[float] = []
    extrapolated = [partial]
    small_steps = 0
    growth_run = 0

    for k in range(1, len(eps)):
        delta, err = _integrate_split(g, eps[k], eps[k - 1], cuts, rtol=rtol)
        quad_err += err
        partial += delta
        evidence.append((eps[k], partial))
        increments.append(delta)
        prev = increments[-2] if len(increments) >= 2 else 0.0
        ratio = delta / prev if prev != 0.0 else math.nan
        ratios.append(ratio)
        geometric = _steady_ratio(ratios)

        # tail extrapolation from the decay ratio of the last two increments
        est = partial
        if 0.0 <= ratio < DIV_RATIO or (geometric and ratio < 1.0):
            est = partial + delta * ratio / (1.0 - ratio)
        diff = abs(est - extrapolated[-1])
        extrapolated.append(est)
        if diff < max(CONV_TOL, CONV_TOL * abs(est)):
            small_steps += 1
        else:
            small_steps = 0
        if small_steps >= CONV_RUNGS:
            spread = max(abs(x - est) for x in extrapolated[-CONV_RUNGS - 1:])
            return IntegralVerdict("converged", est, spread + quad_err, tuple(evidence))

        same_sign = prev != 0.0 and delta != 0.0 and (prev > 0) == (delta > 0)
        if same_sign and abs(ratio) >= DIV_RATIO:
            growth_run += 1
        else:
            growth_run = 0
        # a steady ratio below one is a slowly converging geometric tail, not divergence
        if growth_run >= DIV_RUNGS and not geometric:
            return IntegralVerdict("diverges", math.copysign(math.inf, delta), math.nan, tuple(evidence))

    return IntegralVerdict("inconclusive", math.nan, math.nan, tuple(evidence))
