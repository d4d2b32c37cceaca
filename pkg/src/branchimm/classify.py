"""Analytic criteria for regularity, recurrence and (strong) ergodicity.

Every verdict is one of ``yes``, ``no``, ``criterion_not_applicable`` or
``inconclusive`` and names the clause that produced it.  Integral criteria
are evaluated with :func:`branchimm.quadrature.integrate_to_one` in
"gap form": integrands are written in terms of ``t = 1 - s`` so that the
cancellation in ``B(s) = G(s) - s`` near ``s = 1`` is avoided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import quadrature
from .model import CRITICAL_TOL, ModelSpec, smallest_fixed_point, upward_mean
from .quadrature import IntegralVerdict, integrate_to_one

__all__ = [
    "YES", "NO", "NOT_APPLICABLE", "INCONCLUSIVE",
    "Verdict",
    "SufficientCheck",
    "BdSeries",
    "SeriesSum",
    "ClassificationReport",
    "CriterionNotApplicable",
    "regularity",
    "recurrence",
    "ergodicity",
    "exponential_ergodicity",
    "strong_ergodicity",
    "extinction_time_bounds",
    "bd_series",
    "j_integral",
    "classify",
]

YES = "yes"
NO = "no"
NOT_APPLICABLE = "criterion_not_applicable"
INCONCLUSIVE = "inconclusive"

J_GRID = 4096
J_GRID_TOL = 1e-8


class CriterionNotApplicable(ValueError):
    """The hypotheses of a criterion do not hold for the given model."""


@dataclass(frozen=True)
class Verdict:
    value: str
    clause: str | None
    evidence: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.value == YES

    def to_dict(self) -> dict:
        return {"value": self.value, "clause": self.clause, "evidence": _jsonable(self.evidence)}


@dataclass(frozen=True)
class SufficientCheck:
    fired: bool
    clause: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"fired": self.fired, "clause": self.clause, "evidence": _jsonable(self.evidence)}


def _jsonable(x):
    if isinstance(x, IntegralVerdict):
        return x.to_dict()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return x


# -- gap-form building blocks -----------------------------------------------------


class _GapForms:
    """B, A and ln(1/s) written as functions of t = 1 - s."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        bt = spec.offspring.taylor_at_one()
        bpoly = np.zeros(max(len(bt), 2))
        bpoly[: len(bt)] = bt
        bpoly[0] = 0.0
        bpoly[1] = 0.0 if spec.critical else 1.0 - spec.M
        self.bpoly = bpoly
        ft = spec.immigration.taylor_at_one()
        apoly = np.zeros(max(len(ft), 2))
        apoly[: len(ft)] = -ft
        apoly[0] = 0.0
        apoly[1] = spec.m
        self.apoly = spec.gamma * apoly
        self.G = spec.offspring.pgf
        self.F = spec.immigration.pgf

    def B(self, t):
        t = np.asarray(t, dtype=np.float64)
        near = np.polynomial.polynomial.polyval(t, self.bpoly)
        s = 1.0 - t
        far = self.G(s) - s
        return np.where(t < 0.5, near, far)

    def A(self, t):
        t = np.asarray(t, dtype=np.float64)
        near = np.polynomial.polynomial.polyval(t, self.apoly)
        far = self.spec.gamma * (1.0 - self.F(1.0 - t))
        return np.where(t < 0.5, near, far)

    @staticmethod
    def log_inv(t):
        return -np.log1p(-np.asarray(t, dtype=np.float64))

    @staticmethod
    def one_minus_pow(t, i: int):
        return -np.expm1(i * np.log1p(-np.asarray(t, dtype=np.float64)))

    def log_weight(self, t, theta: float):
        if theta == 1.0:
            return np.ones_like(np.asarray(t, dtype=np.float64))
        return self.log_inv(t) ** (theta - 1.0)


@lru_cache(maxsize=256)
def _forms(spec: ModelSpec) -> _GapForms:
    return _GapForms(spec)


def _power_params(spec: ModelSpec) -> tuple[float, float]:
    return spec.rate.alpha, spec.rate.theta


@lru_cache(maxsize=512)
def _integral_ergodic(spec: ModelSpec, alpha: float, theta: float) -> IntegralVerdict:
    """int_0^1 A/(alpha B) (ln 1/s)^(theta-1) ds."""
    g = _forms(spec)
    return integrate_to_one(lambda t: g.A(t) / (alpha * g.B(t)) * g.log_weight(t, theta), gap_form=True)


@lru_cache(maxsize=512)
def _integral_strong(spec: ModelSpec, alpha: float, theta: float) -> IntegralVerdict:
    """int_0^1 1/(alpha B) (ln 1/s)^(theta-1) ds."""
    g = _forms(spec)
    return integrate_to_one(lambda t: g.log_weight(t, theta) / (alpha * g.B(t)), gap_form=True)


@lru_cache(maxsize=512)
def _integral_lower(spec: ModelSpec, alpha: float, theta: float, i: int) -> IntegralVerdict:
    """int_0^1 (1 - y^i)/(alpha B) (ln 1/y)^(theta-1) dy."""
    g = _forms(spec)
    return integrate_to_one(
        lambda t: g.one_minus_pow(t, i) / (alpha * g.B(t)) * g.log_weight(t, theta), gap_form=True
    )


@lru_cache(maxsize=256)
def _integral_regularity(spec: ModelSpec, theta: float, eps: float) -> IntegralVerdict:
    """int_eps^1 1/B (ln 1/s)^(theta-1) ds."""
    g = _forms(spec)
    return integrate_to_one(lambda t: g.log_weight(t, theta) / g.B(t), lo=eps, gap_form=True)


# -- the nested integral J -------------------------------------------------------------


def _inner_density(spec: ModelSpec, alpha: float):
    """Split A/(alpha B) into c0 / t plus a bounded remainder, both in t.

    Returns ``(c0, psi)`` with ``psi`` vectorized in t.
    """
    g = _forms(spec)
    a1 = g.apoly[1:]
    if not spec.critical:
        b1 = g.bpoly[1:]

        def psi(t):
            t = np.asarray(t, dtype=np.float64)
            near = np.polynomial.polynomial.polyval(t, a1) / (alpha * np.polynomial.polynomial.polyval(t, b1))
            with np.errstate(divide="ignore", invalid="ignore"):
                far = g.A(t) / (alpha * g.B(t))
            return np.where(t < 0.5, near, far)

        return 0.0, psi

    b2 = g.bpoly[2:]
    if b2[0] <= 0:
        raise ArithmeticError("critical offspring law with vanishing second factorial moment")
    c0 = a1[0] / (alpha * b2[0])
    n = max(len(a1), len(b2))
    num = np.zeros(n)
    num[: len(a1)] += a1 * b2[0]
    num[: len(b2)] -= a1[0] * b2
    num[0] = 0.0
    num1 = num[1:] if n > 1 else np.zeros(1)

    def psi(t):
        t = np.asarray(t, dtype=np.float64)
        near = np.polynomial.polynomial.polyval(t, num1) / (
            alpha * np.polynomial.polynomial.polyval(t, b2) * b2[0]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            far = g.A(t) / (alpha * g.B(t)) - c0 / t
        return np.where(t < 0.5, near, far)

    return c0, psi


def _tabulate(psi, n: int):
    """Cumulative integral of psi(1 - y) over Chebyshev-Lobatto nodes of [0, 1]."""
    j = np.arange(n + 1)
    y = 0.5 * (1.0 - np.cos(np.pi * j / n))
    lo, hi = y[:-1], y[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * quadrature._NODES[None, :]
    vals = psi(1.0 - nodes)
    panels = half * (vals @ quadrature._W_K)
    cum = np.concatenate([[0.0], np.cumsum(panels)])
    return y, cum


@lru_cache(maxsize=128)
def j_integral(spec: ModelSpec, alpha: float) -> tuple[IntegralVerdict, dict]:
    """J = int_0^1 exp(-int_0^y A/(alpha B)) / (alpha B(y)) dy, for M <= 1.

    The inner integral is split as ``c0 * ln(1/(1-y)) + Psi(y)`` with Psi
    bounded; Psi is tabulated on a Chebyshev grid and interpolated by a
    monotone cubic.  Returns the verdict and the tabulation evidence.
    """
    if spec.M > 1.0 + CRITICAL_TOL:
        raise CriterionNotApplicable("J is only defined when M <= 1")
    g = _forms(spec)
    c0, psi = _inner_density(spec, alpha)
    y1, cum1 = _tabulate(psi, J_GRID)
    y2, cum2 = _tabulate(psi, 2 * J_GRID)
    interp = PchipInterpolator(y1, cum1)
    grid_err = float(np.max(np.abs(interp(y2) - cum2)))
    evidence = {"alpha": alpha, "log_exponent": c0, "grid_points": J_GRID, "grid_error": grid_err}
    if not grid_err < J_GRID_TOL:
        return IntegralVerdict("inconclusive", math.nan, math.nan, ()), evidence
    fine = PchipInterpolator(y2, cum2)

    def integrand(t):
        t = np.asarray(t, dtype=np.float64)
        outer = np.exp(-fine(1.0 - t)) / (alpha * g.B(t))
        if c0:
            outer = outer * t**c0
        return outer

    return integrate_to_one(integrand, gap_form=True), evidence


# -- criteria -------------------------------------------------------------------------


def _base_evidence(spec: ModelSpec) -> dict:
    return {"M": spec.M, "m": spec.m, "gamma": spec.gamma}


def regularity(spec: ModelSpec) -> Verdict:
    """Is the minimal process non-explosive?

    The verdict is the same for the process with immigration and for pure
    branching, so it is reported once for both.
    """
    ev = _base_evidence(spec) | {"applies_to": ["Q", "R"]}
    M = spec.M
    if M <= 1.0 + CRITICAL_TOL:
        return Verdict(YES, "regularity.mean_at_most_one", ev)
    if spec.is_power:
        alpha, theta = _power_params(spec)
        q = smallest_fixed_point(spec)
        eps = 0.5 * (q + 1.0)
        res = _integral_regularity(spec, theta, eps)
        ev |= {"q": q, "lower_limit": eps, "theta": theta, "integral": res}
        if spec.rate.inverse_sum_finite:
            ev["summable_inverse_rates_says"] = NO
        if res.diverges and res.sign < 0:
            return Verdict(YES, "regularity.power_rate_integral", ev)
        if res.converged:
            return Verdict(NO, "regularity.power_rate_integral", ev)
        return Verdict(INCONCLUSIVE, "regularity.power_rate_integral", ev)
    if spec.rate.inverse_sum_finite:
        return Verdict(NO, "regularity.summable_inverse_rates", ev)
    return Verdict(NOT_APPLICABLE, None, ev | {"reason": "M > 1 with non-summable tabulated rates"})


def recurrence(spec: ModelSpec, *, n_tail: int = 10, alpha_low: float | None = None,
               alpha_high: float | None = None) -> Verdict:
    """Recurrence or transience of the irreducible process.

    ``alpha_low``/``alpha_high`` are linear comparison slopes with
    ``r_i/i >= alpha_low`` (resp. ``<=``) for ``i > n_tail``; by default they
    are the infimum and supremum of ``r_i/i`` over that range.
    """
    ev = _base_evidence(spec)
    if not spec.irreducible:
        return Verdict(NOT_APPLICABLE, None, ev | {"reason": "gamma * r_i * b_0 > 0 fails, chain not irreducible"})
    M = spec.M
    if M > 1.0 + CRITICAL_TOL:
        return Verdict(NO, "recurrence.supercritical", ev)
    rate = spec.rate
    if M < 1.0 - CRITICAL_TOL and rate.unbounded:
        return Verdict(YES, "recurrence.subcritical_unbounded_rates", ev)
    if not rate.nondecreasing:
        return Verdict(NOT_APPLICABLE, None, ev | {"reason": "rates are not nondecreasing"})
    inf_ratio, sup_ratio = rate.linear_bounds(n_tail)
    lo = inf_ratio if alpha_low is None else alpha_low
    hi = sup_ratio if alpha_high is None else alpha_high
    ev |= {"n_tail": n_tail, "alpha_low": lo, "alpha_high": hi}
    pending = False
    if 0 < lo < math.inf:
        res, tab = j_integral(spec, lo)
        ev |= {"J_low": res, "J_low_grid": tab}
        if res.diverges and res.sign > 0:
            return Verdict(YES, "recurrence.linear_lower_bound_integral", ev)
        pending |= res.inconclusive
    if 0 < hi < math.inf:
        res, tab = j_integral(spec, hi)
        ev |= {"J_high": res, "J_high_grid": tab}
        if res.converged:
            return Verdict(NO, "recurrence.linear_upper_bound_integral", ev)
        pending |= res.inconclusive
    if pending:
        return Verdict(INCONCLUSIVE, "recurrence.linear_bound_integral", ev)
    return Verdict(NOT_APPLICABLE, None, ev | {"reason": "no recurrence clause applies"})


def ergodicity(spec: ModelSpec, recurrent: Verdict | None = None, **kw) -> Verdict:
    """Positive recurrence."""
    if recurrent is None:
        recurrent = recurrence(spec, **kw)
    ev = _base_evidence(spec) | {"recurrence": recurrent.value}
    if recurrent.value == NO:
        return Verdict(NO, "ergodicity.implied_by_transience", ev)
    rate = spec.rate
    M = spec.M
    if spec.is_power and rate.theta >= 1 and recurrent.value == YES:
        alpha, theta = _power_params(spec)
        res = _integral_ergodic(spec, alpha, theta)
        ev["integral"] = res
        if res.converged:
            return Verdict(YES, "ergodicity.power_rate_integral", ev)
        if res.diverges:
            return Verdict(NO, "ergodicity.power_rate_integral", ev)
        return Verdict(INCONCLUSIVE, "ergodicity.power_rate_integral", ev)
    if M <= 1.0 + CRITICAL_TOL and rate.nondecreasing and rate.inverse_sum_finite:
        return Verdict(YES, "ergodicity.summable_inverse_rates", ev)
    if recurrent.value == INCONCLUSIVE:
        return Verdict(INCONCLUSIVE, None, ev | {"reason": "recurrence undecided"})
    return Verdict(NOT_APPLICABLE, None, ev | {"reason": "no ergodicity clause applies"})


def exponential_ergodicity(spec: ModelSpec) -> SufficientCheck:
    """Sufficient condition m < inf, M < 1, liminf r_i/i > 0."""
    fired = spec.M < 1.0 - CRITICAL_TOL and spec.rate.liminf_linear_positive and spec.irreducible
    return SufficientCheck(fired, "exponential_ergodicity.subcritical_linear_growth",
                           _base_evidence(spec) | {"liminf_rate_over_i_positive": spec.rate.liminf_linear_positive})


def strong_ergodicity(spec: ModelSpec, recurrent: Verdict | None = None,
                      ergodic: Verdict | None = None, **kw) -> Verdict:
    """Strong ergodicity (uniform convergence, sup_i E_i sigma_0 < inf)."""
    ev = _base_evidence(spec)
    rate = spec.rate
    if not rate.inverse_sum_finite:
        return Verdict(NO, "strong_ergodicity.divergent_inverse_rates", ev)
    if recurrent is None:
        recurrent = recurrence(spec, **kw)
    if ergodic is None:
        ergodic = ergodicity(spec, recurrent)
    ev |= {"recurrence": recurrent.value, "ergodicity": ergodic.value}
    if ergodic.value == NO:
        return Verdict(NO, "strong_ergodicity.implied_by_non_ergodicity", ev)
    M = spec.M
    if spec.is_power and rate.theta > 1 and M <= 1.0 + CRITICAL_TOL:
        alpha, theta = _power_params(spec)
        res = _integral_strong(spec, alpha, theta)
        ev["integral"] = res
        if res.converged:
            return Verdict(YES, "strong_ergodicity.power_rate_integral", ev)
        if res.diverges:
            return Verdict(NO, "strong_ergodicity.power_rate_integral", ev)
        return Verdict(INCONCLUSIVE, "strong_ergodicity.power_rate_integral", ev)
    if M < 1.0 - CRITICAL_TOL and rate.nondecreasing and spec.irreducible:
        return Verdict(YES, "strong_ergodicity.summable_inverse_rates", ev)
    return Verdict(NOT_APPLICABLE, None, ev | {"reason": "no strong ergodicity clause applies"})


def _bounds_gate(spec: ModelSpec, recurrent: Verdict | None):
    if not spec.is_power or spec.rate.theta < 1:
        raise CriterionNotApplicable("bounds need a power rate with theta >= 1")
    if spec.M > 1.0 + CRITICAL_TOL:
        raise CriterionNotApplicable("bounds need M <= 1")
    if spec.gamma > 0:
        if recurrent is None:
            recurrent = recurrence(spec)
        if recurrent.value != YES:
            raise CriterionNotApplicable(f"bounds need a recurrent process (recurrence: {recurrent.value})")
    alpha, theta = _power_params(spec)
    res = _integral_ergodic(spec, alpha, theta)
    if not res.converged:
        raise CriterionNotApplicable(f"bounds need a finite ergodicity integral (status: {res.status})")
    return alpha, theta, res


def extinction_time_bounds(spec: ModelSpec, i: int, recurrent: Verdict | None = None) -> tuple[float, float]:
    """(lower, upper) bounds on the mean hitting time of 0 from state ``i``.

    Both carry the factor 1/Gamma(theta), which makes them coincide with the
    exact mean for pure death (A = 0).
    """
    if i < 1:
        raise ValueError("initial state must be >= 1")
    alpha, theta, res_ergodic = _bounds_gate(spec, recurrent)
    core = _integral_lower(spec, alpha, theta, int(i))
    if not core.converged:
        raise CriterionNotApplicable(f"bound integral did not converge ({core.status})")
    inv_gamma = 1.0 / math.gamma(theta)
    lower = inv_gamma * core.value
    upper = lower * math.exp(inv_gamma * res_ergodic.value)
    return lower, upper


# -- birth-death comparison series --------------------------------------------------


@dataclass(frozen=True)
class SeriesSum:
    """Partial sum of a positive series with a tail verdict."""

    status: str  # "converged" or "potentially_infinite"
    partial: float
    remainder: float
    tail: str | None  # "geometric", "power" or None
    terms: int

    @property
    def value(self) -> float:
        return self.partial + self.remainder if self.status == "converged" else math.inf

    def to_dict(self) -> dict:
        return _jsonable({"status": self.status, "value": self.value, "partial": self.partial,
                          "remainder": self.remainder, "tail": self.tail, "terms": self.terms})


@dataclass(frozen=True)
class BdSeries:
    S: SeriesSum
    R_series: SeriesSum
    u: np.ndarray
    increments_nonincreasing: bool
    ratio_limit: float

    def to_dict(self) -> dict:
        return _jsonable({"S": self.S.to_dict(), "R": self.R_series.to_dict(), "u": self.u,
                          "increments_nonincreasing": self.increments_nonincreasing,
                          "ratio_limit": self.ratio_limit})


def _tail_sum(log_terms: np.ndarray) -> SeriesSum:
    n = len(log_terms)
    top = float(np.max(log_terms))
    partial = math.exp(top) * math.fsum(np.exp(log_terms - top))
    if n < 10:
        return SeriesSum("potentially_infinite", partial, math.inf, None, n)
    ratios = np.exp(np.diff(log_terms[-8:]))
    rho = float(np.max(ratios))
    last = math.exp(float(log_terms[-1]))
    if rho < 0.99 and abs(float(ratios[-1] - ratios[0])) < 0.01:
        return SeriesSum("converged", partial, last * rho / (1.0 - rho), "geometric", n)
    # power-law tail: terms ~ C n^-p with a stable slope p > 1
    idx = np.arange(1, n + 1, dtype=np.float64)

    def slope(a, b):
        return -(log_terms[b - 1] - log_terms[a - 1]) / (math.log(b) - math.log(a))

    p1 = slope(n // 4, n // 2)
    p2 = slope(n // 2, n)
    if p2 > 1.05 and abs(p1 - p2) < 0.05:
        return SeriesSum("converged", partial, last * idx[-1] / (p2 - 1.0), "power", n)
    return SeriesSum("potentially_infinite", partial, math.inf, None, n)


def bd_series(spec: ModelSpec, cap: int = 2000) -> BdSeries:
    """Series of the birth-death comparison chain.

    Birth rate ``d_i = r_i L + gamma m``, death rate ``c_i = r_i b_0``.
    ``S`` decides strong ergodicity of the chain, ``R_series`` its
    ergodicity and ``u`` are its mean hitting times of 0.  Products are
    accumulated in log space.
    """
    if cap < 10:
        raise ValueError("cap must be at least 10")
    b0 = spec.offspring[0]
    if b0 <= 0 or not spec.rate.positive:
        raise CriterionNotApplicable("death rates r_i b_0 must be positive for i >= 1")
    horizon = 4 * cap
    idx = np.arange(horizon + 2)
    r = np.asarray(spec.rate(idx), dtype=np.float64)
    L = upward_mean(spec)
    d = r * L + spec.gamma * spec.m
    c = r * b0
    with np.errstate(divide="ignore"):
        log_d = np.log(d)
        log_c = np.log(c)
    log_c[0] = -np.inf

    # S: term_n = (1 + w_n)/c_{n+1}, w_n = (d_n/c_n)(1 + w_{n-1})
    log_w = -np.inf
    log_s_terms = np.empty(cap)
    for n in range(1, cap + 1):
        log_w = log_d[n] - log_c[n] + np.logaddexp(0.0, log_w)
        log_s_terms[n - 1] = np.logaddexp(0.0, log_w) - log_c[n + 1]
    S = _tail_sum(log_s_terms)

    # R: term_n = d_0 ... d_{n-1} / (c_1 ... c_n)
    log_r_terms = np.cumsum(log_d[:cap]) - np.cumsum(log_c[1: cap + 1])
    R_series = _tail_sum(log_r_terms) if np.all(np.isfinite(log_r_terms)) else \
        SeriesSum("converged", 0.0, 0.0, None, cap)

    # u_i = sum_{k<i} (1/c_{k+1} + v_k), v_k = sum_{j>k} exp(D_j - D_k) / c_{j+1}
    with np.errstate(invalid="ignore"):
        step = log_d[1: horizon + 1] - log_c[1: horizon + 1]
    D = np.concatenate([[0.0], np.cumsum(step)])  # D[j] = sum_{l=1}^j log(d_l/c_l)
    e = D[1:horizon] - log_c[2: horizon + 1]  # e[j-1] for j = 1..horizon-1
    suffix = np.logaddexp.accumulate(e[::-1])[::-1]  # suffix[j-1] = LSE_{l>=j} e
    tail_ok = len(e) > 8 and float(np.max(np.exp(np.diff(e[-8:])))) < 1.0
    v = np.empty(cap + 1)
    for k in range(cap + 1):
        v[k] = math.exp(suffix[k] - D[k]) if tail_ok else math.inf
    inc = np.exp(-log_c[1: cap + 2]) + v[: cap + 1]
    u = np.concatenate([[0.0], np.cumsum(inc[:cap])])
    nonincreasing = bool(np.all(np.diff(inc) <= 1e-12 * np.abs(inc[1:])))
    ratio_limit = L / b0
    return BdSeries(S=S, R_series=R_series, u=u, increments_nonincreasing=nonincreasing, ratio_limit=ratio_limit)


# -- report ------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationReport:
    regular: Verdict
    recurrent: Verdict
    ergodic: Verdict
    strongly_ergodic: Verdict
    exponential_ergodic_sufficient: SufficientCheck
    extinction_bounds: dict
    inputs: dict

    def verdicts(self) -> dict[str, Verdict]:
        return {"regular": self.regular, "recurrent": self.recurrent,
                "ergodic": self.ergodic, "strongly_ergodic": self.strongly_ergodic}

    @property
    def any_inconclusive(self) -> bool:
        return any(v.value == INCONCLUSIVE for v in self.verdicts().values())

    def to_dict(self) -> dict:
        out = {k: v.to_dict() for k, v in self.verdicts().items()}
        out["exponential_ergodic_sufficient"] = self.exponential_ergodic_sufficient.to_dict()
        out["extinction_bounds"] = _jsonable(self.extinction_bounds)
        out["inputs"] = _jsonable(self.inputs)
        return out


def _enforce_chain(recurrent: Verdict, ergodic: Verdict, strong: Verdict):
    """Make strongly ergodic => ergodic => recurrent hold on the verdicts.

    A missing implication is filled in; a contradiction marks both verdicts
    inconclusive and keeps the originals as evidence.
    """
    def clash(lo: Verdict, hi: Verdict):
        ev = {"contradiction": [lo.to_dict(), hi.to_dict()]}
        return Verdict(INCONCLUSIVE, "chain_contradiction", ev), Verdict(INCONCLUSIVE, "chain_contradiction", ev)

    if strong.value == YES and ergodic.value != YES:
        if ergodic.value == NO:
            ergodic, strong = clash(ergodic, strong)
        else:
            ergodic = Verdict(YES, "ergodicity.implied_by_strong_ergodicity", {"implied_by": strong.clause})
    if ergodic.value == YES and recurrent.value != YES:
        if recurrent.value == NO:
            recurrent, ergodic = clash(recurrent, ergodic)
        else:
            recurrent = Verdict(YES, "recurrence.implied_by_ergodicity", {"implied_by": ergodic.clause})
    return recurrent, ergodic, strong


def classify(spec: ModelSpec, *, n_tail: int = 10, alpha_low: float | None = None,
             alpha_high: float | None = None, bound_states: Iterable[int] = range(1, 21)) -> ClassificationReport:
    """Evaluate every criterion and assemble a report."""
    reg = regularity(spec)
    rec = recurrence(spec, n_tail=n_tail, alpha_low=alpha_low, alpha_high=alpha_high)
    erg = ergodicity(spec, rec)
    strong = strong_ergodicity(spec, rec, erg)
    rec, erg, strong = _enforce_chain(rec, erg, strong)
    expo = exponential_ergodicity(spec)
    bounds: dict = {}
    try:
        for i in bound_states:
            lo, hi = extinction_time_bounds(spec, i, rec)
            bounds[int(i)] = {"lower": lo, "upper": hi}
    except CriterionNotApplicable as exc:
        bounds = {"status": NOT_APPLICABLE, "reason": str(exc)}
    q = smallest_fixed_point(spec)
    inputs = {"M": spec.M, "m": spec.m, "L": upward_mean(spec), "q": q, "gamma": spec.gamma,
              "rate": spec.rate.to_dict(), "n_tail": n_tail}
    return ClassificationReport(reg, rec, erg, strong, expo, bounds, inputs)
