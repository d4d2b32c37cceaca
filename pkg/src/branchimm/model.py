"""Model primitives: offspring/immigration laws, branching rates, generating functions."""
from __future__ import annotations

import json
import math
from collections import namedtuple
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "ModelError",
    "Pmf",
    "RateFunction",
    "ModelSpec",
    "GenFns",
    "offspring_mean",
    "immigration_mean",
    "upward_mean",
    "gen_fns",
    "smallest_fixed_point",
]

PMF_TOL = 1e-12
CRITICAL_TOL = 1e-12

GenFns = namedtuple("GenFns", ["F", "G", "A", "B"])


class ModelError(ValueError):
    """Raised when a model description violates the model conventions."""


@dataclass(frozen=True)
class Pmf:
    """Finitely supported probability mass function on {0, 1, 2, ...}.

    ``probs[k]`` is the mass at ``k``; mass beyond the sequence is zero.
    """

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if not probs:
            raise ModelError("a pmf needs at least one entry")
        for k, p in enumerate(probs):
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise ModelError(f"pmf entry {k} = {p!r} is outside [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > PMF_TOL:
            raise ModelError(f"pmf sums to {total!r}, not 1 (tolerance {PMF_TOL:g})")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_mapping(cls, masses: Mapping[int, float]) -> "Pmf":
        if any(k < 0 for k in masses):
            raise ModelError("pmf indices must be nonnegative")
        probs = [0.0] * (max(masses) + 1)
        for k, p in masses.items():
            probs[k] = p
        return cls(tuple(probs))

    def __getitem__(self, k: int) -> float:
        if k < 0 or k >= len(self.probs):
            return 0.0
        return self.probs[k]

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.probs) if p > 0.0)

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.probs))

    @property
    def factorial_moment2(self) -> float:
        return math.fsum(k * (k - 1) * p for k, p in enumerate(self.probs))

    def pgf(self, s):
        """Generating function sum_k p_k s^k (vectorized)."""
        return np.polynomial.polynomial.polyval(s, self.probs)

    def taylor_at_one(self) -> np.ndarray:
        """Coefficients c_k with pgf(1 - t) = sum_k c_k t^k."""
        n = len(self.probs)
        coef = np.empty(n)
        for k in range(n):
            acc = math.fsum(p * math.comb(i, k) for i, p in enumerate(self.probs) if i >= k)
            coef[k] = -acc if k % 2 else acc
        return coef


@dataclass(frozen=True)
class RateFunction:
    """Total branching rate r(i) as a function of the population size.

    Two kinds are supported. ``power`` evaluates ``alpha * i**theta``.
    ``table`` looks values up by index; beyond the table the last entry is
    extended as ``r(n-1) * (i / (n-1))**tail_exponent``.  The tail exponent
    is what decides infinite-sum questions for tabulated rates.
    """

    kind: str
    alpha: float = 0.0
    theta: float = 0.0
    values: tuple[float, ...] = field(default=())
    tail_exponent: float = 0.0

    def __post_init__(self):
        if self.kind == "power":
            if not (self.alpha > 0 and self.theta > 0):
                raise ModelError("power rate needs alpha > 0 and theta > 0")
            object.__setattr__(self, "alpha", float(self.alpha))
            object.__setattr__(self, "theta", float(self.theta))
        elif self.kind == "table":
            values = tuple(float(v) for v in self.values)
            if len(values) < 2:
                raise ModelError("rate table needs at least two entries")
            if any(v < 0 or not math.isfinite(v) for v in values):
                raise ModelError("rate table entries must be finite and nonnegative")
            if values[0] != 0.0:
                raise ModelError(f"r(0) must be 0, got {values[0]!r}")
            if self.tail_exponent < 0:
                raise ModelError("tail_exponent must be nonnegative")
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "tail_exponent", float(self.tail_exponent))
        else:
            raise ModelError(f"unknown rate kind {self.kind!r}")

    @classmethod
    def power(cls, alpha: float, theta: float) -> "RateFunction":
        return cls("power", alpha=alpha, theta=theta)

    @classmethod
    def table(cls, values: Sequence[float], tail_exponent: float = 0.0) -> "RateFunction":
        return cls("table", values=tuple(values), tail_exponent=tail_exponent)

    def __call__(self, i):
        i_arr = np.asarray(i)
        if np.any(i_arr < 0):
            raise ValueError("rates are defined on nonnegative states only")
        x = i_arr.astype(np.float64)
        if self.kind == "power":
            out = self.alpha * x**self.theta
        else:
            vals = np.asarray(self.values)
            n = len(vals)
            idx = np.minimum(i_arr, n - 1).astype(np.int64)
            out = vals[idx]
            beyond = i_arr >= n
            if np.any(beyond):
                tail = vals[-1] * (x / (n - 1)) ** self.tail_exponent
                out = np.where(beyond, tail, out)
        if np.ndim(i) == 0:
            return float(out)
        return out

    # -- tail properties used by the criteria ---------------------------------

    @property
    def inverse_sum_finite(self) -> bool:
        """Whether sum_{i>=1} 1/r(i) < infinity."""
        if self.kind == "power":
            return self.theta > 1
        if any(v == 0.0 for v in self.values[1:]):
            return False
        return self.tail_exponent > 1

    @property
    def nondecreasing(self) -> bool:
        if self.kind == "power":
            return True
        return all(a <= b for a, b in zip(self.values, self.values[1:]))

    @property
    def unbounded(self) -> bool:
        if self.kind == "power":
            return True
        return self.values[-1] > 0 and self.tail_exponent > 0

    @property
    def positive(self) -> bool:
        """r(i) > 0 for every i >= 1."""
        if self.kind == "power":
            return True
        return all(v > 0 for v in self.values[1:])

    @property
    def liminf_linear_positive(self) -> bool:
        """Whether liminf r(i)/i > 0."""
        if self.kind == "power":
            return self.theta >= 1
        return self.values[-1] > 0 and self.tail_exponent >= 1

    def linear_bounds(self, n: int) -> tuple[float, float]:
        """(inf, sup) of r(i)/i over i > n; either may be 0 or inf."""
        if self.kind == "power":
            first = self.alpha * (n + 1) ** (self.theta - 1)
            if self.theta > 1:
                return first, math.inf
            if self.theta < 1:
                return 0.0, first
            return self.alpha, self.alpha
        vals = self.values
        m = len(vals) - 1
        ratios = [vals[i] / i for i in range(n + 1, m + 1)]
        base = vals[-1] / m
        tau = self.tail_exponent
        # beyond the table r(i)/i = base * (i/m)**(tau - 1)
        first = base * (max(m + 1, n + 1) / m) ** (tau - 1)
        if base == 0.0:
            tail_inf = tail_sup = 0.0
        elif tau > 1:
            tail_inf, tail_sup = first, math.inf
        elif tau < 1:
            tail_inf, tail_sup = 0.0, first
        else:
            tail_inf = tail_sup = base
        return min(ratios + [tail_inf]), max(ratios + [tail_sup])

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "alpha": self.alpha, "theta": self.theta}
        out = {"kind": "table", "values": list(self.values)}
        if self.tail_exponent:
            out["tail_exponent"] = self.tail_exponent
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RateFunction":
        kind = d.get("kind")
        if kind == "power":
            _reject_unknown(d, {"kind", "alpha", "theta"}, "rate")
            return cls.power(d["alpha"], d["theta"])
        if kind == "table":
            _reject_unknown(d, {"kind", "values", "tail_exponent"}, "rate")
            return cls.table(d["values"], d.get("tail_exponent", 0.0))
        raise ModelError(f"unknown rate kind {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Nonlinear branching process with immigration.

    Parameters
    ----------
    offspring : Pmf
        Offspring law ``b``; ``b[1]`` must be zero.
    immigration : Pmf
        Immigration batch law ``a``; ``a[0]`` must be zero.
    gamma : float
        Immigration rate, nonnegative.
    rate : RateFunction
        Total branching rate ``r(i)``.
    """

    offspring: Pmf
    immigration: Pmf
    gamma: float
    rate: RateFunction

    def __post_init__(self):
        if self.offspring[1] != 0.0:
            raise ModelError(f"offspring law violates the b_1 = 0 convention (b_1 = {self.offspring[1]!r})")
        if self.immigration[0] != 0.0:
            raise ModelError(f"immigration law violates the a_0 = 0 convention (a_0 = {self.immigration[0]!r})")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ModelError(f"gamma must be finite and nonnegative, got {self.gamma!r}")
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def build(cls, offspring, immigration=(0.0, 1.0), gamma=0.0, *, alpha=1.0, theta=1.0,
              rate: RateFunction | None = None) -> "ModelSpec":
        """Convenience constructor taking plain sequences or mappings."""
        return cls(
            offspring=_as_pmf(offspring),
            immigration=_as_pmf(immigration),
            gamma=gamma,
            rate=rate if rate is not None else RateFunction.power(alpha, theta),
        )

    @property
    def M(self) -> float:
        return self.offspring.mean

    @property
    def m(self) -> float:
        return self.immigration.mean

    @property
    def is_power(self) -> bool:
        return self.rate.kind == "power"

    @property
    def critical(self) -> bool:
        return abs(self.M - 1.0) <= CRITICAL_TOL

    @property
    def irreducible(self) -> bool:
        """gamma * r(i) * b_0 > 0 for every i >= 1."""
        return self.gamma > 0 and self.offspring[0] > 0 and self.rate.positive

    def scaled(self, c: float) -> "ModelSpec":
        """Same law with gamma and every rate multiplied by ``c`` (a time change)."""
        if self.rate.kind == "power":
            rate = RateFunction.power(self.rate.alpha * c, self.rate.theta)
        else:
            rate = RateFunction.table([v * c for v in self.rate.values], self.rate.tail_exponent)
        return ModelSpec(self.offspring, self.immigration, self.gamma * c, rate)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "offspring": list(self.offspring.probs),
            "immigration": {"pmf": list(self.immigration.probs), "gamma": self.gamma},
            "rate": self.rate.to_dict(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelSpec":
        if not isinstance(d, Mapping):
            raise ModelError("model document must be a JSON object")
        _reject_unknown(d, {"offspring", "immigration", "rate"}, "model")
        try:
            imm = d["immigration"]
            _reject_unknown(imm, {"pmf", "gamma"}, "immigration")
            return cls(
                offspring=Pmf(tuple(d["offspring"])),
                immigration=Pmf(tuple(imm["pmf"])),
                gamma=imm["gamma"],
                rate=RateFunction.from_dict(d["rate"]),
            )
        except KeyError as exc:
            raise ModelError(f"missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ModelError(f"malformed model document: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ModelSpec":
        return cls.from_json(Path(path).read_text())


def _as_pmf(x) -> Pmf:
    if isinstance(x, Pmf):
        return x
    if isinstance(x, Mapping):
        return Pmf.from_mapping(x)
    return Pmf(tuple(x))


def _reject_unknown(d, allowed, where):
    if not isinstance(d, Mapping):
        raise ModelError(f"{where} must be a JSON object")
    extra = set(d) - set(allowed)
    if extra:
        raise ModelError(f"unknown {where} keys: {sorted(extra)}")


def offspring_mean(spec: ModelSpec) -> float:
    return spec.offspring.mean


def immigration_mean(spec: ModelSpec) -> float:
    return spec.immigration.mean


def upward_mean(spec: ModelSpec) -> float:
    """M + b_0 - 1, the mean net upward step of a branching event."""
    b = spec.offspring.probs
    return math.fsum(k * b[k + 1] for k in range(1, len(b) - 1))


def gen_fns(spec: ModelSpec, s) -> GenFns:
    """Evaluate F, G, A = gamma (1 - F) and B = G - s at ``s`` in [0, 1]."""
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(~((s_arr >= 0.0) & (s_arr <= 1.0))):
        raise ValueError("generating functions are evaluated on s in [0, 1] only")
    F = spec.immigration.pgf(s_arr)
    G = spec.offspring.pgf(s_arr)
    A = spec.gamma * (1.0 - F)
    B = G - s_arr
    if np.ndim(s) == 0:
        return GenFns(float(F), float(G), float(A), float(B))
    return GenFns(F, G, A, B)


def smallest_fixed_point(spec: ModelSpec, tol: float = 1e-12) -> float:
    """Smallest root q of G(q) = q in [0, 1], by bisection."""
    b = spec.offspring
    G = b.pgf
    if b[0] == 0.0:
        return 0.0
    if spec.M <= 1.0 + CRITICAL_TOL:
        # B is convex with B(0) = b_0 > 0 and B'(1) = M - 1 <= 0, so its only zero is 1
        return 1.0
    dG = np.polynomial.polynomial.polyder(b.probs)
    lo, hi = 0.0, 1.0
    # minimizer of B: G'(s) = 1, G' increasing from b_1 = 0 to M > 1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.polynomial.polynomial.polyval(mid, dG) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    right = lo
    if G(right) - right >= 0.0:
        raise ArithmeticError("failed to bracket the fixed point")
    lo, hi = 0.0, right
    while hi - lo > tol * 1e-3 and hi - lo > 4 * np.spacing(hi):
        mid = 0.5 * (lo + hi)
        if G(mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
