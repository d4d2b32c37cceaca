"""Exact jump-by-jump simulation and Monte Carlo estimators.

From state ``i`` the holding time is ``Exp(r_i + gamma)``.  With probability
``r_i / (r_i + gamma)`` a branching event moves to ``i + k - 1`` with ``k ~ b``,
otherwise an immigration batch ``j ~ a`` moves to ``i + j``.  Offspring and
batch sizes are drawn from alias tables.

Each replica owns a Philox stream keyed by ``(seed, replica)``, so any
replica can be regenerated on its own and ensembles split freely across
threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as _FsPath

import numpy as np
from numba import njit

from .model import ModelSpec

__all__ = [
    "DEFAULT_STATE_CAP",
    "DEFAULT_JUMP_CAP",
    "AliasTable",
    "Path",
    "HittingEstimate",
    "Occupation",
    "CapHitCount",
    "rng_for",
    "simulate",
    "run_ensemble",
    "estimate_hitting",
    "occupation_frequencies",
    "sample_jumps",
    "cap_hit_count",
]

DEFAULT_STATE_CAP = 10**6
DEFAULT_JUMP_CAP = 10**7
RATE_TABLE_MAX = 1 << 21

HORIZON, ABSORBED, EXPLODED, JUMP_CAP, HIT = range(5)
_NAMES = {HORIZON: "horizon_reached", ABSORBED: "absorbed", EXPLODED: "exploded_cap",
          JUMP_CAP: "jump_cap", HIT: "hit_target"}


@dataclass(frozen=True)
class AliasTable:
    """Vose alias table for a pmf on ``0..K-1``."""

    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def build(cls, pmf) -> "AliasTable":
        p = np.asarray(pmf, dtype=np.float64)
        K = len(p)
        scaled = p * K / p.sum()
        prob = np.ones(K)
        alias = np.arange(K, dtype=np.int64)
        small = [k for k in range(K) if scaled[k] < 1.0]
        large = [k for k in range(K) if scaled[k] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        return cls(prob=prob, alias=alias)

    def pmf(self) -> np.ndarray:
        """Distribution encoded by the table (for checking)."""
        K = len(self.prob)
        out = self.prob / K
        np.add.at(out, self.alias, (1.0 - self.prob) / K)
        return out


def rng_for(seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream of replica ``replica`` under ``seed``."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(replica)]))


# -- compiled kernels ------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _rate(x, rates, power, alpha, theta, r_last, n_last, tau):
    if x < rates.shape[0]:
        return rates[x]
    if power:
        return alpha * float(x) ** theta
    return r_last * (float(x) / n_last) ** tau


@njit(nogil=True, cache=True)
def _draw(v, r, gamma, bprob, balias, aprob, aalias):
    """Jump size from a single uniform ``v`` on [0, r + gamma)."""
    if v < r:
        K = bprob.shape[0]
        w = v / r * K
        k = min(int(w), K - 1)
        if w - k >= bprob[k]:
            k = balias[k]
        return k - 1
    K = aprob.shape[0]
    w = (v - r) / gamma * K
    j = min(int(w), K - 1)
    if w - j >= aprob[j]:
        j = aalias[j]
    return j


@njit(nogil=True, cache=True)
def _run(rng, x0, horizon, state_cap, jump_cap, target,
         rates, power, alpha, theta, r_last, n_last, tau,
         gamma, bprob, balias, aprob, aalias):
    """Terminal code, state, time and jump count of one path."""
    n_rates = rates.shape[0]
    kb = bprob.shape[0]
    ka = aprob.shape[0]
    x = x0
    t = 0.0
    n = 0
    while True:
        if x >= state_cap:
            return EXPLODED, x, t, n
        if n >= jump_cap:
            return JUMP_CAP, x, t, n
        if x < n_rates:
            r = rates[x]
        else:
            r = _rate(x, rates, power, alpha, theta, r_last, n_last, tau)
        tot = r + gamma
        if tot <= 0.0:
            return ABSORBED, x, horizon, n
        t += rng.standard_exponential() / tot
        if t >= horizon:
            return HORIZON, x, horizon, n
        # inlined draw: a helper call doubles the cost of a step
        v = rng.random() * tot
        if v < r:
            w = v / r * kb
            k = min(int(w), kb - 1)
            if w - k >= bprob[k]:
                k = balias[k]
            x += k - 1
        else:
            w = (v - r) / gamma * ka
            k = min(int(w), ka - 1)
            if w - k >= aprob[k]:
                k = aalias[k]
            x += k
        n += 1
        if x == target:
            return HIT, x, t, n


@njit(nogil=True, cache=True)
def _run_recorded(rng, x0, horizon, state_cap, jump_cap, target,
                  rates, power, alpha, theta, r_last, n_last, tau,
                  gamma, bprob, balias, aprob, aalias):
    """Same draws as :func:`_run`, also returning jump times and states."""
    size = 1024
    times = np.empty(size)
    states = np.empty(size + 1, dtype=np.int64)
    states[0] = x0
    x = x0
    t = 0.0
    n = 0
    code = HORIZON
    while True:
        if x >= state_cap:
            code = EXPLODED
            break
        if n >= jump_cap:
            code = JUMP_CAP
            break
        r = _rate(x, rates, power, alpha, theta, r_last, n_last, tau)
        tot = r + gamma
        if tot <= 0.0:
            code = ABSORBED
            t = horizon
            break
        t += rng.standard_exponential() / tot
        if t >= horizon:
            code = HORIZON
            t = horizon
            break
        x += _draw(rng.random() * tot, r, gamma, bprob, balias, aprob, aalias)
        if n >= size:
            grown = np.empty(2 * size)
            grown[:size] = times
            times = grown
            grown_s = np.empty(2 * size + 1, dtype=np.int64)
            grown_s[: size + 1] = states
            states = grown_s
            size *= 2
        times[n] = t
        states[n + 1] = x
        n += 1
        if x == target:
            code = HIT
            break
    return code, x, t, n, times[:n], states[: n + 1]


@njit(nogil=True, cache=True)
def _occupy(rng, x0, horizon, burn_in, state_cap, jump_cap, occ,
            rates, power, alpha, theta, r_last, n_last, tau,
            gamma, bprob, balias, aprob, aalias):
    """Add time spent in each state during [burn_in, horizon] to ``occ``."""
    top = occ.shape[0] - 1
    x = x0
    t = 0.0
    n = 0
    while t < horizon:
        if x >= state_cap or n >= jump_cap:
            return EXPLODED if x >= state_cap else JUMP_CAP
        r = _rate(x, rates, power, alpha, theta, r_last, n_last, tau)
        tot = r + gamma
        nxt = horizon if tot <= 0.0 else min(horizon, t + rng.standard_exponential() / tot)
        lo = max(t, burn_in)
        if nxt > lo:
            occ[min(x, top)] += nxt - lo
        t = nxt
        if t >= horizon:
            break
        x += _draw(rng.random() * tot, r, gamma, bprob, balias, aprob, aalias)
        n += 1
    return HORIZON


@njit(nogil=True, cache=True)
def _one_step(rng, count, r, gamma, bprob, balias, aprob, aalias):
    out = np.empty(count, dtype=np.int64)
    tot = r + gamma
    for k in range(count):
        out[k] = _draw(rng.random() * tot, r, gamma, bprob, balias, aprob, aalias)
    return out


# -- model tables ------------------------------------------------------------------------


class _Tables:
    """Everything a kernel needs about one spec, built once per call."""

    def __init__(self, spec: ModelSpec, state_cap: int):
        rate = spec.rate
        n = int(min(max(state_cap, 1), RATE_TABLE_MAX)) + 1
        self.rates = np.asarray(rate(np.arange(n)), dtype=np.float64)
        self.power = rate.kind == "power"
        self.alpha = float(rate.alpha or 0.0)
        self.theta = float(rate.theta or 0.0)
        vals = rate.values or (0.0, 0.0)
        self.r_last = float(vals[-1])
        self.n_last = float(max(len(vals) - 1, 1))
        self.tau = float(rate.tail_exponent or 0.0)
        self.gamma = float(spec.gamma)
        b = AliasTable.build(spec.offspring.probs)
        a = AliasTable.build(spec.immigration.probs)
        self.bprob, self.balias, self.aprob, self.aalias = b.prob, b.alias, a.prob, a.alias

    def args(self):
        return (self.rates, self.power, self.alpha, self.theta, self.r_last, self.n_last, self.tau,
                self.gamma, self.bprob, self.balias, self.aprob, self.aalias)


# -- paths ---------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Path:
    jump_times: np.ndarray
    states: np.ndarray
    terminal: str
    terminal_state: int
    end_time: float
    seed: int
    replica: int

    @property
    def terminal_label(self) -> str:
        if self.terminal in ("absorbed", "exploded_cap", "hit_target"):
            return f"{self.terminal}({self.terminal_state})"
        return self.terminal

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def to_csv(self) -> str:
        rows = ["time,state", f"0,{int(self.states[0])}"]
        rows += [f"{float(t)!r},{int(x)}" for t, x in zip(self.jump_times, self.states[1:])]
        rows.append(f"# terminal={self.terminal_label} state={self.terminal_state} "
                    f"end_time={self.end_time!r} seed={self.seed} replica={self.replica}")
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        _FsPath(path).write_text(self.to_csv())

    def summary(self) -> dict:
        return {"terminal": self.terminal_label, "state": self.terminal_state, "end_time": self.end_time,
                "jumps": self.n_jumps, "seed": self.seed, "replica": self.replica}


def _check_caps(horizon, state_cap, jump_cap):
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if state_cap < 1 or jump_cap < 1:
        raise ValueError("caps must be positive")


def simulate(spec: ModelSpec, x0: int, horizon: float, state_cap: int = DEFAULT_STATE_CAP,
             jump_cap: int = DEFAULT_JUMP_CAP, seed: int = 0, replica: int = 0) -> Path:
    """Simulate one path until the horizon, absorption, or a cap."""
    _check_caps(horizon, state_cap, jump_cap)
    tabs = _Tables(spec, state_cap)
    code, x, t, _, times, states = _run_recorded(rng_for(seed, replica), int(x0), float(horizon),
                                                 int(state_cap), int(jump_cap), -1, *tabs.args())
    return Path(jump_times=times.copy(), states=states.copy(), terminal=_NAMES[code],
                terminal_state=int(x), end_time=float(t), seed=int(seed), replica=int(replica))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Per-replica outcomes; index k is replica k."""

    codes: np.ndarray
    states: np.ndarray
    end_times: np.ndarray
    jumps: np.ndarray
    seed: int

    def counts(self) -> dict[str, int]:
        return {_NAMES[c]: int(np.sum(self.codes == c)) for c in sorted(_NAMES) if np.any(self.codes == c)}

    def summary(self) -> dict:
        return {"replicas": len(self.codes), "seed": self.seed, "terminals": self.counts(),
                "mean_end_time": float(np.mean(self.end_times)), "mean_jumps": float(np.mean(self.jumps))}


def run_ensemble(spec: ModelSpec, x0: int, horizon: float, replicas: int, seed: int = 0,
                 state_cap: int = DEFAULT_STATE_CAP, jump_cap: int = DEFAULT_JUMP_CAP,
                 target: int = -1, workers: int = 1) -> Ensemble:
    """Run replicas ``0..replicas-1`` without recording paths.

    ``target >= 0`` stops a replica at its first visit to ``target`` after
    the first jump.  Replicas may be spread over ``workers`` threads; the
    result does not depend on the split.
    """
    _check_caps(horizon, state_cap, jump_cap)
    tabs = _Tables(spec, state_cap)
    args = tabs.args()
    codes = np.empty(replicas, dtype=np.int64)
    states = np.empty(replicas, dtype=np.int64)
    ends = np.empty(replicas)
    jumps = np.empty(replicas, dtype=np.int64)

    def work(chunk):
        for k in chunk:
            c, x, t, n = _run(rng_for(seed, k), int(x0), float(horizon), int(state_cap), int(jump_cap),
                              int(target), *args)
            codes[k], states[k], ends[k], jumps[k] = c, x, t, n

    chunks = np.array_split(np.arange(replicas), max(1, workers))
    if workers <= 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))
    return Ensemble(codes=codes, states=states, end_times=ends, jumps=jumps, seed=int(seed))


# -- estimators ----------------------------------------------------------------------------


@dataclass(frozen=True)
class HittingEstimate:
    mean: float
    std_error: float
    censored_fraction: float
    replicas: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error,
                "censored_fraction": self.censored_fraction, "replicas": self.replicas}


def estimate_hitting(spec: ModelSpec, x0: int, replicas: int = 10_000, seed: int = 0, *, target: int = 0,
                     horizon: float = 1e6, state_cap: int = DEFAULT_STATE_CAP,
                     jump_cap: int = DEFAULT_JUMP_CAP, workers: int = 1) -> HittingEstimate:
    """Monte Carlo mean of the first visit to ``target`` after the first jump.

    Paths that reach the horizon or a cap first are censored and left out
    of the mean.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas")
    ens = run_ensemble(spec, x0, horizon, replicas, seed, state_cap, jump_cap, target, workers)
    hit = ens.codes == HIT
    if not np.any(hit):
        raise RuntimeError("every path was censored; increase the horizon or the caps")
    t = ens.end_times[hit]
    se = float(np.std(t, ddof=1) / math.sqrt(len(t))) if len(t) > 1 else math.inf
    return HittingEstimate(mean=float(np.mean(t)), std_error=se,
                           censored_fraction=float(1.0 - np.mean(hit)), replicas=replicas)


@dataclass(frozen=True)
class Occupation:
    """Time-weighted state frequencies averaged over replicas.

    ``freq[k]`` for ``k < len(freq) - 1``; the last entry pools all higher
    states.  ``std_error`` is the across-replica standard error.
    """

    freq: np.ndarray
    std_error: np.ndarray
    replicas: int
    window: float
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"freq": self.freq.tolist(), "std_error": self.std_error.tolist(),
                "replicas": self.replicas, "window": self.window, "flags": self.flags}


def occupation_frequencies(spec: ModelSpec, x0: int, horizon: float, burn_in: float, replicas: int,
                           seed: int = 0, n_states: int = 256, state_cap: int = DEFAULT_STATE_CAP,
                           jump_cap: int = DEFAULT_JUMP_CAP) -> Occupation:
    """Fraction of [burn_in, horizon] spent in each state, per replica then averaged."""
    if not 0 <= burn_in < horizon:
        raise ValueError("need 0 <= burn_in < horizon")
    tabs = _Tables(spec, state_cap)
    args = tabs.args()
    window = horizon - burn_in
    per = np.zeros((replicas, n_states + 1))
    flags: dict[str, int] = {}
    for k in range(replicas):
        code = _occupy(rng_for(seed, k), int(x0), float(horizon), float(burn_in), int(state_cap), int(jump_cap),
                       per[k], *args)
        if code != HORIZON:
            flags[_NAMES[code]] = flags.get(_NAMES[code], 0) + 1
    per /= window
    freq = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full_like(freq, math.inf)
    return Occupation(freq=freq, std_error=se, replicas=replicas, window=window, flags=flags)


def sample_jumps(spec: ModelSpec, i: int, count: int, seed: int = 0, replica: int = 0) -> np.ndarray:
    """``count`` independent one-step destinations from state ``i``."""
    tabs = _Tables(spec, i + 1)
    r = float(spec.rate(i))
    if r + spec.gamma <= 0:
        raise ValueError(f"state {i} has no outgoing jumps")
    return i + _one_step(rng_for(seed, replica), int(count), r, tabs.gamma,
                         tabs.bprob, tabs.balias, tabs.aprob, tabs.aalias)


@dataclass(frozen=True)
class CapHitCount:
    """Replicas reaching ``state_cap`` before the horizon, run in replica order.

    ``run`` replicas were simulated; the loop stops as soon as ``hits``
    reaches ``stop_hits`` or the misses reach ``stop_misses``, at which point
    any comparison of the full-ensemble fraction with the matching threshold
    is already settled.
    """

    hits: int
    run: int
    replicas: int

    @property
    def misses(self) -> int:
        return self.run - self.hits

    @property
    def bounds(self) -> tuple[float, float]:
        """Range of the full-ensemble fraction consistent with the replicas run."""
        return self.hits / self.replicas, (self.hits + self.replicas - self.run) / self.replicas


def cap_hit_count(spec: ModelSpec, x0: int, horizon: float, state_cap: int, replicas: int, seed: int = 0,
                  jump_cap: int = DEFAULT_JUMP_CAP * 10, stop_hits: int | None = None,
                  stop_misses: int | None = None) -> CapHitCount:
    """Count explosion-proxy hits, stopping once a threshold is decided."""
    _check_caps(horizon, state_cap, jump_cap)
    tabs = _Tables(spec, state_cap)
    args = tabs.args()
    hits = 0
    for k in range(replicas):
        code, *_ = _run(rng_for(seed, k), int(x0), float(horizon), int(state_cap), int(jump_cap), -1, *args)
        hits += code == EXPLODED
        misses = k + 1 - hits
        if (stop_hits is not None and hits >= stop_hits) or (stop_misses is not None and misses >= stop_misses):
            return CapHitCount(hits=int(hits), run=k + 1, replicas=replicas)
    return CapHitCount(hits=int(hits), run=replicas, replicas=replicas)
