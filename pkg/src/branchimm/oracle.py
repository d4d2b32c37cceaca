"""Brute-force numerics on truncated rate matrices.

Transition probabilities come from uniformization, stationary laws and
hitting times from sparse LU solves.  The ``*_residual`` functions check the
generating-function identities of the process against these solutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special, stats
from scipy.integrate import solve_ivp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from . import generator
from .generator import GeneratorMatrix
from .model import ModelSpec, gen_fns

__all__ = [
    "TruncationUnstable",
    "SingularSystem",
    "StationaryDist",
    "HittingSolution",
    "transition_probs",
    "transition_probs_many",
    "transition_probs_ode",
    "forward_residual",
    "stationary",
    "stable_stationary",
    "stationary_gf_residual",
    "hitting_times",
    "stable_hitting_times",
    "expected_return_time",
    "resolvent",
    "resolvent_residual",
    "forward_gf_residual",
]

POISSON_TAIL = 1e-12
DEFAULT_S = tuple(k / 10 for k in range(1, 10))


class TruncationUnstable(RuntimeError):
    """Doubling the truncation keeps moving the reported quantity."""


class SingularSystem(ArithmeticError):
    """The truncated linear system has no unique solution."""


@dataclass(frozen=True)
class StationaryDist:
    mu: np.ndarray
    N: int
    residual: float

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "N": self.N, "residual": self.residual}


@dataclass(frozen=True)
class HittingSolution:
    """Mean hitting times of 0; ``h[0] = 0`` and ``h[i] = E_i sigma_0``."""

    h: np.ndarray
    N: int
    boundary: str

    def __getitem__(self, i: int) -> float:
        return float(self.h[i])

    def to_dict(self) -> dict:
        return {"h": self.h.tolist(), "N": self.N, "boundary": self.boundary}


# -- uniformization ----------------------------------------------------------------


def _poisson_weights(mu: float) -> np.ndarray:
    """Poisson(mu) weights for n = 0..n_max, tail beyond n_max below 1e-12."""
    if mu == 0.0:
        return np.ones(1)
    n_max = int(stats.poisson.isf(POISSON_TAIL, mu)) + 1
    n = np.arange(n_max + 1)
    return np.exp(n * math.log(mu) - mu - special.gammaln(n + 1.0))


def transition_probs_many(gen: GeneratorMatrix, i: int, times: Sequence[float]) -> np.ndarray:
    """Rows ``p_i.(t)`` for several times, sharing the powers of P = I + Q/Lambda.

    Returns an array of shape ``(len(times), gen.size)``.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(times < 0):
        raise ValueError("time must be nonnegative")
    lam = gen.uniformization_rate
    size = gen.size
    if not 0 <= i < size:
        raise IndexError(f"state {i} outside truncation of size {size}")
    v = np.zeros(size)
    v[i] = 1.0
    out = np.zeros((len(times), size))
    if lam == 0.0:
        out[:] = v
        return out
    P = (sp.identity(size, format="csr") + gen.matrix / lam).T.tocsr()
    weights = [_poisson_weights(lam * t) for t in times]
    n_max = max(len(w) for w in weights)
    wsum = np.zeros(len(times))
    for n in range(n_max):
        for k, w in enumerate(weights):
            if n < len(w):
                out[k] += w[n] * v
                wsum[k] += w[n]
        v = P @ v
    return out / wsum[:, None]


def transition_probs(gen: GeneratorMatrix, i: int, t: float) -> np.ndarray:
    """Row ``p_i.(t)`` of the truncated transition function.

    The Poisson mixture is cut once the omitted mass is below 1e-12 and the
    kept weights are renormalized, so rows sum to one.
    """
    return transition_probs_many(gen, i, [t])[0]


def transition_probs_ode(gen: GeneratorMatrix, i: int, t: float, rtol: float = 1e-10,
                         atol: float = 1e-13) -> np.ndarray:
    """Row ``p_i.(t)`` by a stiff (BDF) solve of the forward equation.

    Uniformization needs about ``Lambda t`` matrix products, which is out of
    reach for long horizons on large truncations; this route is not.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    A = gen.matrix.T.tocsc()
    p0 = np.zeros(gen.size)
    p0[i] = 1.0
    if t == 0:
        return p0
    sol = solve_ivp(lambda _, p: A @ p, (0.0, float(t)), p0, method="BDF", jac=A,
                    rtol=rtol, atol=atol, t_eval=[float(t)])
    if not sol.success:
        raise ArithmeticError(f"forward solve failed: {sol.message}")
    return sol.y[:, -1]


def forward_residual(gen: GeneratorMatrix, i: int, t: float, dt: float) -> float:
    """Sup-norm defect of the forward equation by a centered difference.

    Taken over states ``0..N-2``, away from the truncation boundary.
    """
    p0, pm, p1 = transition_probs_many(gen, i, [t, t + 0.5 * dt, t + dt])
    defect = (p1 - p0) / dt - gen.matrix.T @ pm
    return float(np.max(np.abs(defect[: gen.N - 1])))


# -- stationary law ------------------------------------------------------------------


def stationary(gen: GeneratorMatrix) -> StationaryDist:
    """Solve mu Q = 0, sum(mu) = 1 on a reflecting truncation."""
    if gen.boundary != "reflect_to_N":
        raise ValueError("stationary law needs the reflecting boundary")
    n = gen.size
    A = gen.matrix.T.tolil()
    A[n - 1, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    try:
        with np.errstate(all="raise"):
            mu = splu(A.tocsc()).solve(rhs)
    except (RuntimeError, FloatingPointError) as exc:
        raise SingularSystem("stationary system is singular; the truncation is reducible") from exc
    if not np.all(np.isfinite(mu)):
        raise SingularSystem("stationary system is singular; the truncation is reducible")
    mu = np.where((mu < 0) & (mu > -1e-13), 0.0, mu)
    mu = mu / math.fsum(mu)
    residual = float(np.max(np.abs(gen.matrix.T @ mu)))
    return StationaryDist(mu=mu, N=gen.N, residual=residual)


def stable_stationary(spec: ModelSpec, N: int = 128, tol: float = 1e-8, N_max: int = 1 << 16) -> StationaryDist:
    """Stationary law on the first truncation where doubling moves mu_0 by < tol."""
    prev = stationary(generator.build(spec, "Q", N))
    while 2 * N <= N_max:
        N *= 2
        cur = stationary(generator.build(spec, "Q", N))
        if abs(cur.mu[0] - prev.mu[0]) < tol:
            return cur
        prev = cur
    raise TruncationUnstable(f"mu_0 still moving at N={N}")


def stationary_gf_residual(spec: ModelSpec, mu: np.ndarray, s_grid: Sequence[float] = DEFAULT_S) -> float:
    """Residual of the integral equation for f(s) = sum mu_j s^j (power rates).

    Uses ``y = s e^{-x}`` so the kernel becomes ``x^(theta-1)`` and is
    handled by algebraic-weight quadrature.
    """
    if not spec.is_power:
        raise ValueError("the stationary identity is stated for power rates")
    alpha, theta = spec.rate.alpha, spec.rate.theta
    mu = np.asarray(mu, dtype=np.float64)
    f = np.polynomial.Polynomial(mu)
    gth = math.gamma(theta)

    def inner(y):
        g = gen_fns(spec, y)
        return g.A / (alpha * g.B) * f(y)

    worst = 0.0
    for s in s_grid:
        upper = 50.0 + abs(math.log(s))

        def integrand(x, s=s):
            y = s * math.exp(-x)
            return inner(y) * y

        val, _ = integrate.quad(integrand, 0.0, upper, weight="alg", wvar=(theta - 1.0, 0.0),
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        worst = max(worst, abs(gth * f(s) - gth * mu[0] - val))
    return worst


# -- hitting times ------------------------------------------------------------------


def hitting_times(gen: GeneratorMatrix) -> HittingSolution:
    """Mean hitting times of 0 from 1..N-1; the cemetery (if any) counts as h = 0."""
    N = gen.N
    # states that can reach 0 inside the truncation, by search on reversed edges
    graph = gen.matrix[:N, :N].T.tocsr()
    reach = csgraph.breadth_first_order(graph, 0, directed=True, return_predecessors=False)
    if len(reach) < N:
        missing = sorted(set(range(N)) - set(reach.tolist()))
        raise SingularSystem(f"no path to 0 from states {missing[:5]}{'...' if len(missing) > 5 else ''}")
    sub = gen.matrix[1:N, 1:N].tocsc()
    try:
        with np.errstate(all="raise"):
            h = splu(sub).solve(-np.ones(N - 1))
    except (RuntimeError, FloatingPointError) as exc:
        raise SingularSystem("no path to 0 from some state of the truncation") from exc
    if not np.all(np.isfinite(h)):
        raise SingularSystem("no path to 0 from some state of the truncation")
    return HittingSolution(h=np.concatenate([[0.0], h]), N=N, boundary=gen.boundary)


def stable_hitting_times(spec: ModelSpec, kind: str = "Q_absorbed", N: int = 128, tol: float = 1e-6,
                         i_max: int = 20, N_max: int = 1 << 16) -> HittingSolution:
    """Hitting times on the first truncation where doubling moves h_1..h_imax by < tol."""
    def solve(n):
        return hitting_times(generator.build(spec, kind, n, "absorb_at_N"))

    k = min(i_max, N - 1) + 1
    prev = solve(N)
    while 2 * N <= N_max:
        N *= 2
        cur = solve(N)
        if np.max(np.abs(cur.h[:k] - prev.h[:k])) < tol:
            return cur
        prev = cur
    raise TruncationUnstable(f"hitting times still moving at N={N}")


def expected_return_time(spec: ModelSpec, hit: HittingSolution) -> float:
    """E_0 sigma_0 = 1/gamma + sum_i a_i E_i sigma_0."""
    if spec.gamma <= 0:
        raise ValueError("return time to 0 needs gamma > 0")
    a = spec.immigration.probs
    if len(a) > len(hit.h):
        raise ValueError("immigration support exceeds the truncation")
    return 1.0 / spec.gamma + math.fsum(a[k] * hit.h[k] for k in range(1, len(a)))


# -- resolvent and generating-function identities ----------------------------------------


def resolvent(gen: GeneratorMatrix, i: int, lam: float) -> np.ndarray:
    """Row ``phi_i.(lam)`` of (lam I - Q)^-1 on the truncation."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    n = gen.size
    A = (lam * sp.identity(n, format="csc") - gen.matrix).T.tocsc()
    rhs = np.zeros(n)
    rhs[i] = 1.0
    return splu(A).solve(rhs)


def _gf_sides(spec: ModelSpec, row: np.ndarray, s: float) -> float:
    """B(s) sum_{j>=1} row_j r_j s^(j-1) - A(s) sum_{j>=1} row_j s^j."""
    n = len(row)
    j = np.arange(n, dtype=np.float64)
    r = np.asarray(spec.rate(np.arange(n)), dtype=np.float64)
    g = gen_fns(spec, s)
    powers = s ** j
    down = math.fsum(row[1:] * r[1:] * s ** (j[1:] - 1.0))
    up = math.fsum(row[1:] * powers[1:])
    return float(g.B) * down - float(g.A) * up


def resolvent_residual(gen: GeneratorMatrix, i: int, lam: float,
                       s_grid: Sequence[float] = (0.2, 0.5, 0.8)) -> float:
    """Residual of the Laplace-transformed forward identity for the killed process."""
    phi = resolvent(gen, i, lam)[: gen.N]
    worst = 0.0
    for s in s_grid:
        lhs = lam * math.fsum(phi * s ** np.arange(gen.N, dtype=np.float64)) - s**i
        worst = max(worst, abs(lhs - _gf_sides(gen.spec, phi, s)))
    return worst


def forward_gf_residual(gen: GeneratorMatrix, i: int, t: float,
                        s_grid: Sequence[float] = DEFAULT_S) -> float:
    """Residual of the generating-function form of the forward equation.

    The time derivative is ``p(t) Q`` on the truncation.
    """
    p = transition_probs(gen, i, t)
    dp = (gen.matrix.T @ p)[: gen.N]
    p = p[: gen.N]
    worst = 0.0
    j = np.arange(gen.N, dtype=np.float64)
    for s in s_grid:
        lhs = math.fsum(dp * s**j)
        worst = max(worst, abs(lhs - _gf_sides(gen.spec, p, s)))
    return worst
