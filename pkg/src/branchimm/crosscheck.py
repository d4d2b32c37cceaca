"""Model-level consistency checks across the analytic, oracle and Monte Carlo routes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import classify as cl
from . import generator, oracle, simulator
from .model import ModelSpec

__all__ = ["Check", "CrosscheckResult", "run_crosscheck", "chi_square_jumps"]

BRACKET_RTOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool | None  # None: skipped because the hypotheses do not hold
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        status = "skipped" if self.passed is None else ("pass" if self.passed else "fail")
        return {"name": self.name, "status": status, "detail": cl._jsonable(self.detail)}


@dataclass(frozen=True)
class CrosscheckResult:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def chi_square_jumps(spec: ModelSpec, i: int, samples: int = 100_000, seed: int = 0, N: int = 128) -> float:
    """p-value of simulated one-step jumps from ``i`` against the jump chain."""
    N = max(N, 2 * (i + len(spec.offspring.probs) + len(spec.immigration.probs)))
    row = generator.embedded(generator.build(spec, "Q", N)).row(i)
    targets = sorted(row)
    dest = simulator.sample_jumps(spec, i, samples, seed=seed, replica=i)
    observed = np.array([np.sum(dest == j) for j in targets], dtype=np.float64)
    if observed.sum() != samples:
        return 0.0
    expected = samples * np.array([row[j] for j in targets])
    if len(targets) == 1:
        return 1.0
    return float(stats.chisquare(observed, expected).pvalue)


def _chain_ok(report: cl.ClassificationReport) -> bool:
    v = {k: x.value for k, x in report.verdicts().items()}
    if v["strongly_ergodic"] == cl.YES and v["ergodic"] != cl.YES:
        return False
    if v["ergodic"] == cl.YES and v["recurrent"] != cl.YES:
        return False
    return all(x.clause != "chain_contradiction" for x in report.verdicts().values())


def run_crosscheck(spec: ModelSpec, *, seed: int = 0, replicas: int = 10_000, N: int = 128,
                   states: int = 20, horizon: float = 1e6) -> CrosscheckResult:
    """Every applicable check on one model.

    ``states`` bounds the initial states used for hitting-time checks.
    """
    checks: list[Check] = []
    report = cl.classify(spec, bound_states=range(1, states + 1))
    checks.append(Check("verdict_chain", _chain_ok(report),
                        {k: v.value for k, v in report.verdicts().items()}))

    hit = None
    bounds = report.extinction_bounds
    finite_means = report.ergodic.value == cl.YES or (spec.gamma == 0 and "status" not in bounds)
    if finite_means:
        try:
            hit = oracle.stable_hitting_times(spec, N=N, i_max=states)
            checks.append(Check("hitting_times_n_stable", True, {"N": hit.N}))
        except oracle.TruncationUnstable as exc:
            checks.append(Check("hitting_times_n_stable", False, {"error": str(exc)}))
    else:
        checks.append(Check("hitting_times_n_stable", None, {"reason": "mean hitting times not known to be finite"}))
    if hit is not None and "status" not in bounds:
        # slack covers the quadrature tolerance when the bracket collapses (pure death)
        slack = {i: BRACKET_RTOL * max(1.0, hit.h[i]) for i in bounds}
        bad = [i for i, b in bounds.items()
               if not b["lower"] - slack[i] <= hit.h[i] <= b["upper"] + slack[i]]
        checks.append(Check("hitting_within_bounds", not bad, {"violations": bad}))
    else:
        checks.append(Check("hitting_within_bounds", None, {"reason": bounds.get("reason", "no oracle")}))

    if hit is not None:
        worst = 0.0
        rows = {}
        for i in sorted({1, min(5, states), states}):
            est = simulator.estimate_hitting(spec, i, replicas, seed, horizon=horizon)
            z = abs(est.mean - hit.h[i]) / est.std_error
            rows[i] = {"oracle": hit.h[i], "mc": est.mean, "se": est.std_error, "z": z}
            worst = max(worst, z)
        checks.append(Check("monte_carlo_hitting_3se", bool(worst <= 3.0), rows))

    if report.ergodic.value == cl.YES and spec.irreducible:
        try:
            st = oracle.stable_stationary(spec, N=N)
            detail = {"N": st.N, "residual": st.residual}
            ok = st.residual < 1e-8
            if spec.is_power:
                gf = oracle.stationary_gf_residual(spec, st.mu)
                detail["gf_residual"] = gf
                ok = ok and gf < 1e-6
            checks.append(Check("stationary_identity", bool(ok), detail))
        except oracle.TruncationUnstable as exc:
            checks.append(Check("stationary_identity", False, {"error": str(exc)}))
    else:
        checks.append(Check("stationary_identity", None, {"reason": "not known to be ergodic"}))

    big = max(N, 400)
    gq = generator.build(spec, "Q", big)
    ga = generator.build(spec, "Q_absorbed", big)
    i0 = min(5, big - 2)
    fr = oracle.forward_residual(gq, i0, 1.0, 1e-3)
    gfr = oracle.forward_gf_residual(ga, i0, 1.0)
    rr = oracle.resolvent_residual(ga, i0, 1.0)
    checks.append(Check("forward_equation_residuals", bool(max(fr, gfr, rr) < 1e-6),
                        {"scalar": fr, "generating_function": gfr, "resolvent": rr, "N": big}))

    a = simulator.simulate(spec, 1, 10.0, jump_cap=10**5, seed=seed, replica=0).to_csv()
    b = simulator.simulate(spec, 1, 10.0, jump_cap=10**5, seed=seed, replica=0).to_csv()
    checks.append(Check("determinism", a == b, {}))

    pvals = {i: chi_square_jumps(spec, i, seed=seed) for i in (1, 5, 20)}
    checks.append(Check("jump_law_chi_square", bool(min(pvals.values()) > 1e-3), pvals))
    return CrosscheckResult(checks)
