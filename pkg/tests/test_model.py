import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchimm.model import (
    ModelError,
    ModelSpec,
    Pmf,
    RateFunction,
    gen_fns,
    smallest_fixed_point,
    upward_mean,
)


def pmfs(min_len=1, max_len=6):
    def normalize(ws):
        total = math.fsum(ws)
        return [w / total for w in ws]

    return st.lists(st.floats(0.01, 1.0), min_size=min_len, max_size=max_len).map(normalize)


def offspring_laws():
    # b_1 = 0 enforced by inserting a zero at index 1
    return pmfs(2, 6).map(lambda p: [p[0], 0.0] + p[1:])


class TestPmf:
    def test_rejects_bad_sum(self):
        with pytest.raises(ModelError, match="sums to"):
            Pmf((0.5, 0.4))

    def test_rejects_negative(self):
        with pytest.raises(ModelError, match="outside"):
            Pmf((1.2, -0.2))

    def test_from_mapping_and_tail(self):
        p = Pmf.from_mapping({1: 0.25, 3: 0.75})
        assert p.probs == (0.0, 0.25, 0.0, 0.75)
        assert p[10] == 0.0
        assert p.support == (1, 3)
        assert p.mean == pytest.approx(2.5)

    @given(pmfs())
    def test_taylor_at_one_matches_pgf(self, probs):
        p = Pmf(tuple(probs))
        t = np.linspace(0, 1, 7)
        lhs = np.polynomial.polynomial.polyval(t, p.taylor_at_one())
        assert np.allclose(lhs, p.pgf(1 - t), atol=1e-12)


class TestRateFunction:
    def test_power_values(self):
        r = RateFunction.power(2.0, 1.5)
        assert r(0) == 0.0
        assert r(4) == pytest.approx(16.0)

    def test_table_extension(self):
        r = RateFunction.table([0, 1, 3], tail_exponent=2.0)
        assert r(2) == 3.0
        assert r(4) == pytest.approx(3.0 * 4.0)
        assert r.inverse_sum_finite
        assert not RateFunction.table([0, 1, 3]).unbounded

    def test_table_needs_zero_at_zero(self):
        with pytest.raises(ModelError, match="r\\(0\\)"):
            RateFunction.table([1, 2])

    def test_linear_bounds(self):
        assert RateFunction.power(3.0, 1.0).linear_bounds(10) == (3.0, 3.0)
        lo, hi = RateFunction.power(1.0, 2.0).linear_bounds(10)
        assert lo == 11.0 and hi == math.inf
        lo, hi = RateFunction.table([0, 5, 4, 6]).linear_bounds(0)
        assert lo == 0.0 and hi == 5.0


class TestModelSpec:
    def test_b1_convention(self):
        with pytest.raises(ModelError, match="b_1 = 0"):
            ModelSpec.build([0.5, 0.2, 0.3])

    def test_a0_convention(self):
        with pytest.raises(ModelError, match="a_0 = 0"):
            ModelSpec.build([0.5, 0, 0.5], [0.5, 0.5], 1.0)

    def test_negative_gamma(self):
        with pytest.raises(ModelError, match="gamma"):
            ModelSpec.build([0.5, 0, 0.5], {1: 1.0}, -1.0)

    def test_means(self):
        s = ModelSpec.build([0.25, 0, 0.5, 0.25], {1: 0.5, 2: 0.5}, 1.0)
        assert s.M == pytest.approx(1.75)
        assert s.m == pytest.approx(1.5)
        assert upward_mean(s) == pytest.approx(s.M + 0.25 - 1)

    def test_json_round_trip(self, rich):
        again = ModelSpec.from_json(rich.to_json())
        assert again == rich
        table = ModelSpec.build([0.5, 0, 0.5], rate=RateFunction.table([0, 1, 4], 2.0))
        assert ModelSpec.from_dict(json.loads(table.to_json())) == table

    def test_unknown_keys_rejected(self, sub):
        d = sub.to_dict()
        d["extra"] = 1
        with pytest.raises(ModelError, match="unknown model keys"):
            ModelSpec.from_dict(d)
        d = sub.to_dict()
        d["rate"]["beta"] = 2
        with pytest.raises(ModelError, match="unknown rate keys"):
            ModelSpec.from_dict(d)

    def test_invalid_json(self):
        with pytest.raises(ModelError, match="not valid JSON"):
            ModelSpec.from_json("{")

    def test_irreducible(self, sub):
        assert sub.irreducible
        assert not ModelSpec.build([0.75, 0, 0.25]).irreducible


class TestGeneratingFunctions:
    def test_values_at_half(self):
        s = ModelSpec.build([0.25, 0, 0.75], {1: 1.0}, 0.5)
        g = gen_fns(s, 0.5)
        assert g.G == pytest.approx(0.4375)
        assert g.B == pytest.approx(-0.0625)
        assert g.F == 0.5 and g.A == 0.25

    def test_domain(self, sub):
        with pytest.raises(ValueError):
            gen_fns(sub, 1.5)

    def test_endpoints(self, rich):
        g = gen_fns(rich, np.array([0.0, 1.0]))
        assert g.B[1] == 0.0 and g.A[1] == 0.0
        assert g.B[0] == pytest.approx(0.3)

    def test_fixed_point_closed_form(self):
        # 3/4 q^2 - q + 1/4 = 0 has roots 1/3 and 1
        s = ModelSpec.build([0.25, 0, 0.75])
        assert smallest_fixed_point(s) == pytest.approx(1 / 3, abs=1e-12)

    def test_fixed_point_subcritical_and_no_death(self, sub):
        assert smallest_fixed_point(sub) == 1.0
        assert smallest_fixed_point(ModelSpec.build([0, 0, 1.0])) == 0.0

    @settings(max_examples=50)
    @given(offspring_laws())
    def test_fixed_point_is_root(self, probs):
        s = ModelSpec.build(probs)
        q = smallest_fixed_point(s)
        assert 0.0 <= q <= 1.0
        assert abs(s.offspring.pgf(q) - q) < 1e-9
        if s.M > 1 + 1e-9:
            assert q < 1.0
