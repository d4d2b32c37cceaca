import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchimm import generator
from branchimm.model import ModelSpec

from conftest import rich_spec, subcritical


def _row_sums_vanish(gen):
    m = gen.matrix
    sums = np.asarray(m.sum(axis=1)).ravel()
    scale = np.maximum(np.abs(gen.diagonal), 1.0)
    return np.all(np.abs(sums) <= 1e-12 * scale)


class TestBuild:
    def test_entries_of_q(self):
        s = ModelSpec.build([0.25, 0, 0.5, 0.25], {1: 0.5, 2: 0.5}, 2.0, theta=2.0)
        g = generator.build(s, "Q", 20)
        # r_3 = 9; down 9/4, up by 1: 9/2 + 1, up by 2: 9/4 + 1
        assert g.row(3) == pytest.approx({2: 2.25, 3: -11.0, 4: 5.5, 5: 3.25})
        assert g.row(0) == pytest.approx({0: -2.0, 1: 1.0, 2: 1.0})

    def test_pure_branching_and_resurrection(self, sub):
        assert generator.build(sub, "R", 10).row(0) == {}
        rho = generator.build(sub, "rho", 10)
        assert rho.row(0) == pytest.approx({0: -1.0, 1: 1.0})
        assert rho.row(2) == pytest.approx({1: 1.5, 2: -2.0, 3: 0.5})

    def test_absorbed_zeroes_row_zero(self, sub):
        g = generator.build(sub, "Q_absorbed", 10)
        assert g.row(0) == {}
        assert g.entry(2, 1) == 1.5

    def test_birth_death_rates(self):
        s = ModelSpec.build([0.25, 0, 0.5, 0.25], {1: 0.5, 2: 0.5}, 1.0)
        g = generator.build(s, "Q_birthdeath", 10)
        # d_3 = 3 * (M + b_0 - 1) + gamma m = 3 + 1.5, c_3 = 0.75
        assert g.row(3) == pytest.approx({2: 0.75, 3: -5.25, 4: 4.5})

    def test_reflect_folds_overflow(self, sub):
        g = generator.build(sub, "Q", 5)
        assert g.row(4) == pytest.approx({3: 3.0, 4: -3.0})
        assert _row_sums_vanish(g)

    def test_absorb_adds_cemetery(self, sub):
        g = generator.build(sub, "Q", 5, "absorb_at_N")
        assert g.size == 6
        assert g.row(4)[5] == pytest.approx(2.0)
        assert g.row(5) == {}

    @pytest.mark.parametrize("bad", [dict(kind="X"), dict(boundary="wrap"), dict(N=1)])
    def test_errors(self, sub, bad):
        with pytest.raises(ValueError):
            generator.build(sub, **bad)

    @settings(max_examples=25, deadline=None)
    @given(kind=st.sampled_from(generator.KINDS), boundary=st.sampled_from(generator.BOUNDARIES),
           theta=st.sampled_from([0.5, 1.0, 2.0]), N=st.integers(2, 40))
    def test_rows_sum_to_zero(self, kind, boundary, theta, N):
        rich = rich_spec()
        s = ModelSpec(rich.offspring, rich.immigration, rich.gamma, type(rich.rate).power(1.3, theta))
        g = generator.build(s, kind, N, boundary)
        assert _row_sums_vanish(g)
        off = g.matrix.copy()
        off.setdiag(0)
        assert off.min() >= 0


class TestExport:
    def test_triplets_sorted_and_plain(self):
        g = generator.build(subcritical(), "Q", 3)
        lines = g.to_triplets().splitlines()
        assert lines[0] == "0 0 -1.0"
        keys = [tuple(map(int, ln.split()[:2])) for ln in lines]
        assert keys == sorted(keys)
        assert "np." not in g.to_triplets()

    def test_write(self, tmp_path, sub):
        g = generator.build(sub, "Q", 4)
        p = tmp_path / "q.txt"
        g.write_triplets(p)
        assert p.read_text() == g.to_triplets()


class TestEmbedded:
    def test_rows_are_distributions(self, rich):
        P = generator.embedded(generator.build(rich, "Q", 30))
        sums = np.asarray(P.matrix.sum(axis=1)).ravel()
        assert np.allclose(sums, 1.0, atol=1e-14)

    def test_absorbing_row_is_identity(self, sub):
        P = generator.embedded(generator.build(sub, "Q_absorbed", 10))
        assert P.row(0) == {0: 1.0}
        assert P.row(4) == pytest.approx({3: 0.6, 5: 0.4})
