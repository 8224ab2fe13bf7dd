import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catci.citest import (
    ChiSquaredDist,
    batch_screen,
    chi2_statistic,
    ci_test,
    dof,
    dof_adjusted,
    g2_statistic,
    log_sf_chisq,
)
from catci.core import CategoricalColumn, DataError, Dataset, SpecError, TestSpec
from catci.tabulate import build_table, expected_ci, slice_marginals, table_from_counts

from conftest import make_dataset, permute_column_levels
from oracles import log_sf_quadrature

# Frozen by hand: 2*(40*ln(20/25) + 60*ln(30/25)) for the table [[20,30],[30,20]]
G2_CROSSED = 4.027102710137775
LN_05 = -2.995732273553991
# Frozen from the adaptive-quadrature oracle at 50 digits
LOG_SF_3_8415_DOF1 = -2.9957568324311123


class TestG2Statistic:
    def test_equal_counts_give_zero(self):
        t = table_from_counts(np.full((2, 2), 10))
        assert g2_statistic(t, np.full(4, 10.0)) == 0.0

    def test_crossed_table(self):
        t = table_from_counts(np.array([[20, 30], [30, 20]]))
        assert g2_statistic(t, np.full(4, 25.0)) == pytest.approx(G2_CROSSED, abs=1e-12)
        assert g2_statistic(t, np.full(4, 25.0)) == pytest.approx(4.0272, abs=1e-3)

    def test_own_counts_as_expected(self, rng):
        arr = rng.integers(0, 30, size=(3, 4))
        t = table_from_counts(arr)
        assert g2_statistic(t, arr.astype(float)) == 0.0

    def test_shape_mismatch(self):
        t = table_from_counts(np.full((2, 2), 5))
        with pytest.raises(ValueError, match="cells"):
            g2_statistic(t, np.ones(5))

    def test_zero_expected_at_occupied_cell(self):
        t = table_from_counts(np.array([[1, 0], [0, 0]]))
        with pytest.raises(ValueError, match="zero expected"):
            g2_statistic(t, np.zeros(4))

    def test_accepts_plain_arrays(self):
        obs = np.array([[20, 30], [30, 20]])
        assert g2_statistic(obs, np.full((2, 2), 25.0)) == pytest.approx(G2_CROSSED, abs=1e-12)


class TestChi2Statistic:
    def test_crossed_table(self):
        t = table_from_counts(np.array([[20, 30], [30, 20]]))
        assert chi2_statistic(t, np.full(4, 25.0)) == pytest.approx(4.0, abs=1e-12)

    def test_identity(self, rng):
        arr = rng.integers(1, 30, size=(3, 4))
        assert chi2_statistic(table_from_counts(arr), arr.astype(float)) == 0.0

    def test_empty_slice_contributes_zero(self):
        arr = np.zeros((2, 2, 2), dtype=int)
        arr[:, :, 0] = [[20, 30], [30, 20]]
        t = table_from_counts(arr)
        e = expected_ci(slice_marginals(t))
        full = chi2_statistic(t, e)
        only_occupied = chi2_statistic(
            table_from_counts(arr[:, :, 0]),
            expected_ci(slice_marginals(table_from_counts(arr[:, :, 0]))),
        )
        assert full == pytest.approx(only_occupied, rel=1e-12)

    def test_zero_expected_at_occupied_cell(self):
        with pytest.raises(ValueError, match="zero expected"):
            chi2_statistic(np.array([1, 2]), np.array([0.0, 3.0]))


class TestDof:
    def test_benchmark_scenario_values(self):
        assert dof(3, 4, (2,)) == 12
        assert dof(3, 4, (2, 4)) == 48
        assert dof(3, 4, (2, 4, 4)) == 192

    def test_empty_cs(self):
        assert dof(3, 4) == 6
        assert dof(3, 4, ()) == 6

    def test_single_level_variable(self):
        assert dof(1, 4, (2,)) == 0

    def test_invalid_levels(self):
        with pytest.raises(ValueError):
            dof(0, 2)
        with pytest.raises(ValueError):
            dof(2, 2, (0,))


class TestDofAdjusted:
    def test_no_empty_strata_equals_nominal(self, rng):
        data = make_dataset(rng, 2000, (3, 4, 2))
        m = slice_marginals(build_table(data, (0, 1, 2)))
        assert dof_adjusted(3, 4, m) == dof(3, 4, (2,))

    def test_single_occupied_stratum(self):
        arr = np.zeros((3, 4, 5), dtype=int)
        arr[:, :, 2] = 1
        m = slice_marginals(table_from_counts(arr))
        assert dof_adjusted(3, 4, m) == 6

    @given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
    def test_occupancy_count_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        data = make_dataset(rng, n, (3, 4, 3, 4))
        t = build_table(data, (0, 1, 2, 3))
        m = slice_marginals(t)
        arr = t.as_array()
        occupied = sum(
            1
            for z in itertools.product(range(3), range(4))
            if arr[(slice(None), slice(None)) + z].sum() > 0
        )
        assert dof_adjusted(3, 4, m) == 2 * 3 * occupied


class TestLogSfChisq:
    def test_zero_stat(self):
        assert log_sf_chisq(0.0, 5) == 0.0

    def test_dof2_closed_form(self):
        for stat in (1e-8, 0.5, 2.0, 4.0, 10.0, 100.0, 1376.0):
            assert log_sf_chisq(stat, 2) == pytest.approx(-stat / 2, abs=1e-12)

    def test_known_quantile(self):
        got = log_sf_chisq(3.8415, 1)
        assert got == pytest.approx(LN_05, abs=1e-4)
        assert got == pytest.approx(LOG_SF_3_8415_DOF1, abs=1e-12)

    def test_against_quadrature_spot(self):
        for stat, d in [(7.3, 5), (55.0, 48), (250.0, 192), (0.02, 1)]:
            assert log_sf_chisq(stat, d) == pytest.approx(
                log_sf_quadrature(stat, d), abs=1e-11
            )

    def test_dof_zero_is_error(self):
        with pytest.raises(ValueError, match="dof"):
            log_sf_chisq(1.0, 0)

    def test_negative_stat_is_error(self):
        with pytest.raises(ValueError):
            log_sf_chisq(-0.5, 3)

    def test_infinite_stat(self):
        assert log_sf_chisq(math.inf, 3) == -math.inf

    def test_monotone_decreasing_in_stat(self):
        for d in (1, 2, 5, 12, 48, 192):
            values = [log_sf_chisq(s, d) for s in (0.1, 1.0, 5.0, 20.0, 100.0, 500.0, 1300.0)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_monotone_increasing_in_dof(self):
        for stat in (0.5, 10.0, 100.0):
            values = [log_sf_chisq(stat, d) for d in (1, 2, 5, 12, 48, 192)]
            assert all(a < b for a, b in zip(values, values[1:]))

    @given(
        stat=st.floats(1e-6, 1200.0),
        gap=st.floats(1e-3, 50.0),
        d=st.sampled_from([1, 2, 3, 7, 20, 100]),
    )
    def test_strictly_decreasing_property(self, stat, gap, d):
        assert log_sf_chisq(stat + gap, d) < log_sf_chisq(stat, d)


class TestChiSquaredDist:
    def test_delegates(self):
        assert ChiSquaredDist(2).log_sf(2.0) == log_sf_chisq(2.0, 2)

    def test_requires_positive_dof(self):
        with pytest.raises(ValueError):
            ChiSquaredDist(0)


def _perfectly_dependent_dataset(n_per_level=100):
    x = np.repeat(np.arange(3), n_per_level)
    cols = (
        CategoricalColumn("X", 3, x),
        CategoricalColumn("Y", 3, x.copy()),
    )
    return Dataset(n_rows=3 * n_per_level, columns=cols)


class TestCiTest:
    def test_perfect_dependence_unconditional(self):
        data = _perfectly_dependent_dataset(100)
        res = ci_test(data, TestSpec(0, 1))
        assert res.chi2 == pytest.approx(600.0, rel=1e-12)  # n * (|X| - 1)
        assert res.g2 == pytest.approx(2 * 300 * math.log(3), rel=1e-12)
        assert res.dof == 4
        assert res.empty_strata == 0
        assert not res.degenerate

    def test_paper_dof_configuration(self, rng):
        data = make_dataset(rng, 3000, (3, 4, 2, 4, 4))
        res = ci_test(data, TestSpec(0, 1, (2, 3, 4)))
        assert res.dof == 192

    def test_empty_dataset(self):
        cols = (
            CategoricalColumn("a", 2, np.array([], dtype=np.int64), labels=("0", "1")),
            CategoricalColumn("b", 2, np.array([], dtype=np.int64), labels=("0", "1")),
        )
        with pytest.raises(DataError, match="empty"):
            ci_test(Dataset(0, cols), TestSpec(0, 1))

    def test_invalid_spec(self, small_dataset):
        with pytest.raises(SpecError):
            ci_test(small_dataset, TestSpec(0, 0))

    def test_invalid_method(self, small_dataset):
        with pytest.raises(ValueError, match="method"):
            ci_test(small_dataset, TestSpec(0, 1), method="other")

    def test_degenerate_single_level(self):
        cols = (
            CategoricalColumn("c", 1, np.zeros(50, dtype=np.int64)),
            CategoricalColumn("y", 3, np.arange(50) % 3, labels=("0", "1", "2")),
        )
        res = ci_test(Dataset(50, cols), TestSpec(0, 1))
        assert res.degenerate
        assert res.g2 == res.chi2 == 0.0
        assert res.dof == 0 and res.dof_adjusted == 0
        assert res.log_p_g2 == 0.0 and res.log_p_chi2 == 0.0

    def test_single_level_conditioning_variable_is_legal(self, rng):
        data = make_dataset(rng, 500, (3, 4))
        constant = CategoricalColumn("const", 1, np.zeros(500, dtype=np.int64))
        widened = Dataset(500, data.columns + (constant,))
        plain = ci_test(data, TestSpec(0, 1))
        conditioned = ci_test(widened, TestSpec(0, 1, (2,)))
        assert conditioned.dof == plain.dof == 6  # the 1-level Z multiplies dof by 1
        assert conditioned.g2 == plain.g2
        assert conditioned.chi2 == plain.chi2
        assert not conditioned.degenerate

    def test_empty_strata_counted_and_adjusted(self):
        # Z has 4 levels but only 2 occur jointly with data rows
        z = np.array([0, 0, 1, 1, 0, 1] * 10)
        x = np.tile([0, 1], 30)
        y = np.tile([0, 1, 1], 20)
        cols = (
            CategoricalColumn("x", 2, x),
            CategoricalColumn("y", 2, y),
            CategoricalColumn("z", 4, z, labels=("a", "b", "c", "d")),
        )
        data = Dataset(60, cols)
        plain = ci_test(data, TestSpec(0, 1, (2,)))
        assert plain.empty_strata == 2
        assert plain.dof == 4
        assert plain.dof_adjusted == 2
        adjusted = ci_test(data, TestSpec(0, 1, (2,)), adjust_dof=True)
        assert adjusted.g2 == plain.g2
        assert adjusted.log_p_g2 == log_sf_chisq(plain.g2, 2)
        assert plain.log_p_g2 == log_sf_chisq(plain.g2, 4)

    @given(
        n=st.integers(30, 400),
        levels=st.tuples(st.integers(2, 4), st.integers(2, 4), st.integers(2, 3)),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_method_equivalence(self, n, levels, seed):
        data = make_dataset(np.random.default_rng(seed), n, levels)
        spec = TestSpec(0, 1, (2,))
        closed = ci_test(data, spec)
        ipf = ci_test(data, spec, method="ipf")
        assert ipf.method == "ipf"
        assert ipf.g2 == pytest.approx(closed.g2, rel=1e-8, abs=1e-12)
        assert ipf.chi2 == pytest.approx(closed.chi2, rel=1e-8, abs=1e-12)
        assert ipf.dof == closed.dof

    @given(seed=st.integers(0, 2**32 - 1))
    def test_relabeling_invariance_exact(self, seed):
        rng = np.random.default_rng(seed)
        data = make_dataset(rng, 300, (3, 4, 2, 3))
        spec = TestSpec(0, 1, (2, 3))
        base = ci_test(data, spec)
        for index in range(4):
            perm = rng.permutation(data.columns[index].levels)
            moved = ci_test(permute_column_levels(data, index, perm), spec)
            assert moved.g2 == base.g2
            assert moved.chi2 == base.chi2
            assert moved.dof == base.dof
            assert moved.log_p_g2 == base.log_p_g2
            assert moved.log_p_chi2 == base.log_p_chi2

    @given(
        n=st.integers(20, 300),
        levels=st.tuples(st.integers(2, 3), st.integers(2, 4), st.integers(2, 3), st.integers(2, 2)),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_slice_additivity(self, n, levels, seed):
        data = make_dataset(np.random.default_rng(seed), n, levels)
        t = build_table(data, (0, 1, 2, 3))
        joint = ci_test(data, TestSpec(0, 1, (2, 3)))
        arr = t.as_array()
        g2_sum = chi2_sum = 0.0
        for z in itertools.product(range(levels[2]), range(levels[3])):
            cell = arr[(slice(None), slice(None)) + z]
            if cell.sum() == 0:
                continue
            sub = table_from_counts(cell)
            e = expected_ci(slice_marginals(sub))
            g2_sum += g2_statistic(sub, e)
            chi2_sum += chi2_statistic(sub, e)
        assert joint.g2 == pytest.approx(g2_sum, rel=1e-9, abs=1e-9)
        assert joint.chi2 == pytest.approx(chi2_sum, rel=1e-9, abs=1e-9)

    def test_sparse_storage_path_agrees(self, rng, monkeypatch):
        data = make_dataset(rng, 800, (3, 4, 2, 4))
        spec = TestSpec(0, 1, (2, 3))
        dense_result = ci_test(data, spec)
        monkeypatch.setattr("catci.core.DENSE_CELL_LIMIT", 1)
        sparse_result = ci_test(data, spec)
        assert sparse_result.g2 == pytest.approx(dense_result.g2, rel=1e-10)
        assert sparse_result.chi2 == pytest.approx(dense_result.chi2, rel=1e-10)
        assert sparse_result.dof == dense_result.dof
        assert sparse_result.empty_strata == dense_result.empty_strata

    def test_sparse_storage_rejects_ipf(self, rng, monkeypatch):
        data = make_dataset(rng, 100, (3, 4, 2))
        monkeypatch.setattr("catci.core.DENSE_CELL_LIMIT", 1)
        with pytest.raises(DataError, match="dense"):
            ci_test(data, TestSpec(0, 1, (2,)), method="ipf")


class TestBatchScreen:
    def test_singleton_equals_ci_test(self, small_dataset):
        spec = TestSpec(0, 1, (2,))
        assert batch_screen(small_dataset, [spec]) == [ci_test(small_dataset, spec)]

    def test_worker_counts_agree(self, rng):
        data = make_dataset(rng, 400, (3,) * 6)
        pairs = [TestSpec(i, j) for i, j in itertools.combinations(range(6), 2)]
        serial = batch_screen(data, pairs, workers=1)
        pooled = batch_screen(data, pairs, workers=2)
        assert serial == pooled

    def test_matches_looped_ci_test(self, rng):
        data = make_dataset(rng, 350, (2, 3, 4, 2, 3, 2))
        pairs = [TestSpec(i, j, (5,)) for i, j in itertools.combinations(range(5), 2)]
        batch = batch_screen(data, pairs, workers=2)
        assert batch == [ci_test(data, s) for s in pairs]

    def test_first_invalid_spec_position(self, small_dataset):
        pairs = [TestSpec(0, 1), TestSpec(0, 0), TestSpec(1, 1)]
        with pytest.raises(SpecError, match="pair 1"):
            batch_screen(small_dataset, pairs)

    def test_options_forwarded(self, rng):
        data = make_dataset(rng, 200, (3, 3, 2))
        pairs = [TestSpec(0, 1, (2,))]
        res = batch_screen(data, pairs, workers=1, method="ipf", adjust_dof=True)
        assert res[0] == ci_test(data, pairs[0], method="ipf", adjust_dof=True)


class TestZeroExpectedUnreachable:
    """N > 0 forces E > 0 under conditional-independence expectations."""

    @given(n=st.integers(1, 120), seed=st.integers(0, 2**32 - 1))
    def test_expected_positive_wherever_observed(self, n, seed):
        data = make_dataset(np.random.default_rng(seed), n, (3, 4, 2, 2))
        t = build_table(data, (0, 1, 2, 3))
        e = expected_ci(slice_marginals(t))
        obs = t.dense
        assert np.all(e[obs > 0] > 0)
        # and the statistic call therefore never raises
        g2_statistic(t, e)
