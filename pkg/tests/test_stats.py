import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from actirhythm import errors
from actirhythm.ingest import GroupLabel
from actirhythm.stats import (
    CIRCADIAN_ORDER,
    FEATURE_ORDER,
    GroupSamples,
    chi_square_sf,
    comparison_rows,
    kruskal_wallis,
    median_iqr,
    pairwise_dunn,
    pairwise_ranksum,
    ranks_with_ties,
)
from reference_impls import brute_kruskal_h

ICU = GroupLabel.CONTROL_ICU
CCI = GroupLabel.CCI
RR = GroupLabel.RR
HEALTHY = GroupLabel.CONTROL_HEALTHY


def samples(*pairs):
    return GroupSamples.from_lists(list(pairs))


class TestRanks:
    @pytest.mark.parametrize("values,expected", [
        ([10, 20, 30], [1, 2, 3]),
        ([5, 5], [1.5, 1.5]),
        ([1, 2, 2, 3], [1, 2.5, 2.5, 4]),
        ([3, 1, 2], [3, 1, 2]),
    ])
    def test_values(self, values, expected):
        assert np.array_equal(ranks_with_ties(values), expected)

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=200))
    def test_ranks_sum(self, values):
        n = len(values)
        assert ranks_with_ties(values).sum() == pytest.approx(n * (n + 1) / 2)


class TestKruskalWallis:
    def test_hand_anchor(self):
        kw = kruskal_wallis(samples((CCI, [1, 2, 3]), (RR, [4, 5, 6])))
        assert kw.h == pytest.approx(3.8571, abs=1e-4)
        assert kw.p == pytest.approx(0.0495, abs=1e-3)
        assert kw.df == 1

    def test_identical_groups(self):
        kw = kruskal_wallis(samples((CCI, [2, 2, 2]), (RR, [2, 2, 2])))
        assert kw.h == 0.0
        assert kw.p == 1.0
        assert kw.degenerate

    def test_four_groups_df(self):
        kw = kruskal_wallis(samples((ICU, [1, 9, 3]), (CCI, [4, 2, 8, 1, 0]),
                                    (RR, [5, 5, 5, 2, 1, 9]),
                                    (HEALTHY, list(range(10)))))
        assert kw.df == 3

    @given(st.integers(0, 2 ** 32 - 1))
    def test_matches_rank_anova_identity(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        groups = [rng.integers(0, 12, size=rng.integers(1, 8)).astype(float).tolist()
                  for _ in range(k)]
        if sum(len(g) for g in groups) < 3 or all(
                v == groups[0][0] for g in groups for v in g):
            return
        kw = kruskal_wallis(samples(*[(CCI, g) for g in groups][:1],
                                    *[(RR, g) for g in groups][1:]))
        assert kw.h == pytest.approx(brute_kruskal_h(groups), abs=1e-12)

    def test_monotone_transform_invariance(self):
        base = kruskal_wallis(samples((CCI, [1, 5, 9]), (RR, [2, 2, 7]),
                                      (HEALTHY, [4, 8, 8, 10])))
        logged = kruskal_wallis(samples(
            (CCI, np.log([1, 5, 9])), (RR, np.log([2, 2, 7])),
            (HEALTHY, np.log([4, 8, 8, 10]))))
        assert logged.h == base.h
        assert logged.p == base.p

    def test_relabeling_invariance(self):
        a = kruskal_wallis(samples((CCI, [1, 2]), (RR, [3, 4]), (ICU, [5, 6])))
        b = kruskal_wallis(samples((RR, [3, 4]), (ICU, [5, 6]), (CCI, [1, 2])))
        assert a.h == pytest.approx(b.h, abs=1e-12)

    def test_two_groups_matches_z_squared(self, rng):
        # for 2 groups without ties H equals the squared rank-sum z score
        # (no continuity correction)
        x = rng.permutation(np.arange(1, 13, dtype=float))[:5]
        y = np.array(sorted(set(np.arange(1, 13.0)) - set(x)))
        kw = kruskal_wallis(samples((CCI, x), (RR, y)))
        n1, n2 = len(x), len(y)
        n = n1 + n2
        r1 = ranks_with_ties(np.concatenate([x, y]))[:n1].sum()
        u1 = n1 * n2 + n1 * (n1 + 1) / 2 - r1
        z = (u1 - n1 * n2 / 2) / math.sqrt(n1 * n2 * (n + 1) / 12.0)
        assert kw.h == pytest.approx(z * z, abs=1e-9)


class TestChiSquare:
    def test_zero_is_one(self):
        for df in range(1, 10):
            assert chi_square_sf(0.0, df) == 1.0

    def test_df2_closed_form(self):
        for x in np.linspace(0.0, 50.0, 501):
            assert chi_square_sf(float(x), 2) == pytest.approx(
                math.exp(-x / 2), abs=1e-12)

    def test_df2_half_point(self):
        assert chi_square_sf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-12)

    def test_df3_table_value(self):
        assert chi_square_sf(7.8147, 3) == pytest.approx(0.05, abs=1e-4)

    def test_df1_matches_erfc(self):
        for x in [0.01, 0.5, 1, 3.8415, 10, 50, 120]:
            expected = math.erfc(math.sqrt(x / 2))
            assert chi_square_sf(x, 1) == pytest.approx(expected, rel=1e-10)

    @given(st.integers(1, 20), st.floats(0, 200), st.floats(0.01, 10))
    def test_monotone_non_increasing(self, df, x, dx):
        assert chi_square_sf(x + dx, df) <= chi_square_sf(x, df) + 1e-15


class TestPairwise:
    def test_hand_anchor(self):
        flags = pairwise_ranksum(samples((CCI, [1, 2, 3]), (RR, [4, 5, 6])))
        pair = flags.get(CCI, RR)
        assert pair.p == pytest.approx(0.0809, abs=1e-3)
        assert pair.threshold == 0.05
        assert not pair.significant

    def test_identical_groups_not_significant(self):
        flags = pairwise_ranksum(samples((CCI, [3, 3, 3]), (RR, [3, 3, 3])))
        assert flags.get(CCI, RR).p == 1.0

    def test_symmetry_in_pair_order(self):
        a = pairwise_ranksum(samples((CCI, [1, 5, 2]), (RR, [9, 3, 4])))
        b = pairwise_ranksum(samples((RR, [9, 3, 4]), (CCI, [1, 5, 2])))
        assert a.get(CCI, RR).p == pytest.approx(b.get(RR, CCI).p, abs=1e-12)

    def test_healthy_pairs_use_strict_threshold(self):
        flags = pairwise_ranksum(samples(
            (ICU, [1.0, 2.0]), (HEALTHY, [50.0, 60.0, 70.0])))
        assert flags.get(ICU, HEALTHY).threshold == 0.01

    def test_exact_small_case(self):
        # [1,2] vs [3,4]: U=0; one-tail P(U<=0)=1/6, two-sided 1/3
        flags = pairwise_ranksum(samples((CCI, [1, 2]), (RR, [3, 4])), exact=True)
        assert flags.get(CCI, RR).p == pytest.approx(1 / 3, abs=1e-12)

    def test_exact_agrees_with_normal_direction(self, rng):
        x = rng.normal(0, 1, 6)
        y = rng.normal(3, 1, 7)
        approx = pairwise_ranksum(samples((CCI, x), (RR, y))).get(CCI, RR).p
        exact = pairwise_ranksum(samples((CCI, x), (RR, y)), exact=True).get(CCI, RR).p
        assert (approx < 0.05) == (exact < 0.05)

    def test_dunn_separated_groups(self):
        flags = pairwise_dunn(samples((CCI, [1, 2, 3, 4, 5]),
                                      (RR, [10, 11, 12, 13, 14]),
                                      (ICU, [1.5, 2.5, 3.5, 4.5, 5.5])))
        assert flags.get(CCI, RR).p < 0.05
        assert flags.get(CCI, ICU).p > 0.5

    @given(st.integers(0, 2 ** 32 - 1))
    def test_p_values_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 6, size=rng.integers(1, 9)).astype(float)
        y = rng.integers(0, 6, size=rng.integers(1, 9)).astype(float)
        for flags in (pairwise_ranksum(samples((CCI, x), (RR, y))),
                      pairwise_dunn(samples((CCI, x), (RR, y)))):
            p = flags.get(CCI, RR).p
            assert 0.0 <= p <= 1.0


class TestMedianIqr:
    @pytest.mark.parametrize("values,expected", [
        ([1, 2, 3, 4, 5], (3.0, 2.0, 4.0)),
        ([7], (7.0, 7.0, 7.0)),
        ([1, 2, 3, 4], (2.5, 1.75, 3.25)),
    ])
    def test_values(self, values, expected):
        assert median_iqr(values) == pytest.approx(expected)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_ordering(self, values):
        med, q25, q75 = median_iqr(values)
        assert q25 <= med <= q75


class TestComparisonRows:
    def _cohort(self, amp_factor=10.0, rng=None):
        rng = rng or np.random.default_rng(7)
        sizes = {ICU: 3, CCI: 5, RR: 6, HEALTHY: 10}
        values = {}
        groups = {}
        i = 0
        for label, n in sizes.items():
            for _ in range(n):
                sid = f"s{i:02d}"
                amp = rng.uniform(1, 2)
                if label is HEALTHY:
                    amp *= amp_factor
                values[sid] = {"amplitude": amp, "min": rng.uniform(0, 1)}
                groups[sid] = label
                i += 1
        return values, groups

    def test_separated_amplitude_flagged(self):
        values, groups = self._cohort()
        rows = comparison_rows(values, groups, ["amplitude", "min"])
        amp_row = rows[0]
        assert amp_row.kw.p < 0.01
        healthy_cell = [c for c in amp_row.cells if c.label is HEALTHY][0]
        # with n=3 vs n=10 the normal-approximation two-sided p bottoms out
        # at 0.0143, so the strict 0.01 healthy threshold cannot flag the
        # control_icu pair; the exact test can (2/286)
        assert set(healthy_cell.markers) == {"c", "d"}
        exact_rows = comparison_rows(values, groups, ["amplitude"], exact=True)
        exact_healthy = [c for c in exact_rows[0].cells if c.label is HEALTHY][0]
        assert set(exact_healthy.markers) == {"c", "d", "e"}
        min_row = rows[1]
        assert min_row.kw.p > 0.01

    def test_identical_cohort_all_p_one(self):
        values = {f"s{i}": {"x": 5.0} for i in range(8)}
        groups = {f"s{i}": (CCI if i < 4 else RR) for i in range(8)}
        rows = comparison_rows(values, groups, ["x"])
        assert rows[0].kw.p == 1.0
        assert rows[0].cells[0].markers == ""

    def test_requires_two_groups(self):
        values = {"a": {"x": 1.0}, "b": {"x": 2.0}}
        groups = {"a": CCI, "b": CCI}
        with pytest.raises(errors.InsufficientData):
            comparison_rows(values, groups, ["x"])

    def test_nan_values_dropped(self):
        values = {"a": {"x": 1.0}, "b": {"x": float("nan")}, "c": {"x": 2.0},
                  "d": {"x": 3.0}}
        groups = {"a": CCI, "b": CCI, "c": RR, "d": RR}
        rows = comparison_rows(values, groups, ["x"])
        cci_cell = rows[0].cells[0]
        assert cci_cell.n == 1

    def test_feature_row_order_is_fixed(self):
        assert len(FEATURE_ORDER) == 10
        assert len(CIRCADIAN_ORDER) == 5
        assert CIRCADIAN_ORDER == ("min", "amplitude", "phase", "alpha", "beta")
