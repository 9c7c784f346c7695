"""Rank-based group comparison.

Kruskal-Wallis H with tie correction and chi-square p-values, pairwise
two-sided Mann-Whitney U (normal approximation with tie-corrected variance
and continuity correction, optional exact enumeration, optional Dunn z
tests), and median/IQR summaries.

Significance markers follow a fixed letter scheme: a group's cell is
flagged with the letter of every group it differs from, at p < 0.01 for
pairs involving the healthy controls and p < 0.05 otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cosinor import SigmoidalCosinorFit
from .errors import InsufficientData
from .features import ActivityFeatures
from .ingest import GROUP_ORDER, GroupLabel

FEATURE_ORDER = ActivityFeatures.FIELDS
CIRCADIAN_ORDER = ("min", "amplitude", "phase", "alpha", "beta")

MARKER_LETTERS = {
    GroupLabel.CONTROL_HEALTHY: "b",
    GroupLabel.CCI: "c",
    GroupLabel.RR: "d",
    GroupLabel.CONTROL_ICU: "e",
}

STRICT_ALPHA = 0.01   # pairs involving the healthy control group
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class GroupSamples:
    """Ordered (label, values) pairs, one value per subject."""

    groups: tuple[tuple[GroupLabel, np.ndarray], ...]

    @classmethod
    def from_lists(cls, pairs) -> "GroupSamples":
        return cls(tuple((label, np.asarray(vals, dtype=float))
                         for label, vals in pairs))


@dataclass(frozen=True)
class KwResult:
    h: float
    df: int
    p: float
    tie_corrected: bool
    degenerate: bool = False   # all pooled values identical


@dataclass(frozen=True)
class PairResult:
    a: GroupLabel
    b: GroupLabel
    p: float
    threshold: float
    significant: bool


@dataclass(frozen=True)
class PairwiseFlags:
    pairs: tuple[PairResult, ...]

    def get(self, a: GroupLabel, b: GroupLabel) -> PairResult:
        for pair in self.pairs:
            if {pair.a, pair.b} == {a, b}:
                return pair
        raise KeyError((a, b))


@dataclass(frozen=True)
class GroupCell:
    label: GroupLabel
    n: int
    median: float
    q25: float
    q75: float
    markers: str


@dataclass(frozen=True)
class GroupComparisonRow:
    feature: str
    cells: tuple[GroupCell, ...]
    kw: KwResult
    pairwise: PairwiseFlags


def ranks_with_ties(values) -> np.ndarray:
    """Mid-ranks: tied values get the mean of the ranks they span."""
    values = np.asarray(values, dtype=float)
    n = values.size
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=float)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        # i..j (0-based) share ranks i+1..j+1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_term(values: np.ndarray) -> float:
    """sum(t^3 - t) over groups of tied values."""
    _, counts = np.unique(values, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail chi-square probability, Q(df/2, x/2)."""
    if x < 0:
        raise ValueError("x must be >= 0")
    if df < 1:
        raise ValueError("df must be >= 1")
    return _regularized_gamma_q(df / 2.0, x / 2.0)


def _regularized_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by series / continued
    fraction (switching at x = a + 1)."""
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(500):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def kruskal_wallis(samples: GroupSamples) -> KwResult:
    """H = [12/(N(N+1)) * sum R_g^2/n_g] - 3(N+1), divided by the tie
    correction 1 - sum(t^3 - t)/(N^3 - N); p from chi-square with
    df = groups - 1."""
    groups = samples.groups
    if len(groups) < 2 or any(v.size < 1 for _, v in groups):
        raise InsufficientData("need >= 2 groups with >= 1 value each")
    pooled = np.concatenate([v for _, v in groups])
    n_total = pooled.size
    if n_total < 3:
        raise InsufficientData("need at least 3 values in total")
    df = len(groups) - 1
    ranks = ranks_with_ties(pooled)
    h = 0.0
    offset = 0
    for _, v in groups:
        r_sum = float(ranks[offset:offset + v.size].sum())
        h += r_sum * r_sum / v.size
        offset += v.size
    h = 12.0 / (n_total * (n_total + 1.0)) * h - 3.0 * (n_total + 1.0)
    tie_term = _tie_term(pooled)
    correction = 1.0 - tie_term / (n_total ** 3 - n_total)
    if correction == 0.0:
        return KwResult(h=0.0, df=df, p=1.0, tie_corrected=True, degenerate=True)
    h = max(h / correction, 0.0)
    return KwResult(h=h, df=df, p=chi_square_sf(h, df),
                    tie_corrected=tie_term > 0)


def _mwu_normal_p(x: np.ndarray, y: np.ndarray) -> float:
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    n = n1 + n2
    ranks = ranks_with_ties(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u2 = n1 * n2 - u1
    var = n1 * n2 / 12.0 * ((n + 1.0) - _tie_term(pooled) / (n * (n - 1.0)))
    if var <= 0:
        return 1.0
    z = (max(u1, u2) - n1 * n2 / 2.0 - 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * _normal_sf(max(z, 0.0)))


def _mwu_exact_p(x: np.ndarray, y: np.ndarray) -> float:
    """Exact two-sided p by enumerating group assignments (ties kept)."""
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = ranks_with_ties(pooled)
    base = n1 * (n1 + 1) / 2.0
    u_obs = n1 * n2 + base - float(ranks[:n1].sum())
    n_le = n_ge = total = 0
    for combo in itertools.combinations(range(n1 + n2), n1):
        u = n1 * n2 + base - sum(ranks[i] for i in combo)
        total += 1
        if u <= u_obs:
            n_le += 1
        if u >= u_obs:
            n_ge += 1
    return min(1.0, 2.0 * min(n_le, n_ge) / total)


def pairwise_ranksum(samples: GroupSamples, exact: bool = False) -> PairwiseFlags:
    """Two-sided Mann-Whitney U for every group pair. ``exact`` enumerates
    the permutation distribution when both groups have n <= 12."""
    results = []
    for (la, va), (lb, vb) in itertools.combinations(samples.groups, 2):
        if exact and va.size <= 12 and vb.size <= 12:
            p = _mwu_exact_p(va, vb)
        else:
            p = _mwu_normal_p(va, vb)
        threshold = STRICT_ALPHA if GroupLabel.CONTROL_HEALTHY in (la, lb) \
            else DEFAULT_ALPHA
        results.append(PairResult(a=la, b=lb, p=p, threshold=threshold,
                                  significant=p < threshold))
    return PairwiseFlags(pairs=tuple(results))


def pairwise_dunn(samples: GroupSamples) -> PairwiseFlags:
    """Dunn z tests on the pooled Kruskal-Wallis ranks (unadjusted p)."""
    labels = [label for label, _ in samples.groups]
    sizes = [v.size for _, v in samples.groups]
    pooled = np.concatenate([v for _, v in samples.groups])
    n = pooled.size
    ranks = ranks_with_ties(pooled)
    means = []
    offset = 0
    for size in sizes:
        means.append(float(ranks[offset:offset + size].mean()))
        offset += size
    spread = n * (n + 1.0) / 12.0 - _tie_term(pooled) / (12.0 * (n - 1.0))
    results = []
    for i, j in itertools.combinations(range(len(labels)), 2):
        var = spread * (1.0 / sizes[i] + 1.0 / sizes[j])
        if var <= 0:
            p = 1.0
        else:
            z = abs(means[i] - means[j]) / math.sqrt(var)
            p = min(1.0, 2.0 * _normal_sf(z))
        threshold = STRICT_ALPHA if GroupLabel.CONTROL_HEALTHY in (labels[i], labels[j]) \
            else DEFAULT_ALPHA
        results.append(PairResult(a=labels[i], b=labels[j], p=p,
                                  threshold=threshold, significant=p < threshold))
    return PairwiseFlags(pairs=tuple(results))


def median_iqr(values) -> tuple[float, float, float]:
    """(median, q25, q75) with linear interpolation at 1 + (n-1)q."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("need at least one value")
    med, q25, q75 = np.quantile(values, [0.5, 0.25, 0.75])
    return float(med), float(q25), float(q75)


def comparison_rows(values: Mapping[str, Mapping[str, float]],
                    groups: Mapping[str, GroupLabel],
                    order: Sequence[str],
                    posthoc: str = "ranksum",
                    exact: bool = False) -> list[GroupComparisonRow]:
    """One comparison row per feature name in ``order``.

    ``values`` maps subject -> feature -> value; non-finite values are
    dropped per feature. Group columns follow the canonical order.
    """
    if posthoc not in ("ranksum", "dunn"):
        raise ValueError(f"unknown posthoc {posthoc!r}")
    present = [g for g in GROUP_ORDER if g in set(groups.values())]
    if len(present) < 2:
        raise InsufficientData("need subjects from at least 2 groups")
    subjects = sorted(values)
    rows = []
    for feature in order:
        per_group: dict[GroupLabel, list[float]] = {g: [] for g in present}
        for sid in subjects:
            v = values[sid].get(feature, float("nan"))
            if math.isfinite(v):
                per_group[groups[sid]].append(v)
        sampled = [(g, vals) for g, vals in per_group.items() if vals]
        samples = GroupSamples.from_lists(sampled)
        if len(sampled) >= 2 and sum(len(v) for _, v in sampled) >= 3:
            kw = kruskal_wallis(samples)
            flags = pairwise_dunn(samples) if posthoc == "dunn" \
                else pairwise_ranksum(samples, exact=exact)
        else:
            kw = KwResult(h=0.0, df=max(len(sampled) - 1, 0), p=1.0,
                          tie_corrected=False, degenerate=True)
            flags = PairwiseFlags(pairs=())
        tested = {g for g, _ in sampled}
        cells = []
        for g in present:
            vals = per_group[g]
            if vals:
                med, q25, q75 = median_iqr(vals)
            else:
                med = q25 = q75 = float("nan")
            letters = []
            for other in present:
                if other is g or g not in tested or other not in tested:
                    continue
                if flags.get(g, other).significant:
                    letters.append(MARKER_LETTERS[other])
            cells.append(GroupCell(label=g, n=len(vals), median=med, q25=q25,
                                   q75=q75, markers="".join(sorted(letters))))
        rows.append(GroupComparisonRow(feature=feature, cells=tuple(cells),
                                       kw=kw, pairwise=flags))
    return rows


def feature_table(features: Mapping[str, ActivityFeatures],
                  fits: Mapping[str, SigmoidalCosinorFit],
                  groups: Mapping[str, GroupLabel],
                  posthoc: str = "ranksum",
                  exact: bool = False) -> list[GroupComparisonRow]:
    """Comparison rows for the ten statistical features followed by the five
    fitted circadian parameters."""
    values: dict[str, dict[str, float]] = {}
    for sid, feats in features.items():
        row = {name: getattr(feats, name) for name in FEATURE_ORDER}
        fit = fits.get(sid)
        if fit is not None:
            row.update(min=fit.min, amplitude=fit.amplitude, phase=fit.phase,
                       alpha=fit.alpha, beta=fit.beta)
        values[sid] = row
    order = list(FEATURE_ORDER) + list(CIRCADIAN_ORDER)
    return comparison_rows(values, groups, order, posthoc=posthoc, exact=exact)
