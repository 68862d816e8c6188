"""Pairwise correlation and liquid-association-coefficient screening.

The coefficient for a gene pair is

    squared variant:   r(x^2, y^2) - r(x, y)^2
    absolute variant:  r(|x|, |y|) - |r(x, y)|

computed over standardized rows. ``lac_matrix`` evaluates it for all
p(p-1)/2 pairs with blocked matrix products; the block grid is fixed, so
results are identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import NumericError, ValidationError
from .matrix import ExpressionMatrix, standardize_rows

VARIANTS = ("squared", "absolute")
DEFAULT_TOP_FRACTION = 0.20
_BLOCK = 256


def pearson(x, y) -> float:
    """Plain sample Pearson correlation of two length-n vectors, n >= 3."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson expects two equal-length vectors")
    if x.size < 3:
        raise ValidationError("pearson requires n >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise NumericError("zero-variance input to pearson")
    return float(xc @ yc) / denom


def lac_squared(x, y) -> float:
    """r(x^2, y^2) - r(x, y)^2 for standardized x, y."""
    r = pearson(x, y)
    x2 = np.square(np.asarray(x, dtype=np.float64))
    y2 = np.square(np.asarray(y, dtype=np.float64))
    return pearson(x2, y2) - r * r


def lac_absolute(x, y) -> float:
    """r(|x|, |y|) - |r(x, y)| for standardized x, y."""
    r = pearson(x, y)
    return pearson(np.abs(x), np.abs(y)) - abs(r)


def lac_scalar(x, y, variant: str) -> float:
    if variant == "squared":
        return lac_squared(x, y)
    if variant == "absolute":
        return lac_absolute(x, y)
    raise ValidationError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# condensed upper-triangular indexing: pairs (i, j) with i < j
# ---------------------------------------------------------------------------

def pair_count(p: int) -> int:
    return p * (p - 1) // 2


def pair_index(i, j, p):
    """Condensed index of pair (i, j), i < j, among p genes."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * (2 * p - i - 1) // 2 + (j - i - 1)


def pair_from_index(idx, p):
    """Inverse of ``pair_index`` for arrays of condensed indices."""
    idx = np.asarray(idx, dtype=np.int64)
    row_start = np.concatenate(([0], np.cumsum(np.arange(p - 1, 0, -1))))
    i = np.searchsorted(row_start, idx, side="right") - 1
    j = idx - row_start[i] + i + 1
    return i, j


@dataclass
class PairScoreTable:
    """Upper-triangular pairwise scores over ``gene_ids``.

    ``scores[pair_index(i, j, p)]`` holds the value for pair (i, j), i < j.
    """

    gene_ids: list[str]
    scores: np.ndarray
    variant: str

    def __post_init__(self):
        p = len(self.gene_ids)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (pair_count(p),):
            raise ValidationError(
                f"scores must have length {pair_count(p)} for {p} genes"
            )

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def score(self, i: int, j: int) -> float:
        if i == j:
            raise ValidationError("pairs require i != j")
        if i > j:
            i, j = j, i
        return float(self.scores[int(pair_index(i, j, self.n_genes))])


@dataclass
class PairList:
    """Ordered gene pairs (i < j) with their scores.

    ``fdr`` is populated only by the local-fdr selection path.
    """

    gene_ids: list[str]
    i: np.ndarray
    j: np.ndarray
    score: np.ndarray
    fdr: np.ndarray | None = None

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.score = np.asarray(self.score, dtype=np.float64)
        if not (self.i < self.j).all():
            raise ValidationError("pairs must satisfy i < j")
        if len({(a, b) for a, b in zip(self.i, self.j)}) != len(self.i):
            raise ValidationError("duplicate pairs")

    def __len__(self) -> int:
        return len(self.i)


def _transformed_rows(values: np.ndarray, variant: str, gene_ids) -> np.ndarray:
    trans = np.square(values) if variant == "squared" else np.abs(values)
    sd = trans.std(axis=1, ddof=1)
    bad = ~(sd > 0)
    if bad.any():
        gid = gene_ids[int(np.argmax(bad))]
        raise NumericError(
            f"gene {gid!r}: transformed row is constant, coefficient undefined"
        )
    return standardize_rows(trans)


def lac_matrix(
    m: ExpressionMatrix,
    variant: str = "squared",
    threads: int = 1,
    block: int = _BLOCK,
) -> PairScoreTable:
    """All-pairs coefficients for a standardized matrix.

    Work is partitioned into fixed row blocks of ``block`` genes; each block
    pair is two small matrix products plus an elementwise combine and writes
    a disjoint region of the condensed output, so the result is bitwise
    identical for any ``threads`` value. BLAS is pinned to one thread inside
    the blocks; parallelism comes from the block grid.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    if not m.standardized:
        raise ValidationError("lac_matrix requires a standardized matrix")
    p, n = m.values.shape
    if p < 2:
        raise ValidationError("need at least 2 genes")

    Z = np.ascontiguousarray(m.values)
    W = np.ascontiguousarray(_transformed_rows(Z, variant, m.gene_ids))
    out = np.empty(pair_count(p), dtype=np.float64)
    inv = 1.0 / (n - 1)

    starts = list(range(0, p, block))
    tasks = [(a, b) for a in starts for b in starts if b >= a]

    def run_block(task):
        a, b = task
        a1, b1 = min(a + block, p), min(b + block, p)
        r1 = (Z[a:a1] @ Z[b:b1].T) * inv
        r2 = (W[a:a1] @ W[b:b1].T) * inv
        if variant == "squared":
            zeta = r2 - r1 * r1
        else:
            zeta = r2 - np.abs(r1)
        for i in range(a, a1):
            lo = max(i + 1, b)
            if lo >= b1:
                continue
            start = int(pair_index(i, lo, p))
            out[start : start + (b1 - lo)] = zeta[i - a, lo - b :]

    with threadpool_limits(limits=1):
        if threads <= 1:
            for task in tasks:
                run_block(task)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run_block, tasks))

    return PairScoreTable(list(m.gene_ids), out, variant)


def select_top_pairs(table: PairScoreTable, top_fraction: float = DEFAULT_TOP_FRACTION) -> PairList:
    """The ceil(top_fraction * total) largest-score pairs, sorted descending.

    Ties at the cutoff break by (i, j) lexicographic order, making the
    selection stable across runs.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValidationError(f"top_fraction must be in (0, 1], got {top_fraction}")
    total = table.scores.size
    if total == 0:
        raise ValidationError("empty score table")
    count = math.ceil(top_fraction * total)

    p = table.n_genes
    ii, jj = pair_from_index(np.arange(total, dtype=np.int64), p)
    order = np.lexsort((jj, ii, -table.scores))[:count]
    return PairList(
        list(table.gene_ids), ii[order], jj[order], table.scores[order]
    )
