"""Expression-matrix ingestion and preprocessing.

Matrices are stored genes x samples. Loading flags missing entries as NaN;
``knn_impute`` fills them, ``filter_genes`` drops degenerate rows, and
``standardize`` brings every gene to mean 0 / sd 1 (n-1 denominator).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyResultError, ImputationError, NumericError, ParseError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_NA_TOKENS = ("", "NA", "NaN", "nan")


@dataclass
class ExpressionMatrix:
    """Genes x samples expression values with identifiers.

    ``values`` is a float64 array of shape (len(gene_ids), len(sample_ids));
    missing entries are NaN until imputed. ``standardized`` records whether
    every row has been brought to mean 0 / sd 1.
    """

    gene_ids: list[str]
    sample_ids: list[str]
    values: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        p, n = self.values.shape
        if len(self.gene_ids) != p or len(self.sample_ids) != n:
            raise ValidationError(
                f"shape mismatch: {p}x{n} values vs {len(self.gene_ids)} genes, "
                f"{len(self.sample_ids)} samples"
            )
        dup = _first_duplicate(self.gene_ids)
        if dup is not None:
            raise ValidationError(f"duplicate gene id {dup!r}")
        dup = _first_duplicate(self.sample_ids)
        if dup is not None:
            raise ValidationError(f"duplicate sample id {dup!r}")

    @property
    def n_genes(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())


def _first_duplicate(ids):
    seen = set()
    for name in ids:
        if name in seen:
            return name
        seen.add(name)
    return None


def load_expression(path, delimiter="\t", na_tokens=DEFAULT_NA_TOKENS):
    """Read a delimited genes-x-samples file.

    The header row holds sample ids, the first column gene ids. Cells equal
    to one of ``na_tokens`` (after stripping) become NaN.

    Raises ParseError on malformed rows (with the 1-based line number) and
    ValidationError on duplicate ids.
    """
    na_set = {tok for tok in na_tokens}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if len(header) < 2:
            raise ParseError("header must hold at least one sample id", line=1)
        sample_ids = [s.strip() for s in header[1:]]
        n = len(sample_ids)

        gene_ids = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ParseError(
                    f"expected {n + 1} columns, found {len(row)}", line=lineno
                )
            gene_ids.append(row[0].strip())
            parsed = np.empty(n, dtype=np.float64)
            for k, cell in enumerate(row[1:]):
                cell = cell.strip()
                if cell in na_set:
                    parsed[k] = np.nan
                else:
                    try:
                        parsed[k] = float(cell)
                    except ValueError:
                        raise ParseError(
                            f"cannot parse value {cell!r} in column {k + 2}",
                            line=lineno,
                        ) from None
            rows.append(parsed)

    if not rows:
        raise ParseError("no data rows", line=2)
    values = np.vstack(rows)
    return ExpressionMatrix(gene_ids, sample_ids, values)


def save_expression(m: ExpressionMatrix, path_or_file, delimiter="\t", fmt="%.10g"):
    """Write a matrix in the same layout ``load_expression`` reads."""
    def _write(fh):
        fh.write(delimiter.join(["gene"] + list(m.sample_ids)) + "\n")
        for gid, row in zip(m.gene_ids, m.values):
            cells = [fmt % v if math.isfinite(v) else "NA" for v in row]
            fh.write(delimiter.join([gid] + cells) + "\n")

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            _write(fh)


def knn_impute(m: ExpressionMatrix, k: int = 10) -> ExpressionMatrix:
    """Fill missing entries from the k nearest genes.

    Distance between two genes is the root-mean-square difference over
    samples observed in both (so genes with different missingness patterns
    stay comparable). A missing value of gene g at sample s becomes the
    mean of that sample's values over the k closest genes that observed s.
    Observed entries are never altered.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    mask = np.isnan(m.values)
    if not mask.any():
        return m

    all_missing = mask.all(axis=1)
    if all_missing.any():
        gid = m.gene_ids[int(np.argmax(all_missing))]
        raise ImputationError(f"gene {gid!r} has no observed values")

    values = m.values.copy()
    obs = ~mask
    filled = np.nan_to_num(m.values, nan=0.0)

    for g in np.nonzero(mask.any(axis=1))[0]:
        # shared-sample RMS distance from gene g to every other gene
        shared = obs & obs[g]
        n_shared = shared.sum(axis=1)
        diff = (filled - filled[g]) * shared
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.sqrt((diff * diff).sum(axis=1) / n_shared)
        dist[g] = np.inf
        dist[n_shared == 0] = np.inf

        for s in np.nonzero(mask[g])[0]:
            candidate = np.isfinite(dist) & obs[:, s]
            idx = np.nonzero(candidate)[0]
            if idx.size == 0:
                raise ImputationError(
                    f"gene {m.gene_ids[g]!r}: no candidate neighbors observe "
                    f"sample {m.sample_ids[s]!r}"
                )
            if idx.size < k:
                logger.warning(
                    "gene %r sample %r: only %d candidate neighbors (k=%d), using all",
                    m.gene_ids[g], m.sample_ids[s], idx.size, k,
                )
            # deterministic tie handling: sort by (distance, gene index)
            order = np.lexsort((idx, dist[idx]))
            chosen = idx[order[: min(k, idx.size)]]
            values[g, s] = m.values[chosen, s].mean()

    return replace(m, values=values)


def filter_genes(
    m: ExpressionMatrix, max_zero_fraction: float = 0.2, min_variance: float = 1e-12
) -> ExpressionMatrix:
    """Drop genes with too many zeros or too little variance.

    A gene is removed when its zero fraction is strictly greater than
    ``max_zero_fraction``, or its sample variance (n-1 denominator) falls
    below ``min_variance``. Row order of survivors is preserved.
    """
    if np.isnan(m.values).any():
        raise ValidationError("filter_genes requires a fully observed matrix")
    zero_frac = (m.values == 0.0).mean(axis=1)
    var = m.values.var(axis=1, ddof=1)
    keep = (zero_frac <= max_zero_fraction) & (var >= min_variance)
    if not keep.any():
        raise EmptyResultError("all genes removed by filtering")
    return replace(
        m,
        gene_ids=[g for g, kf in zip(m.gene_ids, keep) if kf],
        values=m.values[keep],
    )


def standardize(m: ExpressionMatrix) -> ExpressionMatrix:
    """Transform every row to mean 0 / sd 1 (n-1 denominator)."""
    if np.isnan(m.values).any():
        raise ValidationError("standardize requires a fully observed matrix")
    if m.n_samples < 2:
        raise ValidationError("standardize requires at least 2 samples")
    mean = m.values.mean(axis=1, keepdims=True)
    sd = m.values.std(axis=1, ddof=1, keepdims=True)
    bad = ~(sd[:, 0] > 0)
    if bad.any():
        gid = m.gene_ids[int(np.argmax(bad))]
        raise NumericError(f"gene {gid!r} has zero variance; filter it first")
    return replace(m, values=(m.values - mean) / sd, standardized=True)


def standardize_rows(values: np.ndarray) -> np.ndarray:
    """Row-standardize a plain array; raises NumericError on a constant row."""
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean(axis=1, keepdims=True)
    sd = values.std(axis=1, ddof=1, keepdims=True)
    if not (sd > 0).all():
        raise NumericError(f"row {int(np.argmin(sd[:, 0] > 0))} is constant")
    return (values - mean) / sd
