"""Latent dynamic-signal extraction from selected gene pairs.

Rows of the product matrix are elementwise products of standardized pair
rows; the sample-score vectors that maximize the sum of squared
liquid-association scores are the top eigenvectors of the product matrix's
Gram matrix. Varimax rotation of the retained basis is optional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .lac import PairList
from .matrix import ExpressionMatrix

_SYM_TOL = 1e-8


@dataclass
class ProductMatrix:
    """m x n matrix whose row k is the elementwise product of pair k."""

    pairs: PairList
    values: np.ndarray
    sample_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 2:
            raise ValidationError("product matrix must be m x n with m >= 1, n >= 2")
        if self.values.shape[0] != len(self.pairs):
            raise ValidationError("row count must match the pair list")
        if self.values.shape[1] != len(self.sample_ids):
            raise ValidationError("column count must match sample ids")

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass
class DynamicComponent:
    """Unit-length sample-score vector with its captured quadratic form.

    ``eigenvalue`` holds z' (B'B) z; for unrotated components this is the
    plain eigenvalue. Sign convention: the largest-magnitude entry of
    ``scores`` is positive.
    """

    scores: np.ndarray
    eigenvalue: float
    rank: int
    rotated: bool

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)


def build_product_matrix(m: ExpressionMatrix, pairs: PairList) -> ProductMatrix:
    """Row k = standardized row i_k times standardized row j_k, elementwise."""
    if not m.standardized:
        raise ValidationError("product matrix requires a standardized matrix")
    if len(pairs) == 0:
        raise ValidationError("empty pair list")
    hi = max(int(pairs.i.max()), int(pairs.j.max()))
    if hi >= m.n_genes or int(pairs.i.min()) < 0:
        raise ValidationError(f"pair index {hi} out of range for {m.n_genes} genes")
    values = m.values[pairs.i] * m.values[pairs.j]
    return ProductMatrix(pairs, values, list(m.sample_ids))


def gram(B: ProductMatrix) -> np.ndarray:
    """The n x n Gram matrix of sample columns, B'B."""
    return B.values.T @ B.values


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # first occurrence of the largest-magnitude entry decides the sign
    return -v if v[int(np.argmax(np.abs(v)))] < 0 else v


def eigendecompose(S: np.ndarray, k: int) -> list[tuple[float, np.ndarray]]:
    """Top-k eigenpairs of a symmetric matrix, descending, unit vectors.

    Signs follow the largest-magnitude-entry-positive rule so repeated runs
    agree bitwise.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError("expected a square matrix")
    n = S.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    scale = max(1.0, float(np.abs(S).max()))
    if float(np.abs(S - S.T).max()) > _SYM_TOL * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    eigvals, eigvecs = np.linalg.eigh((S + S.T) / 2.0)
    order = np.argsort(eigvals)[::-1][:k]
    return [(float(eigvals[i]), _fix_sign(eigvecs[:, i].copy())) for i in order]


def varimax_criterion(L: np.ndarray) -> float:
    """Sum over columns of the variance of squared loadings."""
    sq = L * L
    return float(np.sum(sq.var(axis=0)))


def varimax(V: np.ndarray, max_iter: int = 1000, tol: float = 1e-10):
    """Orthogonal varimax rotation of a column-orthogonal matrix.

    Iterates the SVD-based fixed-point update, keeping the criterion
    non-decreasing; stops when the criterion gain drops below ``tol`` or
    after ``max_iter`` sweeps. Returns (V @ R, R) with column signs fixed
    to largest-magnitude-entry-positive.
    """
    V = np.asarray(V, dtype=np.float64)
    n, k = V.shape
    if k == 1:
        return V.copy(), np.eye(1)

    R = np.eye(k)
    crit = varimax_criterion(V)
    for _ in range(max_iter):
        B = V @ R
        G = V.T @ (B**3 - B @ np.diag((B * B).sum(axis=0)) / n)
        u, s, vt = np.linalg.svd(G)
        R_new = u @ vt
        crit_new = varimax_criterion(V @ R_new)
        if crit_new < crit:
            break
        gain = crit_new - crit
        R, crit = R_new, crit_new
        if gain < tol:
            break

    rotated = V @ R
    for c in range(k):
        col = rotated[:, c]
        if col[int(np.argmax(np.abs(col)))] < 0:
            rotated[:, c] = -col
            R[:, c] = -R[:, c]
    return rotated, R


def extract_components(
    B: ProductMatrix,
    k: int,
    rotate: bool = True,
    rotation_max_iter: int = 1000,
    rotation_tol: float = 1e-10,
) -> list[DynamicComponent]:
    """Top-k sample-score components of B'B, optionally varimax-rotated.

    The rotation is fitted on eigenvectors scaled by sqrt(eigenvalue) (so
    the criterion weighs directions by captured signal), then applied to
    the orthonormal basis and the columns re-normalized to unit length,
    keeping the components mutually orthogonal. Components are reordered
    by descending z' (B'B) z after rotation.
    """
    S = gram(B)
    n = S.shape[0]
    if k > n:
        raise ValidationError(f"k={k} exceeds sample count {n}")
    pairs = eigendecompose(S, k)
    eigvals = np.array([ev for ev, _ in pairs])
    positive = int((eigvals > max(eigvals.max(), 0.0) * 1e-12).sum())
    if eigvals.max() <= 0 or k > positive:
        raise NumericError(
            f"only {positive} positive eigenvalues available; choose k <= {positive}"
        )

    V = np.column_stack([vec for _, vec in pairs])
    if rotate and k > 1:
        scaled = V * np.sqrt(eigvals)
        _, R = varimax(scaled, max_iter=rotation_max_iter, tol=rotation_tol)
        Z = V @ R
        Z /= np.linalg.norm(Z, axis=0)
        captured = np.einsum("ij,ij->j", Z, S @ Z)
        order = np.argsort(-captured, kind="stable")
        return [
            DynamicComponent(_fix_sign(Z[:, c].copy()), float(captured[c]), r + 1, True)
            for r, c in enumerate(order)
        ]
    return [
        DynamicComponent(vec, ev, r + 1, False) for r, (ev, vec) in enumerate(pairs)
    ]


def la_score(x, y, z) -> float:
    """Mean of x * y * z-tilde, with z standardized to mean 0 / sd 1.

    x and y are expected to be standardized gene rows; z is any scouting
    vector with nonzero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not x.shape == y.shape == z.shape or x.ndim != 1:
        raise ValidationError("la_score expects three equal-length vectors")
    sd = z.std(ddof=1)
    if not sd > 0:
        raise NumericError("constant scouting vector")
    zt = (z - z.mean()) / sd
    return float(np.mean(x * y * zt))
