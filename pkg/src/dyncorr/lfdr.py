"""Empirical-null local false discovery rates for pair scores.

The marginal score distribution is estimated by a Gaussian kernel density
on a fixed grid; the null is a split normal (shared mode, separate scales
per side) fitted from the density's mode and its e^{-1/2} level crossings.
local fdr(x) = min(1, pi0 * f0(x) / f(x)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .components import DynamicComponent, ProductMatrix
from .errors import DataError, NumericError, ValidationError
from .lac import PairList

logger = logging.getLogger(__name__)

DEFAULT_GRID = 512
MIN_SCORES = 200
_HALF_NORMAL_Q75 = 0.6744897501960817  # Phi^-1(0.75)
_DENSITY_FLOOR = 1e-12


@dataclass
class FdrModel:
    """Fitted split-normal null plus the smooth marginal density.

    ``grid``/``density`` tabulate the kernel estimate; evaluation between
    grid points is linear. ``fallback_left``/``fallback_right`` flag sides
    where the level crossing failed and a quantile match was used instead.
    """

    mode: float
    sigma_left: float
    sigma_right: float
    pi0: float
    grid: np.ndarray
    density: np.ndarray
    score_range: tuple[float, float]
    bandwidth: float
    fallback_left: bool = False
    fallback_right: bool = False

    def marginal(self, x) -> np.ndarray:
        """Linear interpolation of the kernel density, floored away from 0."""
        f = np.interp(np.asarray(x, dtype=np.float64), self.grid, self.density)
        return np.maximum(f, _DENSITY_FLOOR)

    def null_density(self, x) -> np.ndarray:
        """Split-normal density with the fitted mode and side scales."""
        x = np.asarray(x, dtype=np.float64)
        c = math.sqrt(2.0 / math.pi) / (self.sigma_left + self.sigma_right)
        sigma = np.where(x <= self.mode, self.sigma_left, self.sigma_right)
        return c * np.exp(-((x - self.mode) ** 2) / (2.0 * sigma**2))


def pair_la_scores(B: ProductMatrix, z) -> np.ndarray:
    """Per-pair liquid-association scores against a component or vector."""
    vec = z.scores if isinstance(z, DynamicComponent) else np.asarray(z, dtype=np.float64)
    if vec.shape != (B.n_samples,):
        raise ValidationError("component length must match sample count")
    sd = vec.std(ddof=1)
    if not sd > 0:
        raise NumericError("constant scouting vector")
    zt = (vec - vec.mean()) / sd
    return (B.values @ zt) / B.n_samples


def _silverman_bandwidth(scores: np.ndarray) -> float:
    sd = scores.std(ddof=1)
    q25, q75 = np.percentile(scores, [25.0, 75.0])
    iqr = q75 - q25
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if not spread > 0:
        raise NumericError("scores are (nearly) constant; cannot estimate density")
    return 0.9 * spread * scores.size ** (-0.2)


def _kde_on_grid(scores: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(grid)
    norm = 1.0 / (scores.size * h * math.sqrt(2.0 * math.pi))
    for start in range(0, scores.size, 4096):
        chunk = scores[start : start + 4096, None]
        out += np.exp(-0.5 * ((grid[None, :] - chunk) / h) ** 2).sum(axis=0)
    return out * norm


def _crossing(grid, density, mode_idx, level, side, limit) -> float | None:
    """Position of the first f = level crossing walking away from the mode.

    The search stops at ``limit`` (the observed score range); a crossing
    that only exists in the padded extrapolation tails does not count.
    """
    idx = range(mode_idx, -1, -1) if side == "left" else range(mode_idx, len(grid))
    prev = None
    for i in idx:
        if (side == "left" and grid[i] < limit) or (side == "right" and grid[i] > limit):
            return None
        if density[i] <= level:
            if prev is None:
                return None
            g0, f0 = grid[prev], density[prev]
            g1, f1 = grid[i], density[i]
            if f0 == f1:
                return float(g1)
            frac = (f0 - level) / (f0 - f1)
            return float(g0 + frac * (g1 - g0))
        prev = i
    return None


def _deconvolve(sigma: float, h: float) -> float:
    # the kernel estimate sees sqrt(sigma^2 + h^2); undo the widening
    return math.sqrt(max(sigma * sigma - h * h, (0.05 * sigma) ** 2))


def fit_null(scores, bins: int = DEFAULT_GRID, min_scores: int = MIN_SCORES) -> FdrModel:
    """Fit the split-normal empirical null to a score vector.

    The marginal is a Gaussian kernel density (Silverman bandwidth) on a
    ``bins``-point grid padded by 3 bandwidths. Each side's scale comes
    from the separation of the e^{-1/2} and e^{-2} level crossings of the
    flank (which also triangulate the mode far more stably than the raw
    argmax, and cancel the argmax's shift bias on asymmetric nulls); the
    kernel's widening is then deconvolved out. Sides without usable
    crossings fall back to a central-quantile match and are flagged.
    pi0 = min(1, f(mode) / f0(mode)).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size < min_scores:
        raise DataError(
            f"need at least {min_scores} scores for a reliable null fit, got {scores.size}"
        )
    if not np.isfinite(scores).all():
        raise ValidationError("scores contain non-finite values")

    h = _silverman_bandwidth(scores)
    lo, hi = float(scores.min()), float(scores.max())
    grid = np.linspace(lo - 3.0 * h, hi + 3.0 * h, bins)
    density = _kde_on_grid(scores, grid, h)

    mode_idx = int(np.argmax(density))
    mu0 = float(grid[mode_idx])
    peak = float(density[mode_idx])

    smoothed = {}
    mode_votes = []
    fallback = {}
    ts = (1.0, 1.5, 2.0)
    for side in ("left", "right"):
        pts = []
        limit = lo if side == "left" else hi
        for t in ts:
            x = _crossing(grid, density, mode_idx, peak * math.exp(-0.5 * t * t), side, limit)
            if x is not None:
                pts.append((t, x))
        fallback[side] = len(pts) == 0
        if len(pts) >= 2:
            # normal flank crosses level e^{-t^2/2} at mu -/+ t sigma; the
            # least-squares line through (t, x) has slope -/+ sigma and
            # intercept mu
            tv = np.array([t for t, _ in pts])
            xv = np.array([x for _, x in pts])
            slope = float(np.sum((tv - tv.mean()) * (xv - xv.mean())) / np.sum((tv - tv.mean()) ** 2))
            sigma = abs(slope)
            mode_votes.append(float(xv.mean() - slope * tv.mean()))
        elif len(pts) == 1:
            sigma = abs(pts[0][1] - mu0) / pts[0][0]
        else:
            half = scores[scores <= mu0] if side == "left" else scores[scores >= mu0]
            dev = np.abs(half - mu0)
            sigma = float(np.median(dev)) / _HALF_NORMAL_Q75 if half.size else float(scores.std(ddof=1))
            logger.warning("no %s-side level crossing; quantile fallback sigma=%.4g", side, sigma)
        if not sigma > 0:
            raise NumericError(f"{side}-side scale estimate is not positive")
        smoothed[side] = float(sigma)

    mu = float(np.mean(mode_votes)) if mode_votes else mu0
    sigma_left = _deconvolve(smoothed["left"], h)
    sigma_right = _deconvolve(smoothed["right"], h)

    f_mode = float(np.interp(mu, grid, density))
    f0_mode = math.sqrt(2.0 / math.pi) / (sigma_left + sigma_right)
    pi0 = min(1.0, f_mode / f0_mode)

    return FdrModel(
        mode=mu,
        sigma_left=sigma_left,
        sigma_right=sigma_right,
        pi0=pi0,
        grid=grid,
        density=density,
        score_range=(lo, hi),
        bandwidth=h,
        fallback_left=fallback["left"],
        fallback_right=fallback["right"],
    )


def local_fdr(score, model: FdrModel):
    """min(1, pi0 f0 / f); scalar in, scalar out (arrays pass through)."""
    x = np.asarray(score, dtype=np.float64)
    values = np.minimum(1.0, model.pi0 * model.null_density(x) / model.marginal(x))
    return float(values) if values.ndim == 0 else values


def select_pairs_by_fdr(
    B: ProductMatrix,
    z,
    threshold: float = 0.01,
    bins: int = DEFAULT_GRID,
    min_scores: int = MIN_SCORES,
) -> PairList:
    """Pairs whose local fdr against z falls below ``threshold``.

    Sorted by ascending fdr, then descending |score|, then pair indices.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"fdr threshold must be in (0, 1], got {threshold}")
    scores = pair_la_scores(B, z)
    model = fit_null(scores, bins=bins, min_scores=min_scores)
    fdr = local_fdr(scores, model)

    keep = np.nonzero(fdr < threshold)[0]
    src = B.pairs
    order = np.lexsort((src.j[keep], src.i[keep], -np.abs(scores[keep]), fdr[keep]))
    keep = keep[order]
    return PairList(
        list(src.gene_ids), src.i[keep], src.j[keep], scores[keep], fdr=fdr[keep]
    )
