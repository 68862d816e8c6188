"""Gene-set enrichment of selected pair lists.

Within-process: pairs with both genes in one set. Between-process: pairs
spanning two sets after removing their overlap. Both are tested against a
uniform random-pair null with an exact binomial upper tail (log-space
summation, no normal approximation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import EmptyResultError, ParseError, ValidationError
from .lac import PairList


@dataclass
class GeneSetCollection:
    """Named gene sets restricted to the expression matrix's genes.

    ``universe`` is the set of genes that appear in the matrix and in at
    least one surviving set; enrichment counts and expectations both live
    on that universe.
    """

    sets: dict[str, list[str]]
    universe: set[str]


@dataclass
class EnrichmentResult:
    subject: str | tuple[str, str]
    observed: int
    expected: float
    fold_change: float
    p_value: float
    degenerate: bool = False


def load_gene_sets(path, min_size: int, max_size: int, matrix_genes) -> GeneSetCollection:
    """Parse a GMT file (name, description, genes...) and size-filter.

    Each set is intersected with ``matrix_genes`` before the [min_size,
    max_size] filter; duplicate set names are a parse error.
    """
    matrix_genes = set(matrix_genes)
    sets: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise ParseError("GMT line needs name, description, >=1 gene", line=lineno)
            name = fields[0].strip()
            if name in sets:
                raise ParseError(f"duplicate set name {name!r}", line=lineno)
            genes = []
            seen = set()
            for g in fields[2:]:
                g = g.strip()
                if g and g in matrix_genes and g not in seen:
                    genes.append(g)
                    seen.add(g)
            if min_size <= len(genes) <= max_size:
                sets[name] = genes
    if not sets:
        raise EmptyResultError("no gene sets survive intersection and size filtering")
    universe = set()
    for genes in sets.values():
        universe.update(genes)
    return GeneSetCollection(sets, universe)


def binomial_upper_tail(m: int, q: float, observed: int) -> float:
    """P(Binomial(m, q) >= observed), inclusive, by exact log-space summation."""
    if observed <= 0:
        return 1.0
    if observed > m:
        return 0.0
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    j = np.arange(observed, m + 1, dtype=np.float64)
    log_terms = (
        gammaln(m + 1) - gammaln(j + 1) - gammaln(m - j + 1)
        + j * np.log(q) + (m - j) * np.log1p(-q)
    )
    return float(min(1.0, np.exp(logsumexp(log_terms))))


def restrict_pairs_to_universe(pairs: PairList, universe: set[str]):
    """Pairs with both genes in the universe, as a list of gene-name tuples."""
    names = pairs.gene_ids
    kept = []
    for a, b in zip(pairs.i, pairs.j):
        ga, gb = names[int(a)], names[int(b)]
        if ga in universe and gb in universe:
            kept.append((ga, gb))
    return kept


def _result(subject, observed, m, q) -> EnrichmentResult:
    expected = m * q
    fold = observed / expected if expected > 0 else 0.0
    return EnrichmentResult(
        subject=subject,
        observed=observed,
        expected=expected,
        fold_change=fold,
        p_value=binomial_upper_tail(m, q, observed),
    )


def within_process(universe_pairs, gene_set, n_universe: int, m_pairs: int) -> EnrichmentResult:
    """Enrichment of pairs falling entirely inside one gene set.

    ``universe_pairs`` must already be restricted to the universe;
    ``m_pairs`` is their count. q = C(s,2)/C(N,2).
    """
    name, genes = gene_set
    members = set(genes)
    s = len(members)
    if s < 2 or n_universe < 2:
        return EnrichmentResult(name, 0, 0.0, 0.0, 1.0, degenerate=True)
    observed = sum(1 for a, b in universe_pairs if a in members and b in members)
    q = (s * (s - 1)) / (n_universe * (n_universe - 1))
    return _result(name, observed, m_pairs, q)


def between_process(universe_pairs, set_a, set_b, n_universe: int, m_pairs: int) -> EnrichmentResult:
    """Enrichment of pairs spanning two sets, overlap removed first.

    With A' = A minus B and B' = B minus A, counts pairs with one gene in
    each; q = |A'| |B'| / C(N,2).
    """
    name_a, genes_a = set_a
    name_b, genes_b = set_b
    if name_a == name_b:
        raise ValidationError("between_process requires two distinct sets")
    a_only = set(genes_a) - set(genes_b)
    b_only = set(genes_b) - set(genes_a)
    subject = (name_a, name_b)
    if not a_only or not b_only or n_universe < 2:
        return EnrichmentResult(subject, 0, 0.0, 0.0, 1.0, degenerate=True)
    observed = sum(
        1
        for x, y in universe_pairs
        if (x in a_only and y in b_only) or (x in b_only and y in a_only)
    )
    q = 2.0 * len(a_only) * len(b_only) / (n_universe * (n_universe - 1))
    return _result(subject, observed, m_pairs, q)


def process_pair_network(
    results,
    p_threshold: float = 0.001,
    fc_threshold: float = 2.0,
    min_degree: int = 0,
):
    """Edges between set pairs passing both thresholds.

    Returns (edges, pruned_edges, degrees): the full qualifying edge list,
    the view with nodes of degree < min_degree removed, and per-node degree
    counts over the full edge list.
    """
    edges = [
        r
        for r in results
        if not r.degenerate and r.p_value < p_threshold and r.fold_change >= fc_threshold
    ]
    degrees: dict[str, int] = {}
    for r in edges:
        a, b = r.subject
        degrees[a] = degrees.get(a, 0) + 1
        degrees[b] = degrees.get(b, 0) + 1
    pruned = [
        r
        for r in edges
        if degrees[r.subject[0]] >= min_degree and degrees[r.subject[1]] >= min_degree
    ]
    return edges, pruned, degrees
