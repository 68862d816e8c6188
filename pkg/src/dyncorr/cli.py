"""Command-line front end.

Subcommands: preprocess, dca, enrich, simulate, pipeline. Data goes to
files (stdout stays clean unless --stdout streams a single table); progress
and diagnostics go to stderr. Exit codes: 1 usage, 2 data, 3 numeric.
Every run writes a JSON manifest with parameters and input digests.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .components import build_product_matrix, extract_components
from .enrichment import (
    between_process,
    load_gene_sets,
    process_pair_network,
    within_process,
)
from .errors import DataError, DyncorrError, NumericError, ValidationError
from .lac import PairList, lac_matrix, select_top_pairs
from .lfdr import fit_null, local_fdr, pair_la_scores
from .manifest import RunManifest
from .matrix import (
    DEFAULT_NA_TOKENS,
    filter_genes,
    knn_impute,
    load_expression,
    save_expression,
    standardize,
)
from .simulate import (
    SimulationConfig,
    lac_distribution_study,
    recovery_study,
)

logger = logging.getLogger("dyncorr")

FLOAT_FMT = "%.10g"


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1 (argparse's default of 2 is reserved for data errors)
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _existing_file(value):
    if not Path(value).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {value}")
    return value


def _fraction(value):
    x = float(value)
    if not 0.0 < x <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {value}")
    return x


def _positive_int(value):
    x = int(value)
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return x


def _nonneg_int(value):
    x = int(value)
    if x < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return x


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    return str(value)


def write_tsv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def _default_threads() -> int:
    env = os.environ.get("DCA_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _new_manifest(args, command, params) -> RunManifest:
    return RunManifest(
        tool="dyncorr", version=__version__, command=command, parameters=params
    ).start()


def _out_prefix(args) -> Path:
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    prefix = _out_prefix(args)
    manifest = _new_manifest(args, "preprocess", {
        "input": args.input, "delimiter": args.delimiter, "na_token": args.na_token,
        "knn_k": args.knn_k, "max_zero_frac": args.max_zero_frac,
        "min_variance": args.min_variance,
    })
    manifest.add_input("matrix", args.input)

    na_tokens = tuple(DEFAULT_NA_TOKENS) + ((args.na_token,) if args.na_token else ())
    m = load_expression(args.input, delimiter=args.delimiter, na_tokens=na_tokens)
    logger.info("loaded %d genes x %d samples (%d missing)", m.n_genes, m.n_samples, m.n_missing)
    if m.n_missing:
        m = knn_impute(m, k=args.knn_k)
        logger.info("imputed missing values with k=%d", args.knn_k)
    m = filter_genes(m, max_zero_fraction=args.max_zero_frac, min_variance=args.min_variance)
    logger.info("%d genes after filtering", m.n_genes)
    m = standardize(m)

    if args.stdout:
        save_expression(m, sys.stdout, delimiter=args.delimiter)
    else:
        out = Path(f"{prefix}.matrix.tsv")
        save_expression(m, out, delimiter=args.delimiter)
        manifest.add_output("matrix", out)
        manifest.write(Path(f"{prefix}.manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# dca
# ---------------------------------------------------------------------------

def _load_standardized(path, delimiter="\t"):
    m = load_expression(path, delimiter=delimiter)
    if m.n_missing:
        raise DataError("matrix has missing values; run preprocess first")
    mean = np.abs(m.values.mean(axis=1)).max()
    sd = np.abs(m.values.std(axis=1, ddof=1) - 1.0).max()
    if mean > 1e-6 or sd > 1e-6:
        raise DataError("matrix is not standardized; run preprocess first")
    m.standardized = True
    return m


def cmd_dca(args) -> int:
    prefix = _out_prefix(args)
    manifest = _new_manifest(args, "dca", {
        "input": args.input, "variant": args.variant, "top_fraction": args.top_fraction,
        "k": args.k, "rotate": not args.no_rotate, "rotation_tol": args.rotation_tol,
        "rotation_max_iter": args.rotation_max_iter, "fdr_threshold": args.fdr_threshold,
        "kde_grid": args.kde_grid, "min_scores": args.min_scores, "threads": args.threads,
    })
    manifest.add_input("matrix", args.input)

    m = _load_standardized(args.input)
    logger.info("scoring %d genes (%d pairs)", m.n_genes, m.n_genes * (m.n_genes - 1) // 2)
    table = lac_matrix(m, variant=args.variant, threads=args.threads)
    selected = select_top_pairs(table, args.top_fraction)
    logger.info("selected top %d pairs", len(selected))

    pairs_out = Path(f"{prefix}.pairs.tsv")
    write_tsv(pairs_out, ["gene_i", "gene_j", "score"], (
        (m.gene_ids[int(i)], m.gene_ids[int(j)], s)
        for i, j, s in zip(selected.i, selected.j, selected.score)
    ))
    manifest.add_output("pairs", pairs_out)

    B = build_product_matrix(m, selected)
    k = min(args.k, m.n_samples)
    comps = extract_components(
        B, k=k, rotate=not args.no_rotate,
        rotation_max_iter=args.rotation_max_iter, rotation_tol=args.rotation_tol,
    )

    comp_out = Path(f"{prefix}.components.tsv")
    write_tsv(comp_out, ["sample_id"] + [f"dc{c.rank}" for c in comps], (
        [sid] + [c.scores[s] for c in comps] for s, sid in enumerate(m.sample_ids)
    ))
    manifest.add_output("components", comp_out)

    eig_out = Path(f"{prefix}.eigenvalues.tsv")
    total = sum(c.eigenvalue for c in comps)
    write_tsv(eig_out, ["rank", "eigenvalue", "share_of_retained"], (
        (c.rank, c.eigenvalue, c.eigenvalue / total if total > 0 else 0.0) for c in comps
    ))
    manifest.add_output("eigenvalues", eig_out)

    models = {}
    for comp in comps:
        scores = pair_la_scores(B, comp)
        try:
            model = fit_null(scores, bins=args.kde_grid, min_scores=args.min_scores)
        except DataError as exc:
            logger.warning("dc%d: %s; skipping pair selection", comp.rank, exc)
            continue
        models[comp.rank] = (scores, model)
        fdr = local_fdr(scores, model)
        keep = np.nonzero(fdr < args.fdr_threshold)[0]
        order = np.lexsort((selected.j[keep], selected.i[keep], -np.abs(scores[keep]), fdr[keep]))
        keep = keep[order]
        dc_out = Path(f"{prefix}.dc{comp.rank}.pairs.tsv")
        write_tsv(dc_out, ["gene_i", "gene_j", "la_score", "fdr"], (
            (m.gene_ids[int(selected.i[t])], m.gene_ids[int(selected.j[t])], scores[t], fdr[t])
            for t in keep
        ))
        manifest.add_output(f"dc{comp.rank}_pairs", dc_out)
        logger.info("dc%d: %d pairs below fdr %g", comp.rank, len(keep), args.fdr_threshold)

    if args.figures:
        from . import report

        scree_out = Path(f"{prefix}.scree.png")
        report.save_scree_figure([c.eigenvalue for c in comps], scree_out)
        manifest.add_output("scree_figure", scree_out)
        comp_fig = Path(f"{prefix}.components.png")
        report.save_component_figure(comps, m.sample_ids, comp_fig)
        manifest.add_output("components_figure", comp_fig)
        for rank, (scores, model) in models.items():
            fig_out = Path(f"{prefix}.dc{rank}.null_fit.png")
            report.save_null_fit_figure(scores, model, fig_out)
            manifest.add_output(f"dc{rank}_null_fit_figure", fig_out)

    manifest.write(Path(f"{prefix}.manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# enrich
# ---------------------------------------------------------------------------

def _read_pair_names(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if len(header) < 2:
            raise DataError(f"{path}: expected a pair table with gene_i, gene_j columns")
        for line in fh:
            fields = line.rstrip("\n").split("\t")
            if len(fields) >= 2:
                pairs.append((fields[0], fields[1]))
    return pairs


def cmd_enrich(args) -> int:
    prefix = _out_prefix(args)
    manifest = _new_manifest(args, "enrich", {
        "pairs": args.pairs, "gmt": args.gmt, "matrix": args.matrix,
        "min_set": args.min_set, "max_set": args.max_set,
        "p_threshold": args.p_threshold, "fc_threshold": args.fc_threshold,
        "min_degree": args.min_degree,
    })
    manifest.add_input("pairs", args.pairs)
    manifest.add_input("gmt", args.gmt)
    manifest.add_input("matrix", args.matrix)

    with open(args.matrix, encoding="utf-8") as fh:
        fh.readline()
        matrix_genes = [line.split("\t", 1)[0].strip() for line in fh if line.strip()]
    collection = load_gene_sets(args.gmt, args.min_set, args.max_set, matrix_genes)
    logger.info("%d sets, %d universe genes", len(collection.sets), len(collection.universe))

    raw_pairs = _read_pair_names(args.pairs)
    universe_pairs = [
        (a, b) for a, b in raw_pairs
        if a in collection.universe and b in collection.universe
    ]
    n_universe = len(collection.universe)
    m_pairs = len(universe_pairs)
    logger.info("%d of %d pairs inside the universe", m_pairs, len(raw_pairs))

    names = sorted(collection.sets)
    within = [
        within_process(universe_pairs, (name, collection.sets[name]), n_universe, m_pairs)
        for name in names
    ]
    within_out = Path(f"{prefix}.within.tsv")
    write_tsv(within_out, ["set", "observed", "expected", "fold_change", "p_value", "degenerate"], (
        (r.subject, r.observed, r.expected, r.fold_change, r.p_value, int(r.degenerate))
        for r in within
    ))
    manifest.add_output("within", within_out)

    between = [
        between_process(
            universe_pairs,
            (a, collection.sets[a]), (b, collection.sets[b]),
            n_universe, m_pairs,
        )
        for idx, a in enumerate(names) for b in names[idx + 1:]
    ]
    between_out = Path(f"{prefix}.between.tsv")
    write_tsv(between_out, ["set_a", "set_b", "observed", "expected", "fold_change", "p_value", "degenerate"], (
        (r.subject[0], r.subject[1], r.observed, r.expected, r.fold_change, r.p_value, int(r.degenerate))
        for r in between
    ))
    manifest.add_output("between", between_out)

    edges, pruned, degrees = process_pair_network(
        between, p_threshold=args.p_threshold,
        fc_threshold=args.fc_threshold, min_degree=args.min_degree,
    )
    sif_out = Path(f"{prefix}.network.sif")
    with open(sif_out, "w", encoding="utf-8") as fh:
        for r in edges:
            fh.write(f"{r.subject[0]}\tdyncorr\t{r.subject[1]}\n")
    manifest.add_output("network_sif", sif_out)

    net_out = Path(f"{prefix}.network.tsv")
    write_tsv(net_out, ["set_a", "set_b", "observed", "expected", "fold_change", "p_value",
                        "degree_a", "degree_b", "in_pruned_view"], (
        (r.subject[0], r.subject[1], r.observed, r.expected, r.fold_change, r.p_value,
         degrees[r.subject[0]], degrees[r.subject[1]], int(r in pruned))
        for r in edges
    ))
    manifest.add_output("network_stats", net_out)
    logger.info("%d qualifying edges (%d in pruned view)", len(edges), len(pruned))

    if args.figures:
        from . import report

        fig_out = Path(f"{prefix}.network.png")
        report.save_network_figure(edges, degrees, fig_out, min_degree=args.min_degree)
        manifest.add_output("network_figure", fig_out)

    manifest.write(Path(f"{prefix}.manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    prefix = _out_prefix(args)
    manifest = _new_manifest(args, "simulate", {
        "scenario": args.scenario, "rho": args.rho, "n": args.n,
        "replicates": args.replicates, "seed": args.seed, "variant": args.variant,
        "n_genes": args.n_genes, "n_pairs": args.n_pairs,
        "signal_strength": args.signal_strength, "runs": args.runs,
        "top_fraction": args.top_fraction, "rotate": not args.no_rotate,
    })
    manifest.seeds = [args.seed]

    if args.scenario == "planted_factor":
        config = SimulationConfig(
            scenario="planted_factor", n_samples=args.n[0], n_genes=args.n_genes,
            n_pairs=args.n_pairs, signal_strength=args.signal_strength, seed=args.seed,
        )
        scores = recovery_study(
            config, n_runs=args.runs, variant=args.variant[0],
            top_fraction=args.top_fraction, rotate=not args.no_rotate,
            threads=args.threads,
        )
        out = Path(f"{prefix}.recovery.tsv")
        write_tsv(out, ["run", "seed", "recovery"], (
            (run, args.seed + run, s) for run, s in enumerate(scores)
        ))
        manifest.add_output("recovery", out)
        logger.info("median recovery %.4f over %d runs", float(np.median(scores)), args.runs)
    else:
        scenarios = ("dynamic", "correlated", "independent") if args.scenario == "all" else (args.scenario,)
        cells = lac_distribution_study(
            scenarios=scenarios, variants=tuple(args.variant), rhos=tuple(args.rho),
            ns=tuple(args.n), replicates=args.replicates, seed=args.seed,
        )
        rows = [
            (c.scenario, c.variant, c.rho, c.n, len(c.values), c.mean, c.sd,
             c.quantiles[0.025], c.quantiles[0.25], c.quantiles[0.5],
             c.quantiles[0.75], c.quantiles[0.975])
            for c in cells
        ]
        header = ["scenario", "variant", "rho", "n", "replicates", "mean", "sd",
                  "q025", "q25", "median", "q75", "q975"]
        if args.stdout:
            sys.stdout.write("\t".join(header) + "\n")
            for row in rows:
                sys.stdout.write("\t".join(_fmt(v) for v in row) + "\n")
        else:
            out = Path(f"{prefix}.summary.tsv")
            write_tsv(out, header, rows)
            manifest.add_output("summary", out)
        if args.raw:
            raw_out = Path(f"{prefix}.replicates.tsv")
            write_tsv(raw_out, ["scenario", "variant", "rho", "n", "replicate", "lac"], (
                (c.scenario, c.variant, c.rho, c.n, rep, v)
                for c in cells for rep, v in enumerate(c.values)
            ))
            manifest.add_output("replicates", raw_out)
        if args.figures:
            from . import report

            fig_out = Path(f"{prefix}.densities.png")
            report.save_lac_density_figure(cells, fig_out)
            manifest.add_output("densities_figure", fig_out)

    if not args.stdout:
        manifest.write(Path(f"{prefix}.manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def cmd_pipeline(args) -> int:
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    pre = argparse.Namespace(**vars(args))
    pre.output = str(outdir / "preprocessed")
    pre.stdout = False
    cmd_preprocess(pre)

    dca = argparse.Namespace(**vars(args))
    dca.input = str(outdir / "preprocessed.matrix.tsv")
    dca.output = str(outdir / "dca")
    cmd_dca(dca)

    if args.gmt:
        ranks = []
        for path in sorted(outdir.glob("dca.dc*.pairs.tsv")):
            rank = int(path.name.split(".dc")[1].split(".")[0])
            ranks.append((rank, path))
        for rank, path in sorted(ranks):
            en = argparse.Namespace(**vars(args))
            en.pairs = str(path)
            en.matrix = dca.input
            en.output = str(outdir / f"enrich.dc{rank}")
            cmd_enrich(en)
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--output", "-o", required=True, help="output path prefix")
    p.add_argument("--figures", action="store_true", help="also render figures (PNG)")
    p.add_argument("--threads", type=_positive_int, default=_default_threads(),
                   help="worker threads for pair scoring (env DCA_THREADS)")
    p.add_argument("--verbose", "-v", action="store_true")


def _add_preprocess_flags(p):
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--na-token", default="NA")
    p.add_argument("--knn-k", type=_positive_int, default=10)
    p.add_argument("--max-zero-frac", type=float, default=0.2)
    p.add_argument("--min-variance", type=float, default=1e-12)


def _add_dca_flags(p):
    p.add_argument("--variant", choices=("squared", "absolute"), default="squared")
    p.add_argument("--top-fraction", type=_fraction, default=0.2)
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--no-rotate", action="store_true")
    p.add_argument("--rotation-tol", type=float, default=1e-10)
    p.add_argument("--rotation-max-iter", type=_positive_int, default=1000)
    p.add_argument("--fdr-threshold", type=_fraction, default=0.01)
    p.add_argument("--kde-grid", type=_positive_int, default=512)
    p.add_argument("--min-scores", type=_positive_int, default=200)


def _add_enrich_flags(p, gmt_required=False):
    p.add_argument("--gmt", type=_existing_file, required=gmt_required)
    p.add_argument("--min-set", type=_positive_int, default=5)
    p.add_argument("--max-set", type=_positive_int, default=1000)
    p.add_argument("--p-threshold", type=float, default=0.001)
    p.add_argument("--fc-threshold", type=float, default=2.0)
    p.add_argument("--min-degree", type=_nonneg_int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="dyncorr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dyncorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="load, impute, filter, standardize")
    p.add_argument("--input", "-i", type=_existing_file, required=True)
    p.add_argument("--stdout", action="store_true", help="stream the matrix to stdout")
    _add_preprocess_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("dca", help="score pairs, extract components, select by fdr")
    p.add_argument("--input", "-i", type=_existing_file, required=True,
                   help="standardized matrix TSV")
    _add_dca_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_dca)

    p = sub.add_parser("enrich", help="gene-set enrichment of a selected pair list")
    p.add_argument("--pairs", type=_existing_file, required=True)
    p.add_argument("--matrix", type=_existing_file, required=True,
                   help="expression matrix supplying the gene universe")
    _add_enrich_flags(p, gmt_required=True)
    _add_common(p)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("simulate", help="sampling-distribution and recovery studies")
    p.add_argument("--scenario", choices=("all", "dynamic", "correlated", "independent", "planted_factor"),
                   default="all")
    p.add_argument("--rho", type=float, nargs="+", default=[0.4, 0.6, 0.8])
    p.add_argument("--n", type=_positive_int, nargs="+", default=[100, 500])
    p.add_argument("--replicates", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=("squared", "absolute"), nargs="+",
                   default=["squared", "absolute"])
    p.add_argument("--raw", action="store_true", help="also write per-replicate values")
    p.add_argument("--stdout", action="store_true", help="stream the summary to stdout")
    p.add_argument("--n-genes", type=_positive_int, default=400)
    p.add_argument("--n-pairs", type=_positive_int, default=100)
    p.add_argument("--signal-strength", type=float, default=1.5)
    p.add_argument("--runs", type=_positive_int, default=10)
    p.add_argument("--top-fraction", type=_fraction, default=0.02)
    p.add_argument("--no-rotate", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="preprocess + dca + per-component enrich")
    p.add_argument("--input", "-i", type=_existing_file, required=True)
    _add_preprocess_flags(p)
    _add_dca_flags(p)
    _add_enrich_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_pipeline, stdout=False)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"dyncorr: numeric error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"dyncorr: data error: {exc}", file=sys.stderr)
        return 2
    except DyncorrError as exc:
        print(f"dyncorr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
