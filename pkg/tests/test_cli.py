import filecmp
import math
from pathlib import Path

import numpy as np
import pytest

from dyncorr.cli import main as cli_main
from dyncorr.matrix import ExpressionMatrix, load_expression, save_expression
from dyncorr.simulate import SimulationConfig, gen_planted_dataset

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*args):
    try:
        return cli_main([str(a) for a in args])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


def write_standardized(path, values, prefix="g"):
    values = np.asarray(values, dtype=float)
    values = (values - values.mean(axis=1, keepdims=True)) / values.std(axis=1, ddof=1, keepdims=True)
    m = ExpressionMatrix(
        [f"{prefix}{i}" for i in range(values.shape[0])],
        [f"s{j}" for j in range(values.shape[1])],
        values,
    )
    save_expression(m, path)
    return m


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_missing_input_path_is_usage_error(tmp_path, capsys):
    rc = run_cli("preprocess", "-i", tmp_path / "nope.tsv", "-o", tmp_path / "out")
    assert rc == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_zero_replicates_is_usage_error(tmp_path, capsys):
    rc = run_cli("simulate", "--replicates", "0", "-o", tmp_path / "out")
    assert rc == 1


def test_bad_top_fraction_is_usage_error(tmp_path):
    f = tmp_path / "m.tsv"
    write_standardized(f, np.random.default_rng(0).normal(size=(5, 8)))
    assert run_cli("dca", "-i", f, "-o", tmp_path / "out", "--top-fraction", "1.5") == 1


def test_all_missing_gene_is_data_error(tmp_path, capsys):
    f = tmp_path / "m.tsv"
    f.write_text(
        "gene\ts1\ts2\ts3\n"
        "gdead\t\t\t\n"
        "g2\t1\t2\t3\n"
        "g3\t4\t6\t5\n"
    )
    rc = run_cli("preprocess", "-i", f, "-o", tmp_path / "out")
    assert rc == 2
    assert "gdead" in capsys.readouterr().err


def test_duplicate_gmt_names_is_data_error(tmp_path, capsys):
    matrix = tmp_path / "m.tsv"
    write_standardized(matrix, np.random.default_rng(1).normal(size=(6, 8)))
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("gene_i\tgene_j\tscore\ng0\tg1\t0.5\n")
    gmt = tmp_path / "sets.gmt"
    gmt.write_text("dup\tx\tg0\tg1\ndup\tx\tg2\tg3\n")
    rc = run_cli("enrich", "--pairs", pairs, "--matrix", matrix, "--gmt", gmt,
                 "-o", tmp_path / "out", "--min-set", "1")
    assert rc == 2
    assert "dup" in capsys.readouterr().err


def test_constant_transformed_row_is_numeric_error(tmp_path, capsys):
    rng = np.random.default_rng(2)
    values = rng.normal(size=(6, 8))
    values[2] = np.tile([1.0, -1.0], 4)  # squares constant after standardization
    f = tmp_path / "m.tsv"
    write_standardized(f, values)
    rc = run_cli("dca", "-i", f, "-o", tmp_path / "out")
    assert rc == 3
    assert "g2" in capsys.readouterr().err


def test_unstandardized_matrix_rejected_by_dca(tmp_path):
    f = tmp_path / "m.tsv"
    m = ExpressionMatrix(["a", "b", "c"], ["s1", "s2", "s3"],
                         np.arange(9, dtype=float).reshape(3, 3) + 1)
    save_expression(m, f)
    assert run_cli("dca", "-i", f, "-o", tmp_path / "out") == 2


# ---------------------------------------------------------------------------
# golden preprocess
# ---------------------------------------------------------------------------

def test_preprocess_reproduces_golden_output(tmp_path):
    rc = run_cli("preprocess", "-i", GOLDEN / "preprocess_input.tsv", "-o", tmp_path / "pre")
    assert rc == 0
    got = (tmp_path / "pre.matrix.tsv").read_bytes()
    want = (GOLDEN / "preprocess_expected.matrix.tsv").read_bytes()
    assert got == want


def test_preprocess_drops_expected_genes(tmp_path):
    run_cli("preprocess", "-i", GOLDEN / "preprocess_input.tsv", "-o", tmp_path / "pre")
    m = load_expression(tmp_path / "pre.matrix.tsv")
    assert "gene06" not in m.gene_ids  # zero-heavy
    assert "gene08" not in m.gene_ids  # constant
    assert m.n_genes == 8
    np.testing.assert_allclose(m.values.mean(axis=1), 0, atol=1e-9)


def test_preprocess_stdout_mode(tmp_path, capsys):
    rc = run_cli("preprocess", "-i", GOLDEN / "preprocess_input.tsv",
                 "-o", tmp_path / "x", "--stdout")
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("gene\t")
    assert len(out.strip().splitlines()) == 9  # header + 8 surviving genes


# ---------------------------------------------------------------------------
# dca behavior
# ---------------------------------------------------------------------------

def test_dca_full_fraction_keeps_all_pairs(tmp_path):
    f = tmp_path / "m.tsv"
    write_standardized(f, np.random.default_rng(3).normal(size=(6, 30)))
    rc = run_cli("dca", "-i", f, "-o", tmp_path / "out", "--top-fraction", "1.0",
                 "--k", "2", "--min-scores", "10")
    assert rc == 0
    lines = (tmp_path / "out.pairs.tsv").read_text().strip().splitlines()
    assert len(lines) - 1 == 15  # C(6,2)


def test_dca_outputs_are_run_to_run_identical(tmp_path):
    f = tmp_path / "m.tsv"
    write_standardized(f, np.random.default_rng(4).normal(size=(50, 25)))
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        rc = run_cli("dca", "-i", f, "-o", tmp_path / d / "run", "--k", "3")
        assert rc == 0
    for name in ("run.pairs.tsv", "run.components.tsv", "run.eigenvalues.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dca_thread_flag_does_not_change_outputs(tmp_path):
    f = tmp_path / "m.tsv"
    write_standardized(f, np.random.default_rng(5).normal(size=(40, 20)))
    for d, threads in (("a", "1"), ("b", "4")):
        (tmp_path / d).mkdir()
        rc = run_cli("dca", "-i", f, "-o", tmp_path / d / "run", "--k", "2", "--threads", threads)
        assert rc == 0
    assert (tmp_path / "a" / "run.components.tsv").read_bytes() == \
           (tmp_path / "b" / "run.components.tsv").read_bytes()


def test_dca_end_to_end_recovers_planted_signal(tmp_path):
    cfg = SimulationConfig(scenario="planted_factor", n_samples=300, n_genes=400,
                           n_pairs=100, signal_strength=1.5, seed=1)
    m, z, _ = gen_planted_dataset(cfg)
    f = tmp_path / "planted.tsv"
    save_expression(m, f)
    rc = run_cli("dca", "-i", f, "-o", tmp_path / "out",
                 "--top-fraction", "0.02", "--no-rotate", "--k", "3")
    assert rc == 0
    rows = (tmp_path / "out.components.tsv").read_text().strip().splitlines()[1:]
    dc1 = np.array([float(r.split("\t")[1]) for r in rows])
    corr = np.corrcoef(dc1, z)[0, 1]
    assert abs(corr) >= 0.9


# ---------------------------------------------------------------------------
# enrich behavior
# ---------------------------------------------------------------------------

def test_enrich_empty_network_writes_valid_empty_sif(tmp_path):
    matrix = tmp_path / "m.tsv"
    write_standardized(matrix, np.random.default_rng(6).normal(size=(8, 10)))
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("gene_i\tgene_j\tscore\ng0\tg1\t0.5\n")
    gmt = tmp_path / "sets.gmt"
    gmt.write_text("S1\tx\tg0\tg1\tg2\nS2\tx\tg3\tg4\tg5\n")
    rc = run_cli("enrich", "--pairs", pairs, "--matrix", matrix, "--gmt", gmt,
                 "-o", tmp_path / "out", "--min-set", "1")
    assert rc == 0
    sif = tmp_path / "out.network.sif"
    assert sif.exists() and sif.read_text() == ""


def test_enrich_manifest_records_inputs(tmp_path):
    matrix = tmp_path / "m.tsv"
    write_standardized(matrix, np.random.default_rng(7).normal(size=(8, 10)))
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("gene_i\tgene_j\tscore\ng0\tg1\t0.5\n")
    gmt = tmp_path / "sets.gmt"
    gmt.write_text("S1\tx\tg0\tg1\tg2\n")
    rc = run_cli("enrich", "--pairs", pairs, "--matrix", matrix, "--gmt", gmt,
                 "-o", tmp_path / "out", "--min-set", "1")
    assert rc == 0
    import json

    manifest = json.loads((tmp_path / "out.manifest.json").read_text())
    assert manifest["command"] == "enrich"
    assert set(manifest["inputs"]) == {"pairs", "gmt", "matrix"}
    for entry in manifest["inputs"].values():
        assert len(entry["sha256"]) == 64


# ---------------------------------------------------------------------------
# simulate behavior
# ---------------------------------------------------------------------------

def test_simulate_fixed_seed_reproducible(tmp_path):
    args = ("simulate", "--scenario", "dynamic", "--rho", "0.6", "--n", "80",
            "--replicates", "40", "--seed", "7")
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        assert run_cli(*args, "-o", tmp_path / d / "sim") == 0
    assert (tmp_path / "a" / "sim.summary.tsv").read_bytes() == \
           (tmp_path / "b" / "sim.summary.tsv").read_bytes()


def test_simulate_stdout_streams_summary(tmp_path, capsys):
    rc = run_cli("simulate", "--scenario", "independent", "--n", "50",
                 "--replicates", "20", "-o", tmp_path / "sim", "--stdout")
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("scenario\t")
    assert "independent" in out


def test_simulate_planted_writes_recovery_table(tmp_path):
    rc = run_cli("simulate", "--scenario", "planted_factor", "--n", "80",
                 "--n-genes", "60", "--n-pairs", "15", "--signal-strength", "2.0",
                 "--runs", "2", "--no-rotate", "-o", tmp_path / "rec")
    assert rc == 0
    lines = (tmp_path / "rec.recovery.tsv").read_text().strip().splitlines()
    assert lines[0] == "run\tseed\trecovery"
    assert len(lines) == 3


def test_simulate_raw_replicates_table(tmp_path):
    rc = run_cli("simulate", "--scenario", "correlated", "--rho", "0.4", "--n", "60",
                 "--replicates", "25", "--raw", "-o", tmp_path / "sim")
    assert rc == 0
    lines = (tmp_path / "sim.replicates.tsv").read_text().strip().splitlines()
    assert len(lines) == 1 + 25 * 2  # two variants share the draws


# ---------------------------------------------------------------------------
# figures (report path)
# ---------------------------------------------------------------------------

def test_figures_rendered_alongside_tables(tmp_path):
    f = tmp_path / "m.tsv"
    write_standardized(f, np.random.default_rng(8).normal(size=(30, 24)))
    rc = run_cli("dca", "-i", f, "-o", tmp_path / "out", "--k", "2", "--figures",
                 "--min-scores", "50")
    assert rc == 0
    assert (tmp_path / "out.scree.png").stat().st_size > 0
    assert (tmp_path / "out.components.png").stat().st_size > 0
    rc = run_cli("simulate", "--scenario", "dynamic", "--rho", "0.5", "--n", "60",
                 "--replicates", "30", "--figures", "-o", tmp_path / "sim")
    assert rc == 0
    assert (tmp_path / "sim.densities.png").stat().st_size > 0


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def test_pipeline_chains_all_stages(tmp_path):
    out = tmp_path / "run"
    rc = run_cli("pipeline", "-i", GOLDEN / "pipeline_input.tsv",
                 "--gmt", GOLDEN / "pipeline_sets.gmt",
                 "-o", out, "--k", "3", "--min-set", "5")
    assert rc == 0
    assert (out / "preprocessed.matrix.tsv").exists()
    assert (out / "dca.components.tsv").exists()
    assert (out / "enrich.dc2.within.tsv").exists()
    assert (out / "dca.manifest.json").exists()
