"""Every figure pipeline runs end to end on a small config."""

from pathlib import Path

import numpy as np
import pytest

from maxentlab.configio import parse_config
from maxentlab.csvio import read_csv
from maxentlab.figures import (
    run_bounds_verify,
    run_figure,
    run_report,
    run_synth,
    run_train,
)
from maxentlab.manifest import load_manifest

SMALL = """
[experiment]
regime = fine_grained
train_n = 48
val_n = 120
seeds = 1,2
[mixture]
fixture_seed = 7
[train]
epochs = 6
lr = constant:0.2
[sweep]
gammas = 0,1
noise_fractions = 0,0.5
data_fractions = 0.5,1.0
"""

SMALL_SPECTRUM = """
[experiment]
regime = fine_grained
train_n = 120
val_n = 120
seeds = 1
[mixture]
source = fixture_spectrum
fixture_seed = 7
[train]
epochs = 6
lr = constant:0.2
weight_decay = 0.003
train_feature_map = true
"""


@pytest.fixture
def small_cfg():
    return parse_config(SMALL)


def test_synth_exports_datasets(small_cfg, tmp_path):
    manifest = run_synth(small_cfg, tmp_path / "s", [1])
    man = load_manifest(manifest)
    names = {a["path"] for a in man.artifacts}
    assert {"mixture.txt", "train_seed1.csv", "val_seed1.csv"} <= names


def test_train_writes_history_and_checkpoints(small_cfg, tmp_path):
    manifest = run_train(small_cfg, tmp_path / "t", [1, 2])
    man = load_manifest(manifest)
    names = {a["path"] for a in man.artifacts}
    assert {"history_seed1.csv", "model_seed1.ckpt", "summary.csv"} <= names
    header, rows = read_csv(tmp_path / "t" / "history_seed1.csv")
    assert header[0] == "epoch" and len(rows) == 7  # epochs + 1


@pytest.mark.parametrize(
    "kind,expect",
    [
        ("pc_scatter", ("pc_scatter_fine.csv", "pc_scatter_large.csv", "pc_summary.csv")),
        ("top_prob_hist", ("top_prob_hist_ce_seed1.csv", "top_prob_means.csv")),
        ("gamma_sweep", ("sweep_seed1.csv", "sweep_medians.csv")),
        ("noise_sweep", ("noise_medians.csv",)),
        ("ce_vs_val", ("history_ce_seed1.csv", "history_maxent_seed1.csv")),
        ("data_fraction_sweep", ("data_fraction_medians.csv",)),
        ("lsr_compare", ("lsr_compare.csv",)),
    ],
)
def test_figure_kinds_produce_artifacts(small_cfg, tmp_path, kind, expect):
    manifest = run_figure(small_cfg, kind, tmp_path / kind, [1, 2])
    names = {a["path"] for a in load_manifest(manifest).artifacts}
    for name in expect:
        assert name in names, (kind, name, names)


def test_spectrum_figure(tmp_path):
    cfg = parse_config(SMALL_SPECTRUM)
    manifest = run_figure(cfg, "spectrum", tmp_path / "spec", [1])
    names = {a["path"] for a in load_manifest(manifest).artifacts}
    assert {
        "spectrum_none_seed1.csv",
        "spectrum_ce_seed1.csv",
        "spectrum_maxent_seed1.csv",
        "spectrum_tails.csv",
    } <= names
    header, rows = read_csv(tmp_path / "spec" / "spectrum_none_seed1.csv")
    assert header == ["rank", "eigenvalue", "log_eigenvalue"]
    assert len(rows) == cfg.dim


def test_bounds_verify_pipeline(tmp_path):
    cfg = parse_config(
        SMALL
        + "\n[bounds]\ntrials = 100\nsample_counts = 100\nentropy_draws = 500\n"
    )
    manifest = run_bounds_verify(cfg, tmp_path / "b", [1])
    names = {a["path"] for a in load_manifest(manifest).artifacts}
    assert {"verify.csv", "bounds_summary.csv", "bounds_summary.txt"} <= names
    header, rows = read_csv(tmp_path / "b" / "verify.csv")
    assert header == ["trial", "theorem", "observed", "bound", "margin", "violated"]
    assert all(row[5] in ("true", "false") for row in rows)
    text = (tmp_path / "b" / "bounds_summary.txt").read_text()
    assert "violation rate" in text and "delta" in text


def test_report_two_regimes_has_delta_verdict(tmp_path):
    fine = parse_config(SMALL)
    large = parse_config(SMALL.replace("regime = fine_grained", "regime = large_scale"))
    m1 = run_figure(fine, "gamma_sweep", tmp_path / "fine", [1, 2])
    m2 = run_figure(large, "gamma_sweep", tmp_path / "large", [1, 2])
    run_report([m1, m2], tmp_path / "rep")
    header, rows = read_csv(tmp_path / "rep" / "deltas.csv")
    assert header == ["regime", "delta_val_acc"]
    assert [r[0] for r in rows] == ["fine_grained", "large_scale"]
    text = (tmp_path / "rep" / "report.txt").read_text()
    assert "fine gain >= large gain:" in text


def test_threaded_figure_matches_serial(small_cfg, tmp_path):
    m1 = run_figure(small_cfg, "gamma_sweep", tmp_path / "serial", [1, 2], threads=1)
    m2 = run_figure(small_cfg, "gamma_sweep", tmp_path / "threaded", [1, 2], threads=4)
    for art in load_manifest(m1).artifacts:
        a = (tmp_path / "serial" / art["path"]).read_bytes()
        b = (tmp_path / "threaded" / art["path"]).read_bytes()
        assert a == b, art["path"]
