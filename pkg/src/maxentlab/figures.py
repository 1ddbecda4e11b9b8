"""Experiment pipelines behind the CLI: synth, train, figures, bounds, report.

Every pipeline takes a resolved ExperimentConfig, runs its arms over the
configured seeds (optionally thread-parallel; results are collected in seed
order so thread count never changes output), writes plot-ready CSVs through
an ArtifactSession, and finishes with a manifest. Training-based pipelines
additionally emit a normalized ``summary.csv`` with one row per (arm, seed),
which is what ``report`` merges across runs.

Dataset streams are fixed functions of the run seed: train and validation
sets use distinct derived seeds, and label corruption has its own stream, so
any two arms at the same seed see identical data.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import VERIFY_CSV_HEADER, uniform_model_sampler, verify_bound
from .checkpoint import save_checkpoint
from .configio import ExperimentConfig, resolve_mixture, serialize_config, serialize_mixture
from .csvio import csv_text, read_csv
from .datasets import LabeledDataset, dataset_csv_lines
from .diversity import empirical_diversity, spectrum_csv_rows, spectrum_tail_mass, top_principal_components
from .errors import ManifestError, ValidationError
from .manifest import ArtifactSession, load_manifest
from .mixtures import GaussianMixture, sample
from .training import (
    HISTORY_CSV_HEADER,
    SWEEP_CSV_HEADER,
    EvalReport,
    TrainConfig,
    TrainHistory,
    evaluate,
    init_model,
    inject_label_noise,
    train,
)

SUMMARY_CSV_NAME = "summary.csv"
SUMMARY_CSV_HEADER = (
    "regime,figure,objective,gamma,epsilon,noise_fraction,data_fraction,seed,"
    "val_acc,val_ce,val_entropy,train_ce,train_entropy,top_prob_mean,w_l2,tail_mass"
)

FIGURE_KINDS = (
    "pc_scatter",
    "spectrum",
    "top_prob_hist",
    "gamma_sweep",
    "noise_sweep",
    "ce_vs_val",
    "data_fraction_sweep",
    "lsr_compare",
)


def train_dataset_seed(seed: int) -> int:
    return seed * 1000 + 1


def val_dataset_seed(seed: int) -> int:
    return seed * 1000 + 2


def noise_seed(seed: int) -> int:
    return seed * 77 + 5


@dataclass(eq=False)
class ArmResult:
    regime: str
    figure: str
    objective: str
    gamma: float
    epsilon: float | None
    noise_fraction: float
    data_fraction: float
    seed: int
    history: TrainHistory
    model: object
    val_report: EvalReport
    tail_mass: float | None = None

    def summary_row(self) -> tuple:
        return (
            self.regime,
            self.figure,
            self.objective,
            self.gamma,
            self.epsilon,
            self.noise_fraction,
            self.data_fraction,
            self.seed,
            self.val_report.accuracy,
            self.val_report.mean_ce,
            self.val_report.mean_entropy,
            self.history.final.train_ce,
            self.history.final.train_entropy,
            self.val_report.top_prob_mean,
            float(np.linalg.norm(self.model.weights)),
            self.tail_mass,
        )


def make_datasets(
    mixture: GaussianMixture, cfg: ExperimentConfig, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    tr = sample(mixture, cfg.train_n, seed=train_dataset_seed(seed))
    va = sample(mixture, cfg.val_n, seed=val_dataset_seed(seed))
    return tr, va


def run_arm(
    mixture: GaussianMixture,
    cfg: ExperimentConfig,
    figure: str,
    seed: int,
    objective: str = "maxent",
    gamma: float | None = None,
    epsilon: float | None = None,
    noise_fraction: float = 0.0,
    data_fraction: float = 1.0,
    regime: str | None = None,
) -> ArmResult:
    """One training run; all arms at a given seed share datasets."""
    tr, va = make_datasets(mixture, cfg, seed)
    if noise_fraction > 0:
        tr = inject_label_noise(tr, noise_fraction, seed=noise_seed(seed))
    if data_fraction < 1.0:
        tr = tr.subset(np.arange(int(np.floor(data_fraction * tr.size))))
    tc = cfg.train
    effective_gamma = tc.gamma if gamma is None else float(gamma)
    effective_eps = tc.lsr_epsilon if epsilon is None else float(epsilon)
    run_cfg = dataclasses.replace(
        tc, objective=objective, gamma=effective_gamma, lsr_epsilon=effective_eps, seed=seed
    )
    model0 = init_model(
        mixture.count,
        mixture.dim,
        mixture.dim,
        run_cfg.init_scale,
        seed,
        with_feature_map=run_cfg.train_feature_map,
    )
    trained, history = train(model0, tr, va, run_cfg)
    report = evaluate(trained, va)
    tail = None
    if trained.feature_map is not None:
        feats = va.features @ trained.feature_map.T
        tail = spectrum_tail_mass(empirical_diversity(feats), max(1, mixture.dim // 4))
    return ArmResult(
        regime=regime or cfg.regime,
        figure=figure,
        objective=objective if objective != "maxent" or effective_gamma > 0 else "ce",
        gamma=effective_gamma if objective == "maxent" else 0.0,
        epsilon=effective_eps if objective == "lsr" else None,
        noise_fraction=noise_fraction,
        data_fraction=data_fraction,
        seed=seed,
        history=history,
        model=trained,
        val_report=report,
        tail_mass=tail,
    )


def _parallel(tasks, threads: int):
    """Run no-arg callables, preserving order regardless of thread count."""
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def _open_session(cfg: ExperimentConfig, out_dir: Path, command: str) -> ArtifactSession:
    return ArtifactSession(out_dir, command, serialize_config(cfg), __version__)


def _write_summary(session: ArtifactSession, results: list[ArmResult]) -> None:
    session.write_text(
        SUMMARY_CSV_NAME, csv_text(SUMMARY_CSV_HEADER, [r.summary_row() for r in results])
    )


def _median(values) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def run_synth(cfg: ExperimentConfig, out_dir: Path, seeds, threads: int = 1) -> Path:
    mixture = resolve_mixture(cfg)
    session = _open_session(cfg, out_dir, "synth")
    try:
        session.write_text("mixture.txt", serialize_mixture(mixture))
        for seed in seeds:
            tr, va = make_datasets(mixture, cfg, seed)
            session.write_text(f"train_seed{seed}.csv", "\n".join(dataset_csv_lines(tr)) + "\n")
            session.write_text(f"val_seed{seed}.csv", "\n".join(dataset_csv_lines(va)) + "\n")
        session.mark_stage("synth")
        return session.finish()
    except BaseException:
        session.abort()
        raise


def run_train(cfg: ExperimentConfig, out_dir: Path, seeds, threads: int = 1) -> Path:
    mixture = resolve_mixture(cfg)
    session = _open_session(cfg, out_dir, "train")
    try:
        session.write_text("mixture.txt", serialize_mixture(mixture))
        tasks = [
            (lambda s=seed: run_arm(mixture, cfg, "train", s, objective=cfg.train.objective))
            for seed in seeds
        ]
        results = _parallel(tasks, threads)
        session.mark_stage("train")
        for res in results:
            session.write_text(
                f"history_seed{res.seed}.csv",
                csv_text(HISTORY_CSV_HEADER, res.history.csv_rows()),
            )
            save_checkpoint(res.model, session.path(f"model_seed{res.seed}.ckpt"))
        _write_summary(session, results)
        session.mark_stage("write")
        return session.finish()
    except BaseException:
        session.abort()
        raise


def run_figure(cfg: ExperimentConfig, kind: str, out_dir: Path, seeds, threads: int = 1) -> Path:
    if kind not in FIGURE_KINDS:
        raise ValidationError(f"unknown figure kind {kind!r}", field="figure")
    session = _open_session(cfg, out_dir, f"figure {kind}")
    try:
        runner = globals()[f"_figure_{kind}"]
        runner(cfg, session, list(seeds), threads)
        return session.finish()
    except BaseException:
        session.abort()
        raise


def _figure_pc_scatter(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    """Top-2 principal components of both regimes in one shared basis."""
    from .fixtures import make_regime_fixtures

    fine, large = make_regime_fixtures(cfg.fixture_seed, cfg.dim, cfg.components)
    seed = seeds[0]
    fine_ds = sample(fine, cfg.val_n, seed=val_dataset_seed(seed))
    large_ds = sample(large, cfg.val_n, seed=val_dataset_seed(seed) + 1)
    pooled = np.vstack([fine_ds.features, large_ds.features])
    projected, ratios = top_principal_components(pooled, 2)
    split = fine_ds.size
    for name, block, labels in (
        ("pc_scatter_fine.csv", projected[:split], fine_ds.labels),
        ("pc_scatter_large.csv", projected[split:], large_ds.labels),
    ):
        rows = [(float(p[0]), float(p[1]), int(lab)) for p, lab in zip(block, labels)]
        session.write_text(name, csv_text("pc1,pc2,label", rows))
    stats_rows = []
    for regime, block in (("fine_grained", projected[:split]), ("large_scale", projected[split:])):
        plane_var = float(block.var(axis=0).sum())
        stats_rows.append((regime, plane_var, float(ratios[0]), float(ratios[1])))
    session.write_text(
        "pc_summary.csv", csv_text("regime,plane_variance,ratio_pc1,ratio_pc2", stats_rows)
    )
    session.write_text(SUMMARY_CSV_NAME, csv_text(SUMMARY_CSV_HEADER, []))
    session.mark_stage("pc_scatter")


def _figure_spectrum(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    """Eigenvalue spectra of learned features: untrained vs gamma=0 vs gamma=1."""
    if not cfg.train.train_feature_map:
        raise ValidationError(
            "spectrum figure requires train.train_feature_map = true", field="train.train_feature_map"
        )
    mixture = resolve_mixture(cfg)
    session.write_text("mixture.txt", serialize_mixture(mixture))

    def arm(seed: int, gamma: float) -> ArmResult:
        return run_arm(mixture, cfg, "spectrum", seed, objective="maxent", gamma=gamma)

    tasks = []
    for seed in seeds:
        tasks.append(lambda s=seed: arm(s, 0.0))
        tasks.append(lambda s=seed: arm(s, cfg.train.gamma))
    results = _parallel(tasks, threads)
    session.mark_stage("train")

    k = max(1, cfg.dim // 4)
    all_rows: list[ArmResult] = []
    tail_by_arm: dict[str, list[float]] = {"none": [], "ce": [], "maxent": []}
    for seed in seeds:
        va = sample(mixture, cfg.val_n, seed=val_dataset_seed(seed))
        raw_rep = empirical_diversity(va.features)
        session.write_text(
            f"spectrum_none_seed{seed}.csv",
            csv_text("rank,eigenvalue,log_eigenvalue", spectrum_csv_rows(raw_rep)),
        )
        tail_by_arm["none"].append(spectrum_tail_mass(raw_rep, k))
    for res in results:
        label = "ce" if res.gamma == 0.0 else "maxent"
        feats = sample(mixture, cfg.val_n, seed=val_dataset_seed(res.seed)).features
        rep = empirical_diversity(feats @ res.model.feature_map.T)
        session.write_text(
            f"spectrum_{label}_seed{res.seed}.csv",
            csv_text("rank,eigenvalue,log_eigenvalue", spectrum_csv_rows(rep)),
        )
        tail_by_arm[label].append(spectrum_tail_mass(rep, k))
        all_rows.append(res)
    med_rows = [(arm, k, _median(tails)) for arm, tails in tail_by_arm.items() if tails]
    session.write_text("spectrum_tails.csv", csv_text("arm,k,median_tail_mass", med_rows))
    _write_summary(session, all_rows)
    session.mark_stage("write")


def _two_gamma_results(
    cfg: ExperimentConfig, figure: str, seeds, threads, mixture=None
) -> list[ArmResult]:
    mixture = resolve_mixture(cfg) if mixture is None else mixture
    tasks = []
    for seed in seeds:
        tasks.append(lambda s=seed: run_arm(mixture, cfg, figure, s, gamma=0.0))
        tasks.append(lambda s=seed: run_arm(mixture, cfg, figure, s, gamma=cfg.train.gamma))
    return _parallel(tasks, threads)


def _figure_top_prob_hist(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    results = _two_gamma_results(cfg, "top_prob_hist", seeds, threads)
    session.mark_stage("train")
    edges = np.linspace(0.0, 1.0, 21)
    for res in results:
        label = "ce" if res.gamma == 0.0 else "maxent"
        rows = [
            (float(edges[i]), float(edges[i + 1]), int(c))
            for i, c in enumerate(res.val_report.top_prob_histogram)
        ]
        session.write_text(
            f"top_prob_hist_{label}_seed{res.seed}.csv", csv_text("bin_lo,bin_hi,count", rows)
        )
    med = [
        (label, _median([r.val_report.top_prob_mean for r in results if (r.gamma == 0.0) == (label == "ce")]))
        for label in ("ce", "maxent")
    ]
    session.write_text("top_prob_means.csv", csv_text("arm,median_top_prob_mean", med))
    _write_summary(session, results)
    session.mark_stage("write")


def _figure_gamma_sweep(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    mixture = resolve_mixture(cfg)
    tasks = []
    for seed in seeds:
        for gamma in cfg.gammas:
            tasks.append(lambda s=seed, g=gamma: run_arm(mixture, cfg, "gamma_sweep", s, gamma=g))
    results = _parallel(tasks, threads)
    session.mark_stage("train")
    per_seed: dict[int, list[ArmResult]] = {}
    for res in results:
        per_seed.setdefault(res.seed, []).append(res)
    for seed, arm_list in per_seed.items():
        rows = [
            (r.gamma, r.val_report.accuracy, r.val_report.mean_entropy, float(np.linalg.norm(r.model.weights)))
            for r in arm_list
        ]
        session.write_text(f"sweep_seed{seed}.csv", csv_text(SWEEP_CSV_HEADER, rows))
    med_rows = []
    for gamma in cfg.gammas:
        sel = [r for r in results if r.gamma == gamma]
        med_rows.append(
            (
                gamma,
                _median([r.val_report.accuracy for r in sel]),
                _median([r.val_report.mean_entropy for r in sel]),
                _median([float(np.linalg.norm(r.model.weights)) for r in sel]),
            )
        )
    session.write_text("sweep_medians.csv", csv_text(SWEEP_CSV_HEADER, med_rows))
    _write_summary(session, results)
    session.mark_stage("write")


def _figure_noise_sweep(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    mixture = resolve_mixture(cfg)
    tasks = []
    for seed in seeds:
        for frac in cfg.noise_fractions:
            for gamma in (0.0, cfg.train.gamma):
                tasks.append(
                    lambda s=seed, f=frac, g=gamma: run_arm(
                        mixture, cfg, "noise_sweep", s, gamma=g, noise_fraction=f
                    )
                )
    results = _parallel(tasks, threads)
    session.mark_stage("train")
    med_rows = []
    for frac in cfg.noise_fractions:
        for gamma in (0.0, cfg.train.gamma):
            sel = [r for r in results if r.noise_fraction == frac and r.gamma == gamma]
            med_rows.append((frac, gamma, _median([r.val_report.accuracy for r in sel])))
    session.write_text("noise_medians.csv", csv_text("noise_fraction,gamma,median_val_acc", med_rows))
    _write_summary(session, results)
    session.mark_stage("write")


def _figure_ce_vs_val(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    results = _two_gamma_results(cfg, "ce_vs_val", seeds, threads)
    session.mark_stage("train")
    for res in results:
        label = "ce" if res.gamma == 0.0 else "maxent"
        session.write_text(
            f"history_{label}_seed{res.seed}.csv",
            csv_text(HISTORY_CSV_HEADER, res.history.csv_rows()),
        )
    _write_summary(session, results)
    session.mark_stage("write")


def _figure_data_fraction_sweep(
    cfg: ExperimentConfig, session: ArtifactSession, seeds, threads
) -> None:
    mixture = resolve_mixture(cfg)
    tasks = []
    for seed in seeds:
        for frac in cfg.data_fractions:
            tasks.append(
                lambda s=seed, f=frac: run_arm(
                    mixture, cfg, "data_fraction_sweep", s, gamma=cfg.train.gamma, data_fraction=f
                )
            )
    results = _parallel(tasks, threads)
    session.mark_stage("train")
    med_rows = [
        (
            frac,
            _median([r.val_report.accuracy for r in results if r.data_fraction == frac]),
        )
        for frac in cfg.data_fractions
    ]
    session.write_text("data_fraction_medians.csv", csv_text("data_fraction,median_val_acc", med_rows))
    _write_summary(session, results)
    session.mark_stage("write")


def _figure_lsr_compare(cfg: ExperimentConfig, session: ArtifactSession, seeds, threads) -> None:
    mixture = resolve_mixture(cfg)
    tasks = []
    for seed in seeds:
        tasks.append(lambda s=seed: run_arm(mixture, cfg, "lsr_compare", s, gamma=0.0))
        tasks.append(lambda s=seed: run_arm(mixture, cfg, "lsr_compare", s, gamma=cfg.train.gamma))
        tasks.append(lambda s=seed: run_arm(mixture, cfg, "lsr_compare", s, objective="lsr"))
    results = _parallel(tasks, threads)
    session.mark_stage("train")
    acc = {
        label: _median([r.val_report.accuracy for r in results if r.objective == label])
        for label in ("ce", "maxent", "lsr")
    }
    rows = [
        ("ce", acc["ce"], 0.0),
        ("maxent", acc["maxent"], acc["maxent"] - acc["ce"]),
        ("lsr", acc["lsr"], acc["lsr"] - acc["ce"]),
    ]
    session.write_text("lsr_compare.csv", csv_text("objective,median_val_acc,gain_over_ce", rows))
    _write_summary(session, results)
    session.mark_stage("write")


def run_bounds_verify(cfg: ExperimentConfig, out_dir: Path, seeds, threads: int = 1) -> Path:
    mixture = resolve_mixture(cfg)
    session = _open_session(cfg, out_dir, "bounds verify")
    base_seed = seeds[0]
    try:
        session.write_text("mixture.txt", serialize_mixture(mixture))
        sampler = uniform_model_sampler(mixture.count, mixture.dim, cfg.bounds_scales)
        verify_rows = []
        summary_rows = []
        lines = []
        jobs = []
        for kind in cfg.bounds_kinds:
            counts = [cfg.bounds_sample_counts[0]] if kind == "weight_norm" else cfg.bounds_sample_counts
            for n in counts:
                jobs.append((kind, n))

        def one(kind: str, n: int):
            return verify_bound(
                kind,
                mixture,
                sampler,
                sample_count=n,
                delta=cfg.delta,
                trials=cfg.bounds_trials,
                seed=base_seed,
                entropy_draws=cfg.bounds_entropy_draws,
            )

        summaries = _parallel([lambda k=k, n=n: one(k, n) for k, n in jobs], threads)
        session.mark_stage("verify")
        for summary in summaries:
            for row in summary.rows:
                verify_rows.append(
                    (row.trial, row.kind, row.observed, row.bound, row.margin, row.violated)
                )
            summary_rows.append(
                (
                    summary.kind,
                    summary.sample_count,
                    summary.trials,
                    summary.violation_count,
                    summary.violation_rate,
                    summary.delta,
                    summary.worst_margin,
                    summary.inapplicable_count,
                )
            )
            lines.append(
                f"{summary.kind} N={summary.sample_count}: violation rate "
                f"{summary.violation_rate:.4f} vs delta {summary.delta} "
                f"(worst margin {summary.worst_margin:.6g})"
            )
            if "exact_denominator" in summary.extras:
                lines.append(
                    f"  empirical-bound denominators at N={summary.sample_count}: "
                    f"exact {summary.extras['exact_denominator']:.6g}, "
                    f"asymptotic {summary.extras['asymptotic_denominator']:.6g}"
                )
        session.write_text("verify.csv", csv_text(VERIFY_CSV_HEADER, verify_rows))
        session.write_text(
            "bounds_summary.csv",
            csv_text(
                "kind,sample_count,trials,violations,rate,delta,worst_margin,inapplicable",
                summary_rows,
            ),
        )
        session.write_text("bounds_summary.txt", "\n".join(lines) + "\n")
        session.mark_stage("write")
        return session.finish()
    except BaseException:
        session.abort()
        raise


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def run_report(manifest_paths, out_dir: Path) -> Path:
    """Merge training summaries from verified manifests into one report."""
    manifests = []
    seen = set()
    for p in manifest_paths:
        man = load_manifest(Path(p), verify=True)
        digest = man.digest()
        if digest in seen:
            continue
        seen.add(digest)
        manifests.append((Path(p).parent, man))
    if not manifests:
        raise ManifestError("no manifests given")

    rows = []
    for base, man in manifests:
        names = {a["path"] for a in man.artifacts}
        if SUMMARY_CSV_NAME not in names:
            continue
        header, raw = read_csv(base / SUMMARY_CSV_NAME)
        if ",".join(header) != SUMMARY_CSV_HEADER:
            raise ManifestError(f"{base}: unexpected summary header")
        rows.extend(raw)
    if not rows:
        raise ManifestError("no summary rows found in the given manifests")

    session = ArtifactSession(out_dir, "report", "", __version__)
    try:
        session.write_text(SUMMARY_CSV_NAME, csv_text(SUMMARY_CSV_HEADER, rows))

        def col(row, name):
            return row[SUMMARY_CSV_HEADER.split(",").index(name)]

        groups: dict[tuple, list[float]] = {}
        for row in rows:
            key = (col(row, "regime"), col(row, "objective"), col(row, "gamma"))
            if col(row, "noise_fraction") not in ("0.0", "0", "") or col(row, "data_fraction") not in ("1.0", "1", ""):
                continue
            groups.setdefault(key, []).append(float(col(row, "val_acc")))
        agg_rows = [
            (k[0], k[1], k[2], len(v), _median(v), float(np.min(v)), float(np.max(v)))
            for k, v in sorted(groups.items())
        ]
        session.write_text(
            "report.csv",
            csv_text("regime,objective,gamma,runs,median_val_acc,min_val_acc,max_val_acc", agg_rows),
        )

        deltas = {}
        for regime in ("fine_grained", "large_scale"):
            base_accs = [v for k, v in groups.items() if k[0] == regime and k[1] == "ce"]
            maxent_accs = [v for k, v in groups.items() if k[0] == regime and k[1] == "maxent"]
            if base_accs and maxent_accs:
                deltas[regime] = _median(sum(maxent_accs, [])) - _median(sum(base_accs, []))
        lines = ["regime, objective, gamma, runs, median val acc"]
        for row in agg_rows:
            lines.append(f"{row[0]:>13} {row[1]:>7} gamma={row[2]:>4} n={row[3]:>2} acc={row[4]:.4f}")
        delta_rows = [(regime, delta) for regime, delta in sorted(deltas.items())]
        if delta_rows:
            session.write_text("deltas.csv", csv_text("regime,delta_val_acc", delta_rows))
            for regime, delta in delta_rows:
                lines.append(f"delta({regime}) = {delta:+.4f}")
            if "fine_grained" in deltas and "large_scale" in deltas:
                ok = deltas["fine_grained"] >= deltas["large_scale"]
                lines.append(f"fine gain >= large gain: {'pass' if ok else 'fail'}")
        session.write_text("report.txt", "\n".join(lines) + "\n")
        return session.finish()
    except BaseException:
        session.abort()
        raise
