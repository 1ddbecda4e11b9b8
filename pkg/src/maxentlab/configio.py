"""Experiment configuration: sectioned key=value text, parsed strictly.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` starts a comment
anywhere, blank lines ignored. Unknown sections or keys are errors, never
silently ignored. Every key has a default, so the empty string parses to the
default experiment.

    [experiment]                      [train]
    regime = fine_grained             gamma = 1.0
    train_n = 200                     objective = maxent      # maxent|ce|lsr
    val_n = 5000                      lsr_epsilon = 0.1
    out_dir =                         lr = linear:0.3          # constant:B | step:B:F:I | linear:B
    seeds = 1,2,3,4,5,6               weight_decay = 0.0
    delta = 0.1                       batch_size = 32
                                      epochs = 150
    [mixture]                         train_feature_map = false
    source = fixture                  init_scale = 0.0
    fixture_seed = 7
    dim = 16                          [sweep]
    components = 10                   gammas = 0,0.5,1
                                      noise_fractions = 0,0.1,0.2,0.3
    [bounds]                          data_fractions = 0.25,0.5,1.0
    kinds = weight_norm,entropy_deviation,empirical_weight_norm
    trials = 1000
    sample_counts = 100,1000,10000
    entropy_draws = 100000
    scales = 0.1,1.0,10.0

``source`` may also be ``fixture_spectrum`` (the trainable-feature-map
mixture) or ``file:PATH`` pointing at a mixture definition file:

    dim = 2
    [component]
    weight = 0.5
    mean = 1.0 0.0
    cov = 0.25            # scalar s -> s * I; a vector lists the diagonal
    [component]
    weight = 0.5
    mean = -1.0 0.0
    cov_row = 0.25 0.0    # or n rows of the full matrix
    cov_row = 0.0 0.25
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .fixtures import make_regime_fixtures, make_spectrum_fixture
from .mixtures import GaussianMixture, validate
from .training import LrSchedule, TrainConfig

REGIMES = ("fine_grained", "large_scale")


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str = "fine_grained"
    train_n: int = 200
    val_n: int = 5000
    out_dir: str = ""
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    delta: float = 0.1
    mixture_source: str = "fixture"
    fixture_seed: int = 7
    dim: int = 16
    components: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)
    gammas: tuple[float, ...] = (0.0, 0.5, 1.0)
    noise_fractions: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    data_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    bounds_kinds: tuple[str, ...] = ("weight_norm", "entropy_deviation", "empirical_weight_norm")
    bounds_trials: int = 1000
    bounds_sample_counts: tuple[int, ...] = (100, 1000, 10000)
    bounds_entropy_draws: int = 100_000
    bounds_scales: tuple[float, ...] = (0.1, 1.0, 10.0)


def _split_lines(text: str):
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line_no, line


def _parse_sections(text: str) -> list[tuple[int, str, str, str]]:
    """(line_no, section, key, value) tuples; section '[component]' may repeat."""
    out = []
    section = None
    for line_no, line in _split_lines(text):
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out.append((line_no, section, "", ""))
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError(f"missing key before '=' in {line!r}", line_no)
        if section is None:
            section = ""
        out.append((line_no, section, key, value))
    return out


def _as_int(value: str, line_no: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"expected an integer, got {value!r}", line_no) from None


def _as_float(value: str, line_no: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"expected a number, got {value!r}", line_no) from None


def _as_bool(value: str, line_no: int) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ParseError(f"expected true/false, got {value!r}", line_no)


def _as_float_list(value: str, line_no: int) -> tuple[float, ...]:
    if not value.strip():
        raise ParseError("expected a comma-separated list", line_no)
    return tuple(_as_float(v.strip(), line_no) for v in value.split(","))


def _as_int_list(value: str, line_no: int) -> tuple[int, ...]:
    if not value.strip():
        raise ParseError("expected a comma-separated list", line_no)
    return tuple(_as_int(v.strip(), line_no) for v in value.split(","))


def _as_str_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_lr(value: str, line_no: int = 0) -> LrSchedule:
    parts = value.split(":")
    kind = parts[0].strip()
    if kind == "constant" and len(parts) == 2:
        return LrSchedule("constant", _as_float(parts[1], line_no))
    if kind == "linear" and len(parts) == 2:
        return LrSchedule("linear", _as_float(parts[1], line_no))
    if kind == "step" and len(parts) == 4:
        return LrSchedule(
            "step", _as_float(parts[1], line_no), _as_float(parts[2], line_no), _as_int(parts[3], line_no)
        )
    raise ParseError(
        f"lr must be constant:B, linear:B or step:B:F:I, got {value!r}", line_no
    )


def serialize_lr(lr: LrSchedule) -> str:
    if lr.kind == "step":
        return f"step:{lr.base!r}:{lr.factor!r}:{lr.interval}"
    return f"{lr.kind}:{lr.base!r}"


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    cfg = ExperimentConfig()
    train = cfg.train
    fields: dict[str, object] = {}

    for line_no, section, key, value in _parse_sections(text):
        if key == "":
            if section not in ("experiment", "mixture", "train", "sweep", "bounds"):
                raise ValidationError(f"unknown section [{section}]", field=section)
            continue
        slot = f"{section}.{key}"
        if slot == "experiment.regime":
            if value not in REGIMES:
                raise ValidationError(f"regime must be one of {REGIMES}, got {value!r}", field=slot)
            fields["regime"] = value
        elif slot == "experiment.train_n":
            fields["train_n"] = _as_int(value, line_no)
        elif slot == "experiment.val_n":
            fields["val_n"] = _as_int(value, line_no)
        elif slot == "experiment.out_dir":
            fields["out_dir"] = value
        elif slot == "experiment.seeds":
            fields["seeds"] = _as_int_list(value, line_no)
        elif slot == "experiment.delta":
            fields["delta"] = _as_float(value, line_no)
        elif slot == "mixture.source":
            fields["mixture_source"] = value
        elif slot == "mixture.fixture_seed":
            fields["fixture_seed"] = _as_int(value, line_no)
        elif slot == "mixture.dim":
            fields["dim"] = _as_int(value, line_no)
        elif slot == "mixture.components":
            fields["components"] = _as_int(value, line_no)
        elif slot == "train.gamma":
            train = replace(train, gamma=_as_float(value, line_no))
        elif slot == "train.objective":
            train = replace(train, objective=value)
        elif slot == "train.lsr_epsilon":
            train = replace(train, lsr_epsilon=_as_float(value, line_no))
        elif slot == "train.lr":
            train = replace(train, lr=parse_lr(value, line_no))
        elif slot == "train.weight_decay":
            train = replace(train, weight_decay=_as_float(value, line_no))
        elif slot == "train.batch_size":
            train = replace(train, batch_size=_as_int(value, line_no))
        elif slot == "train.epochs":
            train = replace(train, epochs=_as_int(value, line_no))
        elif slot == "train.train_feature_map":
            train = replace(train, train_feature_map=_as_bool(value, line_no))
        elif slot == "train.init_scale":
            train = replace(train, init_scale=_as_float(value, line_no))
        elif slot == "sweep.gammas":
            fields["gammas"] = _as_float_list(value, line_no)
        elif slot == "sweep.noise_fractions":
            fields["noise_fractions"] = _as_float_list(value, line_no)
        elif slot == "sweep.data_fractions":
            fields["data_fractions"] = _as_float_list(value, line_no)
        elif slot == "bounds.kinds":
            fields["bounds_kinds"] = _as_str_list(value)
        elif slot == "bounds.trials":
            fields["bounds_trials"] = _as_int(value, line_no)
        elif slot == "bounds.sample_counts":
            fields["bounds_sample_counts"] = _as_int_list(value, line_no)
        elif slot == "bounds.entropy_draws":
            fields["bounds_entropy_draws"] = _as_int(value, line_no)
        elif slot == "bounds.scales":
            fields["bounds_scales"] = _as_float_list(value, line_no)
        else:
            raise ValidationError(f"unknown key {key!r} in section [{section}]", field=slot)

    cfg = replace(cfg, train=train.validated(), **fields)
    _validate_config(cfg, Path(base_dir))
    return cfg


def _validate_config(cfg: ExperimentConfig, base_dir: Path) -> None:
    if cfg.train_n < 1 or cfg.val_n < 0:
        raise ValidationError(
            f"train_n must be >= 1 and val_n >= 0, got {cfg.train_n}, {cfg.val_n}", field="experiment"
        )
    if not cfg.seeds:
        raise ValidationError("seed list may not be empty", field="experiment.seeds")
    if not 0.0 < cfg.delta < 0.5:
        raise ValidationError(f"delta must lie in (0, 0.5), got {cfg.delta}", field="experiment.delta")
    src = cfg.mixture_source
    if src not in ("fixture", "fixture_spectrum") and not src.startswith("file:"):
        raise ValidationError(
            f"mixture source must be fixture, fixture_spectrum or file:PATH, got {src!r}",
            field="mixture.source",
        )
    if src.startswith("file:"):
        path = base_dir / src[len("file:") :]
        if not path.is_file():
            raise ValidationError(f"mixture file not found: {path}", field="mixture.source")
    for kind in cfg.bounds_kinds:
        if kind not in ("weight_norm", "entropy_deviation", "empirical_weight_norm"):
            raise ValidationError(f"unknown bound kind {kind!r}", field="bounds.kinds")
    for frac in cfg.noise_fractions + cfg.data_fractions:
        if not 0.0 <= frac <= 1.0:
            raise ValidationError(f"fractions must lie in [0, 1], got {frac}", field="sweep")
    if any(g < 0 for g in cfg.gammas):
        raise ValidationError("gammas must be >= 0", field="sweep.gammas")


def serialize_config(cfg: ExperimentConfig) -> str:
    t = cfg.train
    lines = [
        "[experiment]",
        f"regime = {cfg.regime}",
        f"train_n = {cfg.train_n}",
        f"val_n = {cfg.val_n}",
        f"out_dir = {cfg.out_dir}",
        "seeds = " + ",".join(str(s) for s in cfg.seeds),
        f"delta = {cfg.delta!r}",
        "",
        "[mixture]",
        f"source = {cfg.mixture_source}",
        f"fixture_seed = {cfg.fixture_seed}",
        f"dim = {cfg.dim}",
        f"components = {cfg.components}",
        "",
        "[train]",
        f"gamma = {t.gamma!r}",
        f"objective = {t.objective}",
        f"lsr_epsilon = {t.lsr_epsilon!r}",
        f"lr = {serialize_lr(t.lr)}",
        f"weight_decay = {t.weight_decay!r}",
        f"batch_size = {t.batch_size}",
        f"epochs = {t.epochs}",
        f"train_feature_map = {'true' if t.train_feature_map else 'false'}",
        f"init_scale = {t.init_scale!r}",
        "",
        "[sweep]",
        "gammas = " + ",".join(repr(g) for g in cfg.gammas),
        "noise_fractions = " + ",".join(repr(f) for f in cfg.noise_fractions),
        "data_fractions = " + ",".join(repr(f) for f in cfg.data_fractions),
        "",
        "[bounds]",
        "kinds = " + ",".join(cfg.bounds_kinds),
        f"trials = {cfg.bounds_trials}",
        "sample_counts = " + ",".join(str(n) for n in cfg.bounds_sample_counts),
        f"entropy_draws = {cfg.bounds_entropy_draws}",
        "scales = " + ",".join(repr(s) for s in cfg.bounds_scales),
    ]
    return "\n".join(lines) + "\n"


def resolve_mixture(cfg: ExperimentConfig, base_dir: str | Path = ".") -> GaussianMixture:
    """The mixture this experiment samples from, per regime and source."""
    if cfg.mixture_source == "fixture":
        fine, large = make_regime_fixtures(cfg.fixture_seed, cfg.dim, cfg.components)
        return fine if cfg.regime == "fine_grained" else large
    if cfg.mixture_source == "fixture_spectrum":
        return make_spectrum_fixture(cfg.fixture_seed, cfg.dim, cfg.components)
    path = Path(base_dir) / cfg.mixture_source[len("file:") :]
    return parse_mixture(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Mixture definition files
# ---------------------------------------------------------------------------


def parse_mixture(text: str) -> GaussianMixture:
    dim = None
    components: list[dict] = []
    current: dict | None = None

    def finish(line_no: int) -> None:
        if current is None:
            return
        for need in ("weight", "mean"):
            if need not in current:
                raise ParseError(f"component missing {need!r}", line_no)
        if "cov" not in current and "cov_rows" not in current:
            raise ParseError("component missing cov or cov_row lines", line_no)
        components.append(current)

    last_line = 0
    for line_no, section, key, value in _parse_sections(text):
        last_line = line_no
        if key == "":
            if section != "component":
                raise ValidationError(f"unknown section [{section}] in mixture file", field=section)
            finish(line_no)
            current = {}
            continue
        if current is None:
            if key == "dim":
                dim = _as_int(value, line_no)
                continue
            raise ValidationError(f"unknown key {key!r} before first component", field=key)
        if key == "weight":
            current["weight"] = _as_float(value, line_no)
        elif key == "mean":
            current["mean"] = [_as_float(v, line_no) for v in value.split()]
        elif key == "cov":
            current["cov"] = [_as_float(v, line_no) for v in value.split()]
        elif key == "cov_row":
            current.setdefault("cov_rows", []).append([_as_float(v, line_no) for v in value.split()])
        else:
            raise ValidationError(f"unknown key {key!r} in [component]", field=key)
    finish(last_line)

    if dim is None:
        raise ParseError("mixture file must declare dim", None)
    if not components:
        raise ParseError("mixture file has no components", None)

    weights, means, covs = [], [], []
    for comp in components:
        weights.append(comp["weight"])
        mean = comp["mean"]
        if len(mean) != dim:
            raise ValidationError(f"mean has {len(mean)} entries, dim is {dim}", field="mean")
        means.append(mean)
        if "cov_rows" in comp:
            rows = comp["cov_rows"]
            if len(rows) != dim or any(len(r) != dim for r in rows):
                raise ValidationError(f"cov_row block must be {dim} rows of {dim}", field="cov_row")
            covs.append(rows)
        else:
            spec = comp["cov"]
            if len(spec) == 1:
                covs.append((spec[0] * np.eye(dim)).tolist())
            elif len(spec) == dim:
                covs.append(np.diag(spec).tolist())
            else:
                raise ValidationError(
                    f"cov must be a scalar or {dim} diagonal entries, got {len(spec)}", field="cov"
                )
    return validate(GaussianMixture(np.array(weights), np.array(means), np.array(covs)))


def serialize_mixture(mixture: GaussianMixture) -> str:
    lines = [f"dim = {mixture.dim}"]
    for i in range(mixture.count):
        lines.append("[component]")
        lines.append(f"weight = {float(mixture.weights[i])!r}")
        lines.append("mean = " + " ".join(repr(float(v)) for v in mixture.means[i]))
        for row in mixture.covariances[i]:
            lines.append("cov_row = " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
