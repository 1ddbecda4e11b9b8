"""Closed-form generalization and concentration bounds, plus Monte-Carlo checks.

All bounds are evaluated in their exact pre-asymptotic form so that every
quantity is computable without hidden constants. With C classes, diversity
nu (total feature variance), squared-norm variance V, N samples and failure
probability delta in (0, 1/2):

  weight-norm lower bound (expected entropy Hbar):
      ||w||_2 >= (ln C - Hbar) / (2 sqrt(nu))

  entropy-deviation bound on |empirical mean entropy - expected entropy|,
  holding with probability >= 1 - delta, for row-norm bound s:
      s * [ sqrt((2/N) nu ln(4/delta))
            + (4 V (2/delta - 1) / N^3)^(1/4) * ln(4/delta) ]

  empirical weight-norm lower bound (empirical mean entropy Hhat), with
  probability >= 1 - delta:
      ||w||_2 >= (ln C - Hhat) / D,
      D = 2 sqrt(nu) - sqrt((2/N) (nu + sqrt(V (2/delta - 1) / N)) ln(2/delta))

  which recovers the expected-entropy bound as N -> infinity. A looser
  asymptotic denominator (2 - sqrt((2/N) ln(2/delta))) sqrt(nu) is exposed
  separately for comparison at small N.

  entropy floor, for any single input with feature norm r:
      H >= ln C - 2 ||w||_inf r   (vacuous when negative, H >= 0 anyway)

The deviation bound is stated for the max row norm ||w||_inf; because
||w||_inf <= ||w||_2, substituting ||w||_2 gives a weaker bound that is
always implied. Verification accounts violations against the ||w||_2 form
and records the ||w||_inf form alongside it.

Tail inequalities: for independent X_i in [a_i, b_i] and mean deviation
t > 0, Pr(mean - E mean >= t) <= exp(-2 n^2 t^2 / sum (b_i - a_i)^2); for a
variable with variance sigma^2 and threshold lam > 0,
Pr(X - E X >= lam) <= sigma^2 / (sigma^2 + lam^2). Both are capped at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._streams import TRIAL, derive_rng
from .core import LinearSoftmaxModel, empirical_mean_entropy, expected_entropy_mc
from .datasets import LabeledDataset
from .diversity import analytic_diversity
from .errors import DomainError
from .mixtures import GaussianMixture, fourth_moment_and_variance, sample

BOUND_KINDS = ("weight_norm", "entropy_deviation", "empirical_weight_norm")


@dataclass(frozen=True)
class BoundQuery:
    """Scalar inputs shared by the bound evaluations."""

    class_count: int
    sample_count: int
    delta: float
    nu: float
    var_sqnorm: float
    w_l2: float
    w_inf: float
    mean_entropy: float
    entropy_source: str = "expected"  # "expected" | "empirical"

    def validated(self) -> "BoundQuery":
        if not 0.0 < self.delta < 0.5:
            raise DomainError(f"delta must lie in (0, 0.5), got {self.delta}")
        if self.nu < 0:
            raise DomainError(f"nu must be >= 0, got {self.nu}")
        if self.var_sqnorm < 0:
            raise DomainError(f"var_sqnorm must be >= 0, got {self.var_sqnorm}")
        if self.w_inf > self.w_l2 * (1 + 1e-12) + 1e-12:
            raise DomainError(f"w_inf={self.w_inf} exceeds w_l2={self.w_l2}")
        if self.sample_count < 1:
            raise DomainError(f"sample_count must be >= 1, got {self.sample_count}")
        return self


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound against the observed quantity; satisfied iff margin >= 0."""

    kind: str
    bound_value: float
    observed: float
    margin: float
    satisfied: bool
    inputs: dict = field(default_factory=dict, hash=False)


def weight_norm_lower_bound(class_count: int, mean_entropy: float, nu: float) -> float:
    """(ln C - mean_entropy) / (2 sqrt(nu)); compare against ||w||_2."""
    if nu <= 0:
        raise DomainError(f"nu must be > 0, got {nu}")
    if class_count < 2:
        raise DomainError(f"need at least 2 classes, got {class_count}")
    log_c = math.log(class_count)
    if not 0.0 <= mean_entropy <= log_c * (1 + 1e-12) + 1e-12:
        raise DomainError(f"mean_entropy {mean_entropy} outside [0, ln {class_count}]")
    return (log_c - mean_entropy) / (2.0 * math.sqrt(nu))


def entropy_deviation_bound(
    weight_scale: float, nu: float, var_sqnorm: float, sample_count: int, delta: float
) -> float:
    """High-probability bound on |empirical - expected| mean entropy.

    ``weight_scale`` is the row-norm bound used (||w||_inf as stated, or
    ||w||_2 for the implied weaker form).
    """
    if sample_count < 1:
        raise DomainError(f"sample_count must be >= 1, got {sample_count}")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 0.5), got {delta}")
    if weight_scale < 0 or nu < 0 or var_sqnorm < 0:
        raise DomainError("weight_scale, nu and var_sqnorm must be >= 0")
    log_term = math.log(4.0 / delta)
    n = float(sample_count)
    first = math.sqrt((2.0 / n) * nu * log_term)
    second = (4.0 * var_sqnorm * (2.0 / delta - 1.0) / n**3) ** 0.25 * log_term
    return weight_scale * (first + second)


def _empirical_denominator(nu: float, var_sqnorm: float, sample_count: int, delta: float) -> float:
    n = float(sample_count)
    inflated = nu + math.sqrt(var_sqnorm * (2.0 / delta - 1.0) / n)
    return 2.0 * math.sqrt(nu) - math.sqrt((2.0 / n) * inflated * math.log(2.0 / delta))


def empirical_weight_norm_lower_bound(
    class_count: int,
    empirical_mean_entropy: float,
    nu: float,
    var_sqnorm: float,
    sample_count: int,
    delta: float,
) -> float:
    """Finite-sample lower bound on ||w||_2 from the empirical mean entropy."""
    if nu <= 0:
        raise DomainError(f"nu must be > 0, got {nu}")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 0.5), got {delta}")
    log_c = math.log(class_count)
    if not 0.0 <= empirical_mean_entropy <= log_c * (1 + 1e-12) + 1e-12:
        raise DomainError(f"entropy {empirical_mean_entropy} outside [0, ln {class_count}]")
    denom = _empirical_denominator(nu, var_sqnorm, sample_count, delta)
    if denom <= 0:
        raise DomainError(
            f"denominator {denom:g} is not positive at N={sample_count}; bound inapplicable"
        )
    return (log_c - empirical_mean_entropy) / denom


def empirical_weight_norm_lower_bound_asymptotic(
    class_count: int,
    empirical_mean_entropy: float,
    nu: float,
    sample_count: int,
    delta: float,
) -> float:
    """Same bound with the loose large-N denominator (2 - sqrt((2/N) ln(2/delta))) sqrt(nu).

    Reported next to the exact form; the two disagree at small N and this
    package does not choose between them.
    """
    if nu <= 0:
        raise DomainError(f"nu must be > 0, got {nu}")
    denom = (2.0 - math.sqrt((2.0 / sample_count) * math.log(2.0 / delta))) * math.sqrt(nu)
    if denom <= 0:
        raise DomainError(f"denominator {denom:g} is not positive; bound inapplicable")
    return (math.log(class_count) - empirical_mean_entropy) / denom


def entropy_floor(w_inf: float, phi_norm: float, class_count: int) -> float:
    """ln C - 2 ||w||_inf ||phi||; may be negative, in which case it is vacuous."""
    if w_inf < 0 or phi_norm < 0:
        raise DomainError("norms must be >= 0")
    if class_count < 2:
        raise DomainError(f"need at least 2 classes, got {class_count}")
    return math.log(class_count) - 2.0 * w_inf * phi_norm


def hoeffding_tail_bound(ranges: np.ndarray, t: float) -> float:
    """Upper-tail bound for the mean of independent bounded variables, capped at 1."""
    r = np.asarray(ranges, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != 2 or r.shape[0] < 1:
        raise DomainError(f"ranges must be (n, 2), got shape {r.shape}")
    if (r[:, 1] < r[:, 0]).any():
        raise DomainError("each range must satisfy a <= b")
    if t <= 0:
        return 1.0
    spread = float(((r[:, 1] - r[:, 0]) ** 2).sum())
    if spread == 0.0:
        return 0.0
    n = r.shape[0]
    return min(1.0, math.exp(-2.0 * n * n * t * t / spread))


def cantelli_tail_bound(variance: float, lam: float) -> float:
    """One-sided Chebyshev bound sigma^2 / (sigma^2 + lam^2) for lam > 0."""
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    if lam <= 0:
        raise DomainError(f"lam must be > 0, got {lam}")
    return variance / (variance + lam * lam)


# ---------------------------------------------------------------------------
# Monte-Carlo verification harness
# ---------------------------------------------------------------------------

ModelSampler = Callable[[int, np.random.Generator], LinearSoftmaxModel]


def _margin_tol(bound: float) -> float:
    return 1e-12 * max(1.0, abs(bound))


def uniform_model_sampler(
    class_count: int, dim: int, scales: tuple[float, ...] = (0.1, 1.0, 10.0)
) -> ModelSampler:
    """Weights uniform in [-s, s], with s cycling through ``scales`` by trial index."""

    def draw(trial: int, rng: np.random.Generator) -> LinearSoftmaxModel:
        s = scales[trial % len(scales)]
        return LinearSoftmaxModel(rng.uniform(-s, s, size=(class_count, dim)))

    return draw


@dataclass(eq=False)
class TrialRow:
    trial: int
    kind: str
    observed: float
    bound: float
    margin: float
    violated: bool
    extra_inf_bound: float | None = None


@dataclass(eq=False)
class VerificationSummary:
    kind: str
    trials: int
    sample_count: int
    delta: float
    violation_count: int
    violation_rate: float
    worst_margin: float
    inapplicable_count: int
    rows: list[TrialRow]
    extras: dict


VERIFY_CSV_HEADER = "trial,theorem,observed,bound,margin,violated"


def verify_bound(
    kind: str,
    mixture: GaussianMixture,
    model_sampler: ModelSampler,
    sample_count: int,
    delta: float,
    trials: int,
    seed: int,
    entropy_draws: int = 100_000,
    guard_sigmas: float = 3.0,
    weight_norm_mode: str = "l2",
    threads: int = 1,
) -> VerificationSummary:
    """Draw (model, dataset) pairs and count violations of the chosen bound.

    weight_norm:            deterministic inequality; the expected entropy is
                            estimated by Monte-Carlo and the observed side is
                            widened by ``guard_sigmas`` standard errors, so
                            the violation rate must be 0.
    entropy_deviation:      probabilistic; rate must stay <= delta. The
                            expected entropy is re-estimated per trial.
    empirical_weight_norm:  probabilistic; rate must stay <= delta. Trials
                            where the denominator is not positive are counted
                            as inapplicable, never as violations.

    Margins within floating-point round-off of zero (1e-12 relative to the
    bound) count as satisfied: the zero-classifier edge meets every bound
    with exact equality.
    """
    if kind not in BOUND_KINDS:
        raise DomainError(f"unknown bound kind {kind!r}")
    if trials < 100:
        raise DomainError(f"trials must be >= 100, got {trials}")
    if weight_norm_mode not in ("l2", "inf"):
        raise DomainError(f"weight_norm_mode must be 'l2' or 'inf', got {weight_norm_mode!r}")
    report = analytic_diversity(mixture)
    nu = report.nu
    _, var_sqnorm = fourth_moment_and_variance(mixture)
    class_count_probe = model_sampler(0, derive_rng(seed, TRIAL, 0)).class_count

    def run_trial(trial: int) -> TrialRow | None:
        rng = derive_rng(seed, TRIAL, trial)
        model = model_sampler(trial, rng)
        extra = None
        if kind == "weight_norm":
            est, se = expected_entropy_mc(
                model, mixture, entropy_draws, int(rng.integers(0, 2**63 - 1))
            )
            bound = weight_norm_lower_bound(
                model.class_count, min(est, math.log(model.class_count)), nu
            )
            observed = model.w_l2()
            guard = guard_sigmas * se / (2.0 * math.sqrt(nu))
            margin = observed + guard - bound
        elif kind == "entropy_deviation":
            data = _features_only(mixture, sample_count, rng)
            emp = float(_mean_entropy_of(model, data))
            est, _ = expected_entropy_mc(
                model, mixture, entropy_draws, int(rng.integers(0, 2**63 - 1))
            )
            observed = abs(emp - est)
            scale = model.w_l2() if weight_norm_mode == "l2" else model.w_inf()
            bound = entropy_deviation_bound(scale, nu, var_sqnorm, sample_count, delta)
            extra = entropy_deviation_bound(model.w_inf(), nu, var_sqnorm, sample_count, delta)
            margin = bound - observed
        else:  # empirical_weight_norm
            data = _features_only(mixture, sample_count, rng)
            emp = float(_mean_entropy_of(model, data))
            try:
                bound = empirical_weight_norm_lower_bound(
                    model.class_count,
                    min(emp, math.log(model.class_count)),
                    nu,
                    var_sqnorm,
                    sample_count,
                    delta,
                )
            except DomainError:
                return None
            observed = model.w_l2()
            margin = observed - bound
        return TrialRow(
            trial, kind, float(observed), float(bound), float(margin),
            bool(margin < -_margin_tol(bound)), extra,
        )

    # trials are independent with per-trial derived streams, so the pool size
    # never changes the report
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_trial, range(trials)))
    else:
        outcomes = [run_trial(t) for t in range(trials)]

    rows = [r for r in outcomes if r is not None]
    inapplicable = sum(1 for r in outcomes if r is None)
    violations = sum(r.violated for r in rows)
    worst = min((r.margin for r in rows), default=math.inf)
    inf_bounds = [r.extra_inf_bound for r in rows if r.extra_inf_bound is not None]

    effective = len(rows)
    extras = {"nu": nu, "var_sqnorm": var_sqnorm, "class_count": class_count_probe}
    if inf_bounds:
        extras["mean_bound_w_inf"] = float(np.mean(inf_bounds))
    if kind == "empirical_weight_norm":
        extras["asymptotic_denominator"] = (
            2.0 - math.sqrt((2.0 / sample_count) * math.log(2.0 / delta))
        ) * math.sqrt(nu)
        extras["exact_denominator"] = _empirical_denominator(nu, var_sqnorm, sample_count, delta)
    return VerificationSummary(
        kind=kind,
        trials=trials,
        sample_count=sample_count,
        delta=delta,
        violation_count=violations,
        violation_rate=violations / effective if effective else 0.0,
        worst_margin=worst,
        inapplicable_count=inapplicable,
        rows=rows,
        extras=extras,
    )


def _features_only(mixture: GaussianMixture, count: int, rng: np.random.Generator) -> np.ndarray:
    from .core import _sample_with_rng

    return _sample_with_rng(mixture, count, rng)


def _mean_entropy_of(model: LinearSoftmaxModel, features: np.ndarray) -> float:
    dataset = LabeledDataset(features, np.zeros(features.shape[0], dtype=np.int64))
    return empirical_mean_entropy(model, dataset)
