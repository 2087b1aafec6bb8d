"""Bootstrap confidence intervals and Monte-Carlo study aggregation.

Replicate seeds are derived from the master seed and the replicate index
before any work is scheduled, so results are identical whether replicates
run sequentially or on a process pool.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .copulas import CopulaFamily, CopulaSpec
from .datagen import GenConfig, SurvivalData, sample_survival_data
from .errors import (
    ConfigError,
    DomainError,
    EstimationError,
    FitError,
    InferenceError,
    MomentError,
    NumericError,
)
from .estimator import EstimateOptions, ProposedEstimator, resolve_region
from .marginals import MarginalSpec

logger = logging.getLogger(__name__)

# A bootstrap or a study cell fails outright once this share of its
# replicates errors; below the threshold failures are dropped and logged.
MAX_FAILURE_SHARE = 0.2

_ESTIMATION_ERRORS = (EstimationError, MomentError, FitError, NumericError, InferenceError)


@dataclasses.dataclass(frozen=True)
class BootstrapSummary:
    """Percentile bootstrap summary for a dependence estimate."""

    point_estimate: float
    se: float
    ci_lo: float
    ci_hi: float
    alpha: float
    b_requested: int
    b_used: int
    estimates: tuple[float, ...]

    def __post_init__(self):
        if self.ci_lo > self.ci_hi:
            raise DomainError("interval endpoints out of order")
        if self.se < 0.0:
            raise DomainError("se must be nonnegative")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["estimates"] = list(self.estimates)
        return out


def percentile_interval(estimates, alpha: float) -> tuple[float, float]:
    """Percentile CI from order statistics at 1-based ranks ceil(B a/2)
    and floor(B (1 - a/2)); both endpoints are members of the sample."""
    est = np.sort(np.asarray(estimates, dtype=float))
    b = len(est)
    if b < 2:
        raise DomainError("percentile interval needs at least two estimates")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    lo_rank = max(math.ceil(b * alpha / 2.0), 1)
    hi_rank = min(math.floor(b * (1.0 - alpha / 2.0)), b)
    return float(est[lo_rank - 1]), float(est[hi_rank - 1])


def _pin_region(data: SurvivalData, estimator):
    """Fix the feasible box from the observed data before resampling.

    The box is a constraint derived from the original sample; replicates
    must search inside the same box rather than re-deriving one from each
    resample.  The seed stream matches what ``estimate`` would use on its
    own, so the pinned point estimate is unchanged.
    """
    options = getattr(estimator, "options", None)
    if options is None or options.region is not None:
        return estimator
    region = resolve_region(data, estimator.family_t, estimator.family_c, options)
    return dataclasses.replace(
        estimator, options=dataclasses.replace(options, region=region)
    )


def _pin_range(data: SurvivalData, estimator):
    """Fix the tau range from the observed sample's vote before resampling.

    Replicates re-fit inside the winning range rather than re-voting, so
    the interval reflects parameter uncertainty within the selected range.
    Returns the pinned estimator together with the full-vote point
    estimate.  Estimators without range voting pass through unchanged.
    """
    options = getattr(estimator, "options", None)
    if options is None or not hasattr(estimator, "fit"):
        return estimator, float(estimator(data))
    if options.tau_range is not None:
        return estimator, float(estimator(data))
    report = estimator.fit(data)
    pinned = dataclasses.replace(
        estimator, options=dataclasses.replace(options, tau_range=report.tally.winner)
    )
    return pinned, float(report.theta_hat.tau)


def _bootstrap_task(args):
    estimator, x, delta, trt, seed_entropy = args
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    data = SurvivalData(x, delta, trt)
    idx = rng.integers(0, len(data), size=len(data))
    try:
        return float(estimator(data.take(idx))), None
    except _ESTIMATION_ERRORS as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def bootstrap_tau(
    data: SurvivalData,
    estimator,
    b: int = 200,
    alpha: float = 0.05,
    seed: int = 0,
    threads: int = 1,
) -> BootstrapSummary:
    """Nonparametric bootstrap of a tau estimator.

    ``estimator`` maps a ``SurvivalData`` to a float and must be picklable
    when ``threads > 1`` (both ``ProposedEstimator`` and
    ``MleTauEstimator`` qualify).  Data is canonically sorted before
    resampling so the summary does not depend on input row order.  For the
    range-voting estimator the feasible box and the winning tau range are
    fixed from the original sample, and replicates re-fit within them.
    Replicates whose estimation fails are dropped; more than 20% failures
    aborts with ``InferenceError``.
    """
    if b < 20:
        raise DomainError("bootstrap needs b >= 20")
    if not 0.0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 0.5)")
    data = data.sorted()
    estimator = _pin_region(data, estimator)
    estimator, point = _pin_range(data, estimator)
    tasks = [
        (estimator, data.x, data.delta, data.trt, [seed, 21, i]) for i in range(b)
    ]
    results = _run_tasks(_bootstrap_task, tasks, threads)
    taus = []
    failures = []
    for value, err in results:
        if err is None:
            taus.append(value)
        else:
            failures.append(err)
    if len(failures) > MAX_FAILURE_SHARE * b:
        raise InferenceError(
            f"{len(failures)} of {b} bootstrap replicates failed; first: {failures[0]}"
        )
    for err in failures:
        logger.warning("bootstrap replicate failed: %s", err)
    ci_lo, ci_hi = percentile_interval(taus, alpha)
    return BootstrapSummary(
        point_estimate=point,
        se=float(np.std(taus, ddof=1)),
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        alpha=alpha,
        b_requested=b,
        b_used=len(taus),
        estimates=tuple(taus),
    )


# ----------------------------------------------------------------------
# Monte-Carlo study
# ----------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class StudyCell:
    """One simulation configuration in a study grid.

    ``assumed`` is the copula family the estimator works under.  It defaults
    to the generating family, but a zero-tau cell generates from the
    independence copula and still needs a proper family to estimate within,
    so such cells must name one.
    """

    label: str
    copula: CopulaSpec
    marginal_t: MarginalSpec
    marginal_c: MarginalSpec
    n: int
    options: EstimateOptions = EstimateOptions()
    assumed: CopulaFamily | None = None

    def __post_init__(self):
        if self.assumed_family is CopulaFamily.INDEPENDENCE:
            raise ConfigError(
                f"cell {self.label!r}: cannot estimate under the independence "
                "copula; set 'assumed' to the working family"
            )

    @property
    def assumed_family(self) -> CopulaFamily:
        return self.assumed if self.assumed is not None else self.copula.family

    @property
    def tau_true(self) -> float:
        return self.copula.tau()


@dataclasses.dataclass(frozen=True)
class StudyRunRecord:
    """Result of a single study run (one fresh dataset)."""

    run: int
    tau_hat: float
    ci_lo: float
    ci_hi: float
    covered: bool
    error: str | None = None


@dataclasses.dataclass(frozen=True)
class StudySummary:
    """Aggregated accuracy and coverage metrics for one cell.

    ``coverage_pct`` uses only the runs that produced an interval as its
    denominator.  ``mpe`` is the mean percent error
    ``100 * (true - estimate) / true``, absent when the true tau is zero.
    ``ci_lo_mean``/``ci_hi_mean`` average the per-run interval endpoints,
    giving a representative interval for tabulation.
    """

    label: str
    tau_true: float
    n: int
    runs: int
    runs_failed: int
    failed: bool
    mean_estimate: float
    mae: float
    empirical_se: float
    coverage_pct: float
    mpe: float | None
    ci_lo_mean: float
    ci_hi_mean: float
    records: tuple[StudyRunRecord, ...] = ()

    def __post_init__(self):
        if not self.failed and not 0.0 <= self.coverage_pct <= 100.0:
            raise DomainError("coverage must lie in [0, 100]")
        if not self.failed and self.mae < 0.0:
            raise DomainError("mae must be nonnegative")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["records"] = [dataclasses.asdict(r) for r in self.records]
        return out


def _study_task(args):
    cell, inner_b, alpha, seed_entropy = args
    run_seed = int(np.random.SeedSequence(seed_entropy).generate_state(1)[0])
    config = GenConfig(
        copula=cell.copula,
        marginal_t=cell.marginal_t,
        marginal_c=cell.marginal_c,
        n=cell.n,
        seed=run_seed,
    )
    data = sample_survival_data(config)
    est = ProposedEstimator(
        cell.assumed_family,
        cell.marginal_t.family,
        cell.marginal_c.family,
        dataclasses.replace(cell.options, seed=run_seed),
    )
    try:
        summary = bootstrap_tau(
            data, est, b=inner_b, alpha=alpha, seed=run_seed, threads=1
        )
    except _ESTIMATION_ERRORS as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return (summary.point_estimate, summary.ci_lo, summary.ci_hi), None


def _failed_summary(cell: StudyCell, runs: int, records) -> StudySummary:
    return StudySummary(
        label=cell.label,
        tau_true=cell.tau_true,
        n=cell.n,
        runs=runs,
        runs_failed=sum(r.error is not None for r in records),
        failed=True,
        mean_estimate=math.nan,
        mae=math.nan,
        empirical_se=math.nan,
        coverage_pct=math.nan,
        mpe=None,
        ci_lo_mean=math.nan,
        ci_hi_mean=math.nan,
        records=tuple(records),
    )


def monte_carlo_study(
    cells,
    runs: int = 30,
    inner_b: int = 30,
    alpha: float = 0.05,
    seed: int = 0,
    threads: int = 1,
) -> list[StudySummary]:
    """Replicate estimation over a grid of simulation cells.

    Every run simulates a fresh dataset, estimates tau and wraps it in a
    percentile bootstrap interval; the cell aggregates its runs into mean
    estimate, mean absolute error, empirical SE, coverage percentage and
    mean percent error.  Runs are scheduled as independent tasks with
    precomputed seeds, so ``threads > 1`` changes wall time only, never
    any output.
    """
    if runs < 10:
        raise DomainError("study needs at least 10 runs per cell")
    cells = list(cells)
    tasks = []
    for ci, cell in enumerate(cells):
        for r in range(runs):
            tasks.append((cell, inner_b, alpha, [seed, 31, ci, r]))
    results = _run_tasks(_study_task, tasks, threads)
    summaries = []
    for ci, cell in enumerate(cells):
        tau = cell.tau_true
        records = []
        for r, (payload, err) in enumerate(results[ci * runs : (ci + 1) * runs]):
            if err is not None:
                logger.warning("study run %d failed in cell %s: %s", r, cell.label, err)
                records.append(
                    StudyRunRecord(r, math.nan, math.nan, math.nan, False, err)
                )
                continue
            tau_hat, ci_lo, ci_hi = payload
            records.append(
                StudyRunRecord(r, tau_hat, ci_lo, ci_hi, ci_lo <= tau <= ci_hi)
            )
        ok = [r for r in records if r.error is None]
        if len(records) - len(ok) > MAX_FAILURE_SHARE * runs or len(ok) < 2:
            summaries.append(_failed_summary(cell, runs, records))
            continue
        est = np.asarray([r.tau_hat for r in ok])
        mpe = float(np.mean((tau - est) / tau) * 100.0) if tau != 0.0 else None
        summaries.append(
            StudySummary(
                label=cell.label,
                tau_true=tau,
                n=cell.n,
                runs=runs,
                runs_failed=len(records) - len(ok),
                failed=False,
                mean_estimate=float(est.mean()),
                mae=float(np.mean(np.abs(est - tau))),
                empirical_se=float(np.std(est, ddof=1)),
                coverage_pct=float(np.mean([r.covered for r in ok]) * 100.0),
                mpe=mpe,
                ci_lo_mean=float(np.mean([r.ci_lo for r in ok])),
                ci_hi_mean=float(np.mean([r.ci_hi for r in ok])),
                records=tuple(records),
            )
        )
    return summaries


def _run_tasks(fn, tasks, threads: int):
    threads = max(int(threads), 1)
    if threads == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    workers = min(threads, len(tasks), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))
