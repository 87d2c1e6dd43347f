"""Monte-Carlo harness: replicates, reference variance, relative-bias report.

One replicate draws a cohort, fits the response and association models, and
records the three variance estimates. A scenario run is B independent
replicates on derived RNG streams, so any parallelism degree yields the
same records. Relative bias compares the mean estimated variance against
the empirical variance of beta_hat from an independent reference run.
"""
from __future__ import annotations

import csv
import datetime
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .association import fit_weighted_linear
from .datagen import (
    ASSOC_COEF_NAMES,
    EXPOSURE_COEF_INDEX,
    ScenarioSpec,
    generate_cohort,
    replicate_stream,
    to_analysis_dataset,
)
from .errors import IpwError, ZeroReference
from .response import fit_response
from .variance import (
    ESTIMATOR_KINDS,
    LINEARIZED,
    NAIVE,
    ROBUST,
    linearized_variance,
    naive_variance,
    robust_variance,
)

N_COEF = len(ASSOC_COEF_NAMES)


@dataclass(frozen=True, eq=False)
class ReplicateRecord:
    """Everything retained from one simulated replicate.

    Failed replicates keep their diagnostics and carry the failure cause;
    they are never dropped silently.
    """

    scenario: str
    replicate: int
    base_seed: int
    n: int
    response_rate: float
    converged: bool
    iterations: int
    n_clamped: int
    failure: str | None
    beta_hat: np.ndarray | None
    var_naive: np.ndarray | None        # diagonal of the naive covariance
    var_robust: np.ndarray | None
    var_linearized: np.ndarray | None

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    """Aggregates for one scenario of the simulation report."""

    label: str
    n_replicates: int
    n_failed: int
    mean_response_rate: float
    mean_beta: np.ndarray
    sd_beta: np.ndarray
    mean_variance: dict[str, np.ndarray]       # estimator -> per-coefficient mean
    reference_variance: np.ndarray             # per-coefficient empirical variance
    relative_bias: dict[str, float]            # estimator -> RB for the exposure coefficient
    relative_bias_all: dict[str, np.ndarray]   # estimator -> per-coefficient RB
    valid: bool                                # False when >1% of replicates failed


@dataclass(frozen=True, eq=False)
class SimulationReport:
    """Per-scenario, per-estimator relative-bias grid plus run provenance."""

    scenarios: list[ScenarioResult]
    base_seed: int
    reference_seed: int
    n: int
    reference_replicates: int
    timestamp: str = field(default_factory=lambda: datetime.datetime.now().isoformat(timespec="seconds"))


def run_replicate(spec: ScenarioSpec, replicate_index: int, base_seed: int) -> ReplicateRecord:
    """Generate, fit, and record one replicate. Deterministic given inputs."""
    rng = replicate_stream(base_seed, spec.index, replicate_index)
    cohort = generate_cohort(spec, rng)
    dataset = to_analysis_dataset(cohort, spec)
    rate = float(cohort.r.mean())
    converged, iterations, n_clamped = False, 0, 0
    try:
        rfit = fit_response(dataset)
        converged, iterations, n_clamped = rfit.converged, rfit.iterations, rfit.n_clamped
        afit = fit_weighted_linear(dataset, rfit.p_hat)
        est_naive = naive_variance(afit, rfit, dataset)
        est_robust, _ = robust_variance(afit, rfit, dataset)
        est_lin, _ = linearized_variance(afit, rfit, dataset)
    except IpwError as exc:
        return ReplicateRecord(
            scenario=spec.label, replicate=replicate_index, base_seed=base_seed,
            n=spec.n, response_rate=rate, converged=converged, iterations=iterations,
            n_clamped=n_clamped, failure=type(exc).__name__, beta_hat=None,
            var_naive=None, var_robust=None, var_linearized=None,
        )
    return ReplicateRecord(
        scenario=spec.label, replicate=replicate_index, base_seed=base_seed,
        n=spec.n, response_rate=rate, converged=rfit.converged,
        iterations=rfit.iterations, n_clamped=rfit.n_clamped, failure=None,
        beta_hat=afit.beta_hat,
        var_naive=np.diag(est_naive.cov).copy(),
        var_robust=np.diag(est_robust.cov).copy(),
        var_linearized=np.diag(est_lin.cov).copy(),
    )


def _replicate_task(args: tuple[ScenarioSpec, int, int]) -> ReplicateRecord:
    spec, index, base_seed = args
    return run_replicate(spec, index, base_seed)


def run_scenario(
    spec: ScenarioSpec,
    b: int,
    base_seed: int,
    parallelism: int = 1,
) -> list[ReplicateRecord]:
    """B replicates of a scenario; record order and content do not depend on
    the parallelism degree."""
    if b < 1:
        raise ValueError("need at least one replicate")
    tasks = [(spec, i, base_seed) for i in range(b)]
    if parallelism <= 1 or b == 1:
        return [_replicate_task(t) for t in tasks]
    chunk = max(1, b // (parallelism * 8))
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_replicate_task, tasks, chunksize=chunk))


def reference_variance(
    spec: ScenarioSpec,
    b_ref: int,
    seed: int,
    parallelism: int = 1,
) -> np.ndarray:
    """Empirical per-coefficient variance of beta_hat over an independent run.

    The seed must differ from the estimation run's seed. Failed replicates
    are excluded; the divisor is the number of successes minus one.
    """
    records = run_scenario(spec, b_ref, seed, parallelism)
    return empirical_beta_variance(records)


def empirical_beta_variance(records: list[ReplicateRecord]) -> np.ndarray:
    betas = np.array([rec.beta_hat for rec in records if rec.ok])
    if len(betas) < 2:
        return np.full(N_COEF, np.nan)
    return np.var(betas, axis=0, ddof=1)


def relative_bias(mean_v: float, v_ref: float) -> float:
    """(mean estimated variance - reference variance) / reference variance."""
    if not v_ref > 0.0:
        raise ZeroReference(f"reference variance must be positive, got {v_ref}")
    return (mean_v - v_ref) / v_ref


def build_report(
    records: list[ReplicateRecord],
    reference: dict[str, np.ndarray],
    base_seed: int,
    reference_seed: int,
    reference_replicates: int,
    max_failure_fraction: float = 0.01,
) -> SimulationReport:
    """Aggregate replicate records against reference variances.

    Records may span several scenarios; aggregation is a fold over records
    sorted by (scenario, replicate), so it is permutation-invariant in the
    input order. Scenarios whose failure fraction exceeds the threshold are
    flagged invalid rather than silently reported.
    """
    by_label: dict[str, list[ReplicateRecord]] = {}
    for rec in sorted(records, key=lambda rec: (rec.scenario, rec.replicate)):
        by_label.setdefault(rec.scenario, []).append(rec)

    results = []
    n = 0
    for label, recs in by_label.items():
        n = recs[0].n
        ok = [rec for rec in recs if rec.ok]
        n_failed = len(recs) - len(ok)
        rates = np.array([rec.response_rate for rec in recs])
        betas = np.array([rec.beta_hat for rec in ok]) if ok else np.empty((0, N_COEF))
        # a scenario without reference records still reports, with NaN bias
        v_ref = np.asarray(reference.get(label, np.full(N_COEF, np.nan)), dtype=float)

        mean_variance: dict[str, np.ndarray] = {}
        rb_primary: dict[str, float] = {}
        rb_all: dict[str, np.ndarray] = {}
        per_kind = {
            NAIVE: [rec.var_naive for rec in ok],
            ROBUST: [rec.var_robust for rec in ok],
            LINEARIZED: [rec.var_linearized for rec in ok],
        }
        for kind in ESTIMATOR_KINDS:
            mean_v = np.mean(np.array(per_kind[kind]), axis=0) if ok else np.full(N_COEF, np.nan)
            mean_variance[kind] = mean_v
            rb_vec = np.full(N_COEF, np.nan)
            for k in range(N_COEF):
                if v_ref[k] > 0.0 and np.isfinite(mean_v[k]):
                    rb_vec[k] = relative_bias(float(mean_v[k]), float(v_ref[k]))
            rb_all[kind] = rb_vec
            rb_primary[kind] = float(rb_vec[EXPOSURE_COEF_INDEX])

        results.append(
            ScenarioResult(
                label=label,
                n_replicates=len(recs),
                n_failed=n_failed,
                mean_response_rate=float(np.mean(rates[np.isfinite(rates)])),
                mean_beta=betas.mean(axis=0) if len(betas) else np.full(N_COEF, np.nan),
                sd_beta=betas.std(axis=0, ddof=1) if len(betas) > 1 else np.full(N_COEF, np.nan),
                mean_variance=mean_variance,
                reference_variance=v_ref,
                relative_bias=rb_primary,
                relative_bias_all=rb_all,
                valid=n_failed <= max_failure_fraction * len(recs),
            )
        )
    return SimulationReport(
        scenarios=results,
        base_seed=base_seed,
        reference_seed=reference_seed,
        n=n,
        reference_replicates=reference_replicates,
    )


# ---------------------------------------------------------------------------
# Flat-file serialization. Floats are written with repr (shortest round-trip
# form), so identical runs produce byte-identical files.

REPORT_COLUMNS = (
    "scenario", "estimator", "mean_V", "V_ref", "RB",
    "n_fail", "B", "seed", "n", "ref_B", "ref_seed", "valid",
)

_RECORD_VECTOR_FIELDS = ("beta", "var_naive", "var_robust", "var_linearized")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report(report: SimulationReport, path: str) -> None:
    """One row per scenario x estimator; the exposure-coefficient cell.

    Every row carries the seeds, replicate counts, and sample size needed to
    reproduce it. The timestamp deliberately stays out of the file so equal
    runs serialize identically.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for res in report.scenarios:
            for kind in ESTIMATOR_KINDS:
                writer.writerow([
                    res.label,
                    kind,
                    _fmt(res.mean_variance[kind][EXPOSURE_COEF_INDEX]),
                    _fmt(res.reference_variance[EXPOSURE_COEF_INDEX]),
                    _fmt(res.relative_bias[kind]),
                    res.n_failed,
                    res.n_replicates,
                    report.base_seed,
                    report.n,
                    report.reference_replicates,
                    report.reference_seed,
                    int(res.valid),
                ])


def write_records(
    path: str,
    estimation: list[ReplicateRecord],
    reference: list[ReplicateRecord],
) -> None:
    """Both runs in one flat table, distinguished by the run column."""
    header = ["run", "scenario", "replicate", "seed", "n", "response_rate",
              "converged", "iterations", "n_clamped", "failure"]
    for prefix in _RECORD_VECTOR_FIELDS:
        header += [f"{prefix}_{name}" for name in ASSOC_COEF_NAMES]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for run, recs in (("estimation", estimation), ("reference", reference)):
            for rec in recs:
                row = [run, rec.scenario, rec.replicate, rec.base_seed, rec.n,
                       _fmt(rec.response_rate), int(rec.converged),
                       rec.iterations, rec.n_clamped, rec.failure or ""]
                for vec in (rec.beta_hat, rec.var_naive, rec.var_robust, rec.var_linearized):
                    row += [""] * N_COEF if vec is None else [_fmt(x) for x in vec]
                writer.writerow(row)


def read_records(path: str) -> tuple[list[ReplicateRecord], list[ReplicateRecord]]:
    """Inverse of write_records."""
    estimation: list[ReplicateRecord] = []
    reference: list[ReplicateRecord] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            def vector(prefix: str) -> np.ndarray | None:
                cells = [row[f"{prefix}_{name}"] for name in ASSOC_COEF_NAMES]
                if any(cell == "" for cell in cells):
                    return None
                return np.array([float(cell) for cell in cells])

            rec = ReplicateRecord(
                scenario=row["scenario"],
                replicate=int(row["replicate"]),
                base_seed=int(row["seed"]),
                n=int(row["n"]),
                response_rate=float(row["response_rate"]),
                converged=bool(int(row["converged"])),
                iterations=int(row["iterations"]),
                n_clamped=int(row["n_clamped"]),
                failure=row["failure"] or None,
                beta_hat=vector("beta"),
                var_naive=vector("var_naive"),
                var_robust=vector("var_robust"),
                var_linearized=vector("var_linearized"),
            )
            (estimation if row["run"] == "estimation" else reference).append(rec)
    return estimation, reference
