"""
experiments.py
Batch experiments comparing the moment algorithms against the exact oracle.

Four experiments are available: normal samples with a large mean, binary32
uniform sums, and the asset-or-nothing and cash-or-nothing Monte-Carlo runs.
Each run draws its samples once and evaluates every requested algorithm on
every requested ordering of those same samples. Exact references are
computed once per run.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
import re
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_BLOCK_SIZE, DEFAULT_SEED, validate_seed
from counter_rng import StreamCursor, normals, seeded_permutation
from csv_utils import read_csv, write_csv
from errors import ConfigError, OracleError, ReportIOError
from exact_oracle import ExactMoments, error_report, exact_moments, exact_sum, round_to
from float_utils import (
    BINARY32,
    BINARY64,
    dtype_of,
    format_float,
    from_bits_hex,
    precision_of_hex,
    resolve_precision,
    to_bits_hex,
)
from json_utils import append_json_lines
from logger_setup import get_logger
from mc_engine import (
    PayoffKind,
    PayoffSpec,
    ReductionOrder,
    RunResult,
    SimulationPlan,
    audit_draw_ranges,
    compute_blocks,
    gamma_fd,
    reduce_blocks,
    simulate_payoffs,
)
from streaming_moments import (
    ALL_ALGORITHMS,
    TABLE_ALGORITHMS,
    MomentAlgorithm,
    SummaryStats,
    accumulate,
    parse_algorithms,
)
from timer_utils import Timer

logger = get_logger(__name__)

HEADER = ("experiment", "run", "algorithm", "ordering", "statistic",
          "bits_hex", "exact", "abs_err", "rel_err", "ulps")
AGGREGATE_RUN = "mean"


class ExperimentKind(str, Enum):
    NORMAL = "normal"
    UNIFORM32 = "uniform32"
    ASSET_OR_NOTHING = "asset-or-nothing"
    CASH_OR_NOTHING = "cash-or-nothing"

    @property
    def is_monte_carlo(self) -> bool:
        return self in (ExperimentKind.ASSET_OR_NOTHING, ExperimentKind.CASH_OR_NOTHING)


STATISTICS = {
    ExperimentKind.NORMAL: ("M", "V"),
    ExperimentKind.UNIFORM32: ("S", "M", "V"),
    ExperimentKind.ASSET_OR_NOTHING: ("M", "V", "Γ"),
    ExperimentKind.CASH_OR_NOTHING: ("M", "V", "Γ"),
}


def parse_experiment(value) -> ExperimentKind:
    try:
        return ExperimentKind(value)
    except ValueError as exc:
        choices = ", ".join(k.value for k in ExperimentKind)
        raise ConfigError(f"unknown experiment {value!r}; expected one of {choices}") from exc


_ORDERING_RE = re.compile(r"^permuted\s*[:=(]\s*(\d+)\s*\)?$")


@dataclass(frozen=True)
class Ordering:
    kind: str
    seed: Optional[int] = None

    @property
    def label(self) -> str:
        return f"permuted({self.seed})" if self.kind == "permuted" else self.kind

    def __str__(self) -> str:
        return self.label


def parse_ordering(text) -> Ordering:
    if isinstance(text, Ordering):
        return text
    key = str(text).strip().lower()
    if key in ("raw", "sorted"):
        return Ordering(key)
    match = _ORDERING_RE.match(key)
    if match:
        return Ordering("permuted", validate_seed(int(match.group(1))))
    raise ConfigError(f"unknown ordering {text!r}; expected raw, sorted or permuted:<seed>")


def parse_orderings(items: Iterable) -> Tuple[Ordering, ...]:
    out = []
    for item in items:
        ordering = parse_ordering(item)
        if ordering not in out:
            out.append(ordering)
    if not out:
        raise ConfigError("at least one ordering is required")
    return tuple(out)


def sort_ascending(xs) -> np.ndarray:
    return np.sort(np.asarray(xs), kind="stable")


def permute(xs, seed: int) -> np.ndarray:
    xs = np.asarray(xs)
    return xs[seeded_permutation(xs.size, seed)]


def apply_ordering(xs, ordering: Ordering) -> np.ndarray:
    if ordering.kind == "raw":
        return np.asarray(xs)
    if ordering.kind == "sorted":
        return sort_ascending(xs)
    return permute(xs, ordering.seed)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind
    n: int
    runs: int
    seed: int = DEFAULT_SEED
    orderings: Tuple[Ordering, ...] = (Ordering("raw"), Ordering("sorted"))
    algorithms: Tuple[MomentAlgorithm, ...] = TABLE_ALGORITHMS
    precision: str = BINARY64
    mu: float = 1e5
    sigma_n: float = 1.0
    workers: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    epsilon: float = 0.01
    rebate: float = 0.0
    output: Optional[Path] = None
    records_path: Optional[Path] = None
    audit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "experiment", parse_experiment(self.experiment))
        object.__setattr__(self, "orderings", parse_orderings(self.orderings))
        object.__setattr__(self, "algorithms", parse_algorithms(self.algorithms))
        object.__setattr__(self, "precision", resolve_precision(self.precision))
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.workers < 1 or self.block_size < 1:
            raise ConfigError("workers and block size must be >= 1")
        validate_seed(self.seed)
        validate_seed(self.seed + self.runs - 1)
        if self.experiment.is_monte_carlo and self.epsilon <= 0:
            raise ConfigError("Monte-Carlo experiments need epsilon > 0")
        if self.rebate and self.experiment is not ExperimentKind.CASH_OR_NOTHING:
            raise ConfigError("--rebate only applies to cash-or-nothing")
        if self.rebate < 0:
            raise ConfigError("rebate must be >= 0")
        if self.sigma_n < 0:
            raise ConfigError("sigma_n must be >= 0")

    @property
    def statistics(self) -> Tuple[str, ...]:
        return STATISTICS[self.experiment]

    def payoff_spec(self) -> PayoffSpec:
        kind = PayoffKind(self.experiment.value)
        return PayoffSpec(kind=kind, rebate=self.rebate)

    def plan(self, run: int) -> SimulationPlan:
        return SimulationPlan(
            paths=self.n,
            block_size=self.block_size,
            workers=self.workers,
            seed=self.seed + run,
            algorithm=self.algorithms[0],
            precision=self.precision,
            epsilon=self.epsilon,
        )


_DEFAULTS = {
    ExperimentKind.NORMAL: dict(n=100_000, runs=100, algorithms=TABLE_ALGORITHMS, precision=BINARY64),
    ExperimentKind.UNIFORM32: dict(n=50_000_000, runs=10, algorithms=ALL_ALGORITHMS, precision=BINARY32),
    ExperimentKind.ASSET_OR_NOTHING: dict(
        n=1_000_000, runs=10, precision=BINARY64,
        algorithms=(MomentAlgorithm.NAIVE, MomentAlgorithm.NAIVE_KAHAN, MomentAlgorithm.SHIFTED_NAIVE_KAHAN,
                    MomentAlgorithm.LING, MomentAlgorithm.LING_KAHAN, MomentAlgorithm.CHAN_LEWIS_KAHAN)),
    ExperimentKind.CASH_OR_NOTHING: dict(
        n=10_000_000, runs=1, precision=BINARY64,
        algorithms=(MomentAlgorithm.NAIVE, MomentAlgorithm.LING, MomentAlgorithm.LING_KAHAN,
                    MomentAlgorithm.CHAN_LEWIS_KAHAN)),
}


def default_config(experiment, **overrides) -> ExperimentConfig:
    """Config with the published defaults for ``experiment``; None overrides are ignored."""
    kind = parse_experiment(experiment)
    values = dict(_DEFAULTS[kind])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=kind, **values)


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    run: Optional[int]
    algorithm: str
    ordering: str
    statistic: str
    bits_hex: str
    exact: Optional[float]
    abs_error: float
    rel_error: float
    ulps: float

    @property
    def value(self):
        return from_bits_hex(self.bits_hex) if self.bits_hex else None

    @property
    def precision(self) -> str:
        return precision_of_hex(self.bits_hex) if self.bits_hex else BINARY64

    def to_csv_row(self) -> List[str]:
        return [
            self.experiment,
            AGGREGATE_RUN if self.run is None else str(self.run),
            self.algorithm,
            self.ordering,
            self.statistic,
            self.bits_hex,
            "" if self.exact is None else format_float(self.exact, self.precision),
            format_float(self.abs_error),
            format_float(self.rel_error),
            format_float(self.ulps),
        ]

    @classmethod
    def from_csv_row(cls, row: Sequence[str]) -> "ReportRow":
        if len(row) != len(HEADER):
            raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
        experiment, run, algorithm, ordering, statistic, bits_hex, exact, abs_err, rel_err, ulps = row
        exact_value = None
        if exact:
            exact_value = float(dtype_of(precision_of_hex(bits_hex) if bits_hex else BINARY64).type(float(exact)))
        return cls(
            experiment=experiment,
            run=None if run == AGGREGATE_RUN else int(run),
            algorithm=algorithm,
            ordering=ordering,
            statistic=statistic,
            bits_hex=bits_hex,
            exact=exact_value,
            abs_error=float(abs_err),
            rel_error=float(rel_err),
            ulps=float(ulps),
        )


@dataclass
class ExperimentReport:
    rows: List[ReportRow] = field(default_factory=list)
    config: Optional[ExperimentConfig] = None

    def add(self, row: ReportRow) -> None:
        self.rows.append(row)

    @property
    def run_rows(self) -> List[ReportRow]:
        return [r for r in self.rows if r.run is not None]

    @property
    def aggregate_rows(self) -> List[ReportRow]:
        return [r for r in self.rows if r.run is None]

    def aggregate(self) -> List[ReportRow]:
        """Mean of the per-run errors for each (experiment, algorithm, ordering, statistic)."""
        groups: Dict[tuple, List[ReportRow]] = {}
        for row in self.run_rows:
            groups.setdefault((row.experiment, row.algorithm, row.ordering, row.statistic), []).append(row)
        out = []
        for (experiment, algorithm, ordering, statistic), rows in groups.items():
            count = len(rows)
            out.append(ReportRow(
                experiment=experiment,
                run=None,
                algorithm=algorithm,
                ordering=ordering,
                statistic=statistic,
                bits_hex="",
                exact=None,
                abs_error=sum(r.abs_error for r in rows) / count,
                rel_error=sum(r.rel_error for r in rows) / count,
                ulps=sum(r.ulps for r in rows) / count,
            ))
        return out

    def select(self, **criteria) -> List[ReportRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in criteria.items())]


def emit_csv(report: ExperimentReport, path) -> Path:
    return write_csv(path, (row.to_csv_row() for row in report.rows), HEADER)


def read_report(path) -> ExperimentReport:
    rows = read_csv(path)
    if not rows or tuple(rows[0]) != HEADER:
        raise ReportIOError(path, "missing or unexpected report header")
    report = ExperimentReport()
    for number, row in enumerate(rows[1:], start=2):
        try:
            report.add(ReportRow.from_csv_row(row))
        except ValueError as exc:
            raise ReportIOError(path, f"line {number}: {exc}") from exc
    return report


def _row(config: ExperimentConfig, run: int, algorithm: MomentAlgorithm, ordering: Ordering,
         statistic: str, approx, exact: Fraction, precision: str) -> ReportRow:
    errors = error_report(approx, exact, precision)
    return ReportRow(
        experiment=config.experiment.value,
        run=run,
        algorithm=algorithm.value,
        ordering=ordering.label,
        statistic=statistic,
        bits_hex=to_bits_hex(approx, precision),
        exact=float(round_to(exact, precision)),
        abs_error=errors.absolute,
        rel_error=errors.relative,
        ulps=errors.ulps,
    )


def _audit_orderings(ordered: Dict[Ordering, np.ndarray], reference: Fraction) -> None:
    for ordering, xs in ordered.items():
        if exact_sum(xs) != reference:
            raise OracleError(f"ordering {ordering} changed the multiset of samples")


def _sample_rows(config: ExperimentConfig, run: int, samples: np.ndarray, report: ExperimentReport) -> None:
    precision = config.precision
    samples = np.ascontiguousarray(samples, dtype=dtype_of(precision))
    exact = exact_moments(samples)
    ordered = {o: apply_ordering(samples, o) for o in config.orderings}
    if config.audit:
        _audit_orderings(ordered, exact.sum)
    references = {"S": exact.sum, "M": exact.mean, "V": exact.variance}
    for ordering, xs in ordered.items():
        for algorithm in config.algorithms:
            stats = accumulate(xs, algorithm, precision).finalize()
            values = {"S": stats.sum, "M": stats.mean, "V": stats.variance}
            for statistic in config.statistics:
                report.add(_row(config, run, algorithm, ordering, statistic,
                                values[statistic], references[statistic], precision))


def _sorted_result(plan: SimulationPlan, spec: PayoffSpec, payoffs, algorithm: MomentAlgorithm) -> RunResult:
    down, mid, up = (accumulate(sort_ascending(p), algorithm, plan.precision).finalize() for p in payoffs)
    return RunResult(
        algorithm=algorithm,
        order=ReductionOrder("sorted"),
        down=down,
        mid=mid,
        up=up,
        gamma=gamma_fd(up.mean, mid.mean, down.mean, spec.s0, plan.epsilon),
        block_count=1,
        precision=plan.precision,
    )


def _monte_carlo_rows(config: ExperimentConfig, run: int, report: ExperimentReport) -> None:
    plan = config.plan(run)
    spec = config.payoff_spec()
    precision = config.precision
    blocks = compute_blocks(plan, spec, config.algorithms, keep_payoffs=True)
    payoffs = simulate_payoffs(plan, spec, blocks)
    exact: List[ExactMoments] = [exact_moments(p) for p in payoffs]
    if config.audit:
        audit_draw_ranges(plan, blocks)
        if any(exact_sum(sort_ascending(p)) != e.sum for p, e in zip(payoffs, exact)):
            raise OracleError("sorting changed the multiset of payoffs")
    down_ref, mid_ref, up_ref = (round_to(e.mean, precision) for e in exact)
    gamma_ref = gamma_fd(up_ref, mid_ref, down_ref, spec.s0, plan.epsilon).gamma
    references = {"M": exact[1].mean, "V": exact[1].variance, "Γ": Fraction(gamma_ref)}

    records = []
    for ordering in config.orderings:
        for algorithm in config.algorithms:
            if ordering.kind == "sorted":
                result = _sorted_result(plan, spec, payoffs, algorithm)
            else:
                order = ReductionOrder.natural() if ordering.kind == "raw" else ReductionOrder.by_completion(ordering.seed)
                result = reduce_blocks(plan, spec, blocks, order, algorithm)
            values = {"M": result.mid.mean, "V": result.mid.variance, "Γ": result.gamma.gamma}
            for statistic in config.statistics:
                stat_precision = BINARY64 if statistic == "Γ" else precision
                report.add(_row(config, run, algorithm, ordering, statistic,
                                values[statistic], references[statistic], stat_precision))
            result.extra.update(experiment=config.experiment.value, run=run, ordering=ordering.label,
                                seed=plan.seed, workers=plan.workers, block_size=plan.block_size)
            records.append(result.to_record(f"{config.experiment.value}-{plan.seed}-{run}"))
    if config.records_path:
        append_json_lines(config.records_path, records)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    report = ExperimentReport(config=config)
    logger.info("experiment %s: n=%d runs=%d seed=%d precision=%s",
                config.experiment.value, config.n, config.runs, config.seed, config.precision)
    with Timer() as timer:
        for run in range(config.runs):
            seed = config.seed + run
            if config.experiment is ExperimentKind.NORMAL:
                samples = config.mu + config.sigma_n * normals(seed, 1, config.n)
                _sample_rows(config, run, samples, report)
            elif config.experiment is ExperimentKind.UNIFORM32:
                _sample_rows(config, run, StreamCursor(seed).draw32(config.n), report)
            else:
                _monte_carlo_rows(config, run, report)
            logger.debug("run %d done (seed %d)", run, seed)
        if config.runs > 1:
            report.rows.extend(report.aggregate())
    logger.info("experiment %s finished in %.2fs (%d rows)", config.experiment.value, timer.elapsed, len(report.rows))
    if config.output:
        emit_csv(report, config.output)
        logger.info("wrote %s", config.output)
    return report


def sum_file(values: Sequence[str], algorithm, precision: str = BINARY64) -> Tuple[SummaryStats, ExactMoments]:
    """Parse decimal strings at precision P, accumulate them and compute the exact reference."""
    dtype = dtype_of(precision)
    try:
        xs = np.array([float(v) for v in values], dtype=dtype)
    except ValueError as exc:
        raise ConfigError(f"input is not a list of floats: {exc}") from exc
    if xs.size == 0:
        raise ConfigError("input file holds no values")
    if not np.all(np.isfinite(xs)):
        raise ConfigError("input values must be finite at the requested precision")
    stats = accumulate(xs, algorithm, precision).finalize()
    return stats, exact_moments(xs)


