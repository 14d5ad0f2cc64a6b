"""
mc_engine.py
Reproducible parallel Monte-Carlo pricing of binary options.

Paths are grouped into blocks of ``block_size``. Block b covers paths
[(b-1)*block_size + 1, min(b*block_size, N)] and path i always consumes the
uniforms at global indices (i-1)*M*d + 1 ... i*M*d, whichever worker runs it.
Each block keeps one accumulator per bump level (down, mid, up), all fed from
the same normals. Blocks are then merged in an explicit reduction order.
"""
from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_BLOCK_SIZE, DEFAULT_SEED, validate_seed
from counter_rng import normal_inverse_cdf, seeded_permutation, skip_to
from errors import ConfigError, EngineError
from float_utils import BINARY64, dtype_of, resolve_precision, to_bits_hex
from logger_setup import get_logger
from streaming_moments import (
    MomentAccumulator,
    MomentAlgorithm,
    SummaryStats,
    accumulate,
    parse_algorithm,
)
from timer_utils import Timer
from worker import BlockWorkerPool

logger = get_logger(__name__)

BUMPS = ("down", "mid", "up")


class PayoffKind(str, Enum):
    ASSET_OR_NOTHING = "asset-or-nothing"
    CASH_OR_NOTHING = "cash-or-nothing"


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind = PayoffKind.ASSET_OR_NOTHING
    strike: float = 1.5
    maturity: float = 1.0
    quantity: float = 1e6
    rebate: float = 0.0
    s0: float = 1.0
    sigma: float = 0.5

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", PayoffKind(self.kind))
        except ValueError as exc:
            raise ConfigError(f"unknown payoff kind {self.kind!r}") from exc
        if self.strike <= 0 or self.maturity <= 0:
            raise ConfigError("strike and maturity must be > 0")
        if self.sigma < 0 or self.quantity < 0 or self.rebate < 0:
            raise ConfigError("sigma, quantity and rebate must be >= 0")
        if self.s0 <= 0:
            raise ConfigError("S0 must be > 0")
        if self.rebate and self.kind is PayoffKind.ASSET_OR_NOTHING:
            raise ConfigError("a rebate only applies to cash-or-nothing payoffs")


@dataclass(frozen=True)
class SimulationPlan:
    paths: int
    d: int = 1
    steps: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1
    seed: int = DEFAULT_SEED
    algorithm: MomentAlgorithm = MomentAlgorithm.CHAN_LEWIS_KAHAN
    precision: str = BINARY64
    epsilon: float = 0.01

    def __post_init__(self):
        for name in ("paths", "d", "steps", "block_size", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        validate_seed(self.seed)
        object.__setattr__(self, "algorithm", parse_algorithm(self.algorithm))
        object.__setattr__(self, "precision", resolve_precision(self.precision))

    @property
    def draws_per_path(self) -> int:
        return self.d * self.steps

    @property
    def block_count(self) -> int:
        return -(-self.paths // self.block_size)

    def block_paths(self, index: int) -> Tuple[int, int]:
        """1-based inclusive path range of block ``index`` (1-based)."""
        if not 1 <= index <= self.block_count:
            raise ConfigError(f"block index {index} outside [1, {self.block_count}]")
        first = (index - 1) * self.block_size + 1
        return first, min(index * self.block_size, self.paths)

    def bumped_spots(self, s0: float) -> Tuple[float, float, float]:
        h = self.epsilon * s0
        return s0 - h, s0, s0 + h


BumpTriple = Tuple[MomentAccumulator, MomentAccumulator, MomentAccumulator]


@dataclass
class BlockResult:
    index: int
    first_path: int
    last_path: int
    first_draw: int
    last_draw: int
    accumulators: Dict[MomentAlgorithm, BumpTriple]
    payoffs: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None


@dataclass(frozen=True)
class GammaEstimate:
    v_up: float
    v_mid: float
    v_down: float
    gamma: float
    epsilon: float


@dataclass(frozen=True)
class ReductionOrder:
    kind: str = "natural"
    seed: Optional[int] = None

    @classmethod
    def natural(cls) -> "ReductionOrder":
        return cls("natural", None)

    @classmethod
    def by_completion(cls, seed: int) -> "ReductionOrder":
        return cls("byCompletion", validate_seed(seed))

    def sequence(self, count: int) -> List[int]:
        if self.kind == "natural":
            return list(range(1, count + 1))
        if self.kind == "byCompletion":
            return [int(i) + 1 for i in seeded_permutation(count, self.seed)]
        raise ConfigError(f"unknown reduction order {self.kind!r}")

    def __str__(self) -> str:
        return self.kind if self.seed is None else f"{self.kind}({self.seed})"


@dataclass
class RunResult:
    algorithm: MomentAlgorithm
    order: ReductionOrder
    down: SummaryStats
    mid: SummaryStats
    up: SummaryStats
    gamma: GammaEstimate
    block_count: int
    precision: str = BINARY64
    extra: dict = field(default_factory=dict)

    @property
    def stats(self) -> Tuple[SummaryStats, SummaryStats, SummaryStats]:
        return self.down, self.mid, self.up

    def to_record(self, run_id) -> dict:
        return {
            "run_id": run_id,
            "algorithm": self.algorithm.value,
            "reduction": self.order.kind,
            "ordering_seed": self.order.seed,
            "precision": self.precision,
            "mean_hex": to_bits_hex(self.mid.mean, self.precision),
            "variance_hex": to_bits_hex(self.mid.variance, self.precision),
            "gamma_hex": to_bits_hex(self.gamma.gamma, BINARY64),
            "blocks": self.block_count,
            **self.extra,
        }


def gbm_terminal(s0, sigma: float, maturity: float, z):
    """Driftless GBM over one step: S0 * exp(-sigma^2 T / 2 + sigma sqrt(T) z)."""
    if maturity <= 0:
        raise ConfigError("maturity must be > 0")
    return s0 * np.exp(-0.5 * sigma * sigma * maturity + sigma * math.sqrt(maturity) * np.asarray(z))


def terminal_prices(s0: float, spec: PayoffSpec, z: np.ndarray) -> np.ndarray:
    """Prices at maturity for normals z of shape (paths, M, d); coordinate 1 drives the asset."""
    steps = z.shape[1]
    if steps == 1:
        return gbm_terminal(s0, spec.sigma, spec.maturity, z[:, 0, 0])
    dt = spec.maturity / steps
    prices = np.full(z.shape[0], s0, dtype=np.float64)
    for m in range(steps):
        prices = gbm_terminal(prices, spec.sigma, dt, z[:, m, 0])
    return prices


def payoff(spec: PayoffSpec, s_t):
    """Binary payoff with an inclusive strike, 1_{S(T) >= K}."""
    s_t = np.asarray(s_t, dtype=np.float64)
    itm = s_t >= spec.strike
    if spec.kind is PayoffKind.ASSET_OR_NOTHING:
        out = np.where(itm, spec.quantity * s_t, 0.0)
    else:
        out = np.where(itm, spec.quantity, spec.rebate)
    return out if out.ndim else float(out)


def gamma_fd(v_up, v_mid, v_down, s0: float, epsilon: float) -> GammaEstimate:
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0 for a finite-difference Gamma")
    v_up, v_mid, v_down = float(v_up), float(v_mid), float(v_down)
    gamma = (v_up - 2.0 * v_mid + v_down) / ((s0 * s0) * (epsilon * epsilon))
    return GammaEstimate(v_up=v_up, v_mid=v_mid, v_down=v_down, gamma=gamma, epsilon=epsilon)


def _gamma_or_nan(plan: SimulationPlan, spec: PayoffSpec, down, mid, up) -> GammaEstimate:
    if plan.epsilon == 0:
        return GammaEstimate(float(up), float(mid), float(down), math.nan, 0.0)
    return gamma_fd(up, mid, down, spec.s0, plan.epsilon)


def block_payoffs(plan: SimulationPlan, spec: PayoffSpec, index: int):
    """Payoff arrays (down, mid, up) of one block, in ascending path order."""
    first, last = plan.block_paths(index)
    width = plan.draws_per_path
    n_paths = last - first + 1
    cursor = skip_to(plan.seed, first, plan.d, plan.steps)
    start = cursor.position
    u = cursor.draw(n_paths * width)
    z = normal_inverse_cdf(u).reshape(n_paths, plan.steps, plan.d)
    dtype = dtype_of(plan.precision)
    out = tuple(
        np.ascontiguousarray(payoff(spec, terminal_prices(spot, spec, z)), dtype=dtype)
        for spot in plan.bumped_spots(spec.s0)
    )
    return out, start, start + n_paths * width - 1


def run_block(plan: SimulationPlan, spec: PayoffSpec, index: int,
              algorithms: Sequence = (), keep_payoffs: bool = False) -> BlockResult:
    algorithms = tuple(parse_algorithm(a) for a in algorithms) or (plan.algorithm,)
    first, last = plan.block_paths(index)
    payoffs, first_draw, last_draw = block_payoffs(plan, spec, index)
    accumulators = {
        alg: tuple(accumulate(p, alg, plan.precision) for p in payoffs)
        for alg in algorithms
    }
    logger.debug("block %d paths %d..%d draws %d..%d", index, first, last, first_draw, last_draw)
    return BlockResult(
        index=index,
        first_path=first,
        last_path=last,
        first_draw=first_draw,
        last_draw=last_draw,
        accumulators=accumulators,
        payoffs=payoffs if keep_payoffs else None,
    )


def compute_blocks(plan: SimulationPlan, spec: PayoffSpec, algorithms: Sequence = (),
                   keep_payoffs: bool = False, pool: Optional[BlockWorkerPool] = None) -> Dict[int, BlockResult]:
    """Run every block on the pool; results keyed by block index."""
    pool = pool or BlockWorkerPool(plan.workers)
    with Timer() as timer:
        completed = pool.map_blocks(
            lambda b: run_block(plan, spec, b, algorithms, keep_payoffs),
            range(1, plan.block_count + 1),
        )
    logger.info("computed %d blocks (%d paths, %d workers) in %.2fs",
                plan.block_count, plan.paths, pool.workers, timer.elapsed)
    return {index: result for index, result in completed}


def reduce_blocks(plan: SimulationPlan, spec: PayoffSpec, blocks: Mapping[int, BlockResult],
                  order: ReductionOrder = ReductionOrder.natural(),
                  algorithm: Optional[MomentAlgorithm] = None) -> RunResult:
    algorithm = parse_algorithm(algorithm or plan.algorithm)
    totals = [MomentAccumulator(algorithm, plan.precision) for _ in BUMPS]
    for index in order.sequence(len(blocks)):
        for total, part in zip(totals, blocks[index].accumulators[algorithm]):
            total.merge(part)
    down, mid, up = (t.finalize() for t in totals)
    return RunResult(
        algorithm=algorithm,
        order=order,
        down=down,
        mid=mid,
        up=up,
        gamma=_gamma_or_nan(plan, spec, down.mean, mid.mean, up.mean),
        block_count=len(blocks),
        precision=plan.precision,
    )


def run_parallel(plan: SimulationPlan, spec: PayoffSpec,
                 order: ReductionOrder = ReductionOrder.natural(),
                 pool: Optional[BlockWorkerPool] = None) -> RunResult:
    blocks = compute_blocks(plan, spec, (plan.algorithm,), pool=pool)
    result = reduce_blocks(plan, spec, blocks, order)
    logger.info("%s %s: mean=%r gamma=%r", plan.algorithm.value, order, float(result.mid.mean), result.gamma.gamma)
    return result


def simulate_payoffs(plan: SimulationPlan, spec: PayoffSpec,
                     blocks: Optional[Mapping[int, BlockResult]] = None):
    """Full payoff arrays (down, mid, up) in path order, from kept block payoffs or a fresh pass."""
    if blocks is None or any(b.payoffs is None for b in blocks.values()):
        blocks = compute_blocks(plan, spec, keep_payoffs=True)
    ordered = [blocks[i].payoffs for i in sorted(blocks)]
    return tuple(np.concatenate([p[level] for p in ordered]) for level in range(len(BUMPS)))


def audit_draw_ranges(plan: SimulationPlan, blocks: Mapping[int, BlockResult]) -> None:
    """Check that block draw ranges tile [1, N*M*d] with no gap or overlap."""
    expected = 1
    for index in sorted(blocks):
        block = blocks[index]
        if block.first_draw != expected:
            raise EngineError(f"block {index} starts at draw {block.first_draw}, expected {expected}")
        expected = block.last_draw + 1
    if expected != plan.paths * plan.draws_per_path + 1:
        raise EngineError(f"draws end at {expected - 1}, expected {plan.paths * plan.draws_per_path}")
