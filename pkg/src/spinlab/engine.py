"""Finite-run experiments: coincidence counting, CHSH and disagreement-rate tests.

Randomness contract: every unit of work (one run of one setting, one shared
run, one scan point) owns a generator derived from the root seed and a fixed
key, e.g. ``(stream_tag, run_index, setting_index)``. Results are reduced in
key order, so output is bit-identical for any number of workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import (
    ConfigError,
    CounterfactualUnsupportedError,
    DegenerateRunError,
    DomainError,
    UnsupportedConfigurationError,
    UnsupportedModelError,
)
from .geometry import Direction, SmearingKind, Z_AXIS, in_plane, sample_directions
from .models import (
    ContextualSampler,
    FactorizedModel,
    HiddenVariableModel,
    SpinFunctionModel,
    model_from_name,
)
from .quantum import AnalyzerSpec, SettingPair, conditional_correlation
from .stats import (
    EstimateWithError,
    binomial_ci,
    combine_quadrature,
    moment_estimate,
    pm_one_estimate,
    violation_zscore,
)

# Fixed chunk length; part of the stream layout, so changing it changes results.
CHUNK = 1 << 18

DEFAULT_PAIRS = 10_000
DEFAULT_RUNS = 100

_MAX_SEED = 2**64 - 1

# Stream tags keep the substreams of different procedures disjoint.
_FRESH, _SHARED, _HERBERT, _SCAN = 1, 2, 3, 4

T = TypeVar("T")
R = TypeVar("R")


class SamplingMode(str, enum.Enum):
    SHARED = "shared"
    FRESH = "fresh"


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under root ``seed``."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or not 0 <= seed <= _MAX_SEED:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _map_ordered(fn: Callable[[T], R], tasks: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class PairRecord:
    micro_a: Direction
    micro_b: Direction
    outcome_1: int | None
    outcome_2: int | None
    detected_1: bool
    detected_2: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "micro_a": self.micro_a.to_list(),
            "micro_b": self.micro_b.to_list(),
            "outcome_1": self.outcome_1,
            "outcome_2": self.outcome_2,
            "detected_1": self.detected_1,
            "detected_2": self.detected_2,
        }


@dataclass(frozen=True)
class RunResult:
    """One run of N pairs at one setting.

    ``r_n`` is the coincidence-conditional correlation. The unconditional
    estimate counts undetected pairs as product 0 and so carries the
    η(A)η(B) factor.
    """

    r_n: float
    stderr: float
    coincidence_count: int
    total_pairs: int
    product_sum: int
    r_unconditional: float
    stderr_unconditional: float
    records: tuple[PairRecord, ...] = field(default=(), repr=False)

    @property
    def agreements(self) -> int:
        """Coincident pairs whose two recorded outcomes are equal."""
        return (self.coincidence_count + self.product_sum) // 2

    @property
    def estimate(self) -> EstimateWithError:
        return EstimateWithError(self.r_n, self.stderr, self.coincidence_count)

    @property
    def unconditional(self) -> EstimateWithError:
        return EstimateWithError(self.r_unconditional, self.stderr_unconditional, self.total_pairs)

    @classmethod
    def from_counts(
        cls, product_sum: int, coincidences: int, total: int, records: Iterable[PairRecord] = ()
    ) -> RunResult:
        if coincidences == 0:
            raise DegenerateRunError(
                f"no coincidences among {total} pairs; raise N or the efficiencies", 0, total
            )
        cond = pm_one_estimate(product_sum, coincidences)
        # unconditional products lie in {-1, 0, 1}: Σx² equals the coincidence count
        uncond = moment_estimate(float(product_sum), float(coincidences), total)
        return cls(
            r_n=cond.value,
            stderr=cond.stderr,
            coincidence_count=coincidences,
            total_pairs=total,
            product_sum=product_sum,
            r_unconditional=uncond.value,
            stderr_unconditional=uncond.stderr,
            records=tuple(records),
        )


def pool_results(results: Iterable[RunResult]) -> RunResult:
    """Merge runs of the same setting into one pooled result (records dropped)."""
    ps = cs = ts = 0
    for r in results:
        ps += r.product_sum
        cs += r.coincidence_count
        ts += r.total_pairs
    return RunResult.from_counts(ps, cs, ts)


def chsh_statistic(e1: float, e2: float, e3: float, e4: float) -> float:
    """|E1 − E2| + |E3 + E4| for E's ordered (A,B), (A,B′), (A′,B′), (A′,B)."""
    for e in (e1, e2, e3, e4):
        if not abs(e) <= 1.0:
            raise DomainError(f"correlations must lie in [-1, 1], got {e!r}")
    return abs(e1 - e2) + abs(e3 + e4)


@dataclass(frozen=True)
class ChshResult:
    """CHSH summary over M runs.

    ``e_hat`` pools all coincidences per setting; ``s`` is computed from
    ``e_hat`` and its error combines the four standard errors in quadrature.
    """

    e_hat: tuple[float, float, float, float]
    e_stderr: tuple[float, float, float, float]
    s: float
    stderr_s: float
    per_run_s: tuple[float, ...]
    per_run_e: tuple[tuple[float, float, float, float], ...]
    mode: SamplingMode

    @property
    def estimate(self) -> EstimateWithError:
        return EstimateWithError(self.s, self.stderr_s, len(self.per_run_s))

    @property
    def mean_run_s(self) -> float:
        return float(np.mean(self.per_run_s))

    @property
    def z_score(self) -> float:
        """Standard errors above the bound 2; NaN when the error is zero."""
        if self.stderr_s == 0.0:
            return math.nan
        return violation_zscore(self.estimate, 2.0)

    def runs_above(self, bound: float = 2.0) -> int:
        return sum(1 for s in self.per_run_s if s > bound)


def _chsh_from_runs(runs: Sequence[Sequence[RunResult]], mode: SamplingMode) -> ChshResult:
    if any(len(r) != 4 for r in runs):
        raise ConfigError("CHSH needs exactly four settings per run")
    pooled = [pool_results(run[k] for run in runs) for k in range(4)]
    e_hat = tuple(p.r_n for p in pooled)
    e_se = tuple(p.stderr for p in pooled)
    per_run_e = tuple(tuple(r.r_n for r in run) for run in runs)
    return ChshResult(
        e_hat=e_hat,  # type: ignore[arg-type]
        e_stderr=e_se,  # type: ignore[arg-type]
        s=chsh_statistic(*e_hat),
        stderr_s=combine_quadrature(*e_se),
        per_run_s=tuple(chsh_statistic(*e) for e in per_run_e),
        per_run_e=per_run_e,  # type: ignore[arg-type]
        mode=mode,
    )


def _detections(eta: float, rng: np.random.Generator, size: int) -> np.ndarray:
    if eta >= 1.0:
        return np.ones(size, dtype=bool)
    return rng.random(size) < eta


def simulate_setting(
    source: HiddenVariableModel | ContextualSampler,
    pair: SettingPair,
    n: int,
    rng: np.random.Generator,
    record: bool = False,
) -> RunResult:
    """Draw ``n`` pairs at one setting and count coincidences.

    Per pair: microscopic directions from both smearing laws, outcomes from
    the source, then independent Bernoulli(η) detection on each side.
    """
    if n < 1:
        raise DomainError(f"pairs per run must be >= 1, got {n!r}")
    coincidences = 0
    product_sum = 0
    records: list[PairRecord] = []
    for start in range(0, n, CHUNK):
        m = min(CHUNK, n - start)
        a = sample_directions(pair.first.smearing, rng, m)
        b = sample_directions(pair.second.smearing, rng, m)
        o1, o2 = source.outcomes(a, b, rng)
        d1 = _detections(pair.first.efficiency, rng, m)
        d2 = _detections(pair.second.efficiency, rng, m)
        both = d1 & d2
        prod = o1.astype(np.int64) * o2.astype(np.int64)
        coincidences += int(np.count_nonzero(both))
        product_sum += int(prod[both].sum())
        if record:
            records.extend(_records(a, b, o1, o2, d1, d2))
    return RunResult.from_counts(product_sum, coincidences, n, records)


def _records(a, b, o1, o2, d1, d2) -> Iterable[PairRecord]:
    for i in range(len(o1)):
        yield PairRecord(
            micro_a=Direction.from_vector(a[i]),
            micro_b=Direction.from_vector(b[i]),
            outcome_1=int(o1[i]) if d1[i] else None,
            outcome_2=int(o2[i]) if d2[i] else None,
            detected_1=bool(d1[i]),
            detected_2=bool(d2[i]),
        )


def _require_counterfactual(model: Any, pairs: Sequence[SettingPair]) -> SpinFunctionModel:
    if not isinstance(model, SpinFunctionModel):
        raise CounterfactualUnsupportedError(
            f"{model!r} cannot be evaluated at several settings on one draw; use fresh sampling"
        )
    for p in pairs:
        for side in (p.first, p.second):
            if not side.is_sharp:
                raise UnsupportedConfigurationError("shared sampling requires sharp (delta) analyzers")
            if side.efficiency != 1.0:
                raise UnsupportedConfigurationError("shared sampling requires unit detection efficiency")
    return model


def shared_run(
    model: SpinFunctionModel, pairs: Sequence[SettingPair], n: int, rng: np.random.Generator, record: bool = False
) -> list[RunResult]:
    """Evaluate every setting on one common draw of λ₁…λ_N."""
    model = _require_counterfactual(model, pairs)
    if n < 1:
        raise DomainError(f"pairs per run must be >= 1, got {n!r}")
    sums = [0] * len(pairs)
    records: list[list[PairRecord]] = [[] for _ in pairs]
    for start in range(0, n, CHUNK):
        m = min(CHUNK, n - start)
        lam = model.sample_lambda(rng, m)
        for k, p in enumerate(pairs):
            a = p.first.orientation.as_array()
            b = p.second.orientation.as_array()
            o1, o2 = model.side_outcomes(lam, a, b)
            sums[k] += int((o1.astype(np.int64) * o2).sum())
            if record:
                ones = np.ones(m, dtype=bool)
                records[k].extend(
                    _records(np.broadcast_to(a, (m, 3)), np.broadcast_to(b, (m, 3)), o1, o2, ones, ones)
                )
    return [RunResult.from_counts(s, n, n, rec) for s, rec in zip(sums, records)]


def _as_analyzer(x: AnalyzerSpec | Direction) -> AnalyzerSpec:
    return x if isinstance(x, AnalyzerSpec) else AnalyzerSpec.make(x)


def chsh_pairs(
    a: AnalyzerSpec | Direction,
    a2: AnalyzerSpec | Direction,
    b: AnalyzerSpec | Direction,
    b2: AnalyzerSpec | Direction,
) -> tuple[SettingPair, SettingPair, SettingPair, SettingPair]:
    """Setting pairs (A,B), (A,B′), (A′,B′), (A′,B)."""
    a, a2, b, b2 = (_as_analyzer(x) for x in (a, a2, b, b2))
    return SettingPair(a, b), SettingPair(a, b2), SettingPair(a2, b2), SettingPair(a2, b)


def standard_chsh_analyzers(
    epsilon: float = 0.0, kind: SmearingKind | str = SmearingKind.DELTA, efficiency: float = 1.0
) -> tuple[AnalyzerSpec, AnalyzerSpec, AnalyzerSpec, AnalyzerSpec]:
    """A, A′, B, B′ in one plane at 0°, 90°, 45°, 135°."""
    angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
    return tuple(AnalyzerSpec.make(in_plane(t), epsilon, kind, efficiency) for t in angles)  # type: ignore[return-value]


def shared_sample_chsh(
    model: SpinFunctionModel,
    analyzers: Sequence[AnalyzerSpec | Direction],
    n: int,
    seed: int,
    runs: int = 1,
    workers: int = 1,
) -> ChshResult:
    """CHSH with all four correlations of a run computed on the same λ's.

    ``analyzers`` is (A, A′, B, B′). Each run's S is at most 2 by the
    pointwise identity |y − y′| + |y + y′| = 2 for ±1 values.
    """
    if len(analyzers) != 4:
        raise ConfigError("shared_sample_chsh needs four analyzers (A, A', B, B')")
    pairs = chsh_pairs(*analyzers)
    _require_counterfactual(model, pairs)
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs!r}")
    results = _map_ordered(lambda m: shared_run(model, pairs, n, substream(seed, _SHARED, m)), range(runs), workers)
    return _chsh_from_runs(results, SamplingMode.SHARED)


def _fresh_runs(source, pairs: Sequence[SettingPair], n: int, runs: int, seed: int, workers: int, record: bool = False):
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs!r}")
    tasks = [(m, k) for m in range(runs) for k in range(len(pairs))]

    def work(task: tuple[int, int]) -> RunResult:
        m, k = task
        return simulate_setting(source, pairs[k], n, substream(seed, _FRESH, m, k), record)

    flat = _map_ordered(work, tasks, workers)
    width = len(pairs)
    return [flat[m * width : (m + 1) * width] for m in range(runs)]


def fresh_sample_chsh(
    model: HiddenVariableModel | ContextualSampler,
    settings: Sequence[SettingPair],
    n: int,
    runs: int,
    seed: int,
    workers: int = 1,
) -> ChshResult:
    """CHSH with an independent sample of N pairs for every setting of every run."""
    if len(settings) != 4:
        raise ConfigError("fresh_sample_chsh needs four setting pairs")
    return _chsh_from_runs(_fresh_runs(model, settings, n, runs, seed, workers), SamplingMode.FRESH)


@dataclass(frozen=True)
class HerbertResult:
    """Disagreement rates after rotating detector B by θ and by 2θ.

    ``satisfied`` compares the raw rates. ``violated`` requires the Wilson
    intervals to separate, ``consistent_with_equality`` that they overlap.
    """

    theta: float
    d_theta: float
    d_2theta: float
    stderr_theta: float
    stderr_2theta: float
    ci_theta: tuple[float, float]
    ci_2theta: tuple[float, float]
    count_theta: int
    count_2theta: int
    level: float

    @property
    def satisfied(self) -> bool:
        return self.d_2theta <= 2.0 * self.d_theta

    @property
    def violated(self) -> bool:
        return self.ci_2theta[0] > 2.0 * self.ci_theta[1]

    @property
    def consistent_with_equality(self) -> bool:
        return self.ci_2theta[0] <= 2.0 * self.ci_theta[1] and 2.0 * self.ci_theta[0] <= self.ci_2theta[1]


def _disagreement(result: RunResult, level: float) -> tuple[float, float, tuple[float, float]]:
    # side-2 bit is the negated outcome, so bits disagree when outcomes agree
    k, n = result.agreements, result.coincidence_count
    p = k / n
    se = math.sqrt(p * (1.0 - p) / n)
    return p, se, binomial_ci(k, n, level)


def herbert_scan(
    model: SpinFunctionModel | ContextualSampler,
    thetas: Sequence[float],
    n: int,
    seed: int,
    *,
    epsilon: float = 0.0,
    kind: SmearingKind | str = SmearingKind.DELTA,
    efficiency: float = 1.0,
    level: float = 0.9999,
    workers: int = 1,
) -> list[HerbertResult]:
    """Empirical d(θ) and d(2θ) with detector A fixed on +z and B rotated in the xz-plane."""
    if not isinstance(model, (SpinFunctionModel, ContextualSampler)):
        raise UnsupportedModelError(f"disagreement test needs a spin-function or contextual source, got {model!r}")
    for t in thetas:
        if t < 0.0 or 2.0 * t > math.pi + 1e-12:
            raise DomainError(f"theta must satisfy 0 <= theta and 2*theta <= pi, got {t!r}")
    a = AnalyzerSpec.make(Z_AXIS, epsilon, kind, efficiency)

    def work(task: tuple[int, int]) -> RunResult:
        i, j = task
        b = AnalyzerSpec.make(in_plane(min((j + 1) * thetas[i], math.pi)), epsilon, kind, efficiency)
        return simulate_setting(model, SettingPair(a, b), n, substream(seed, _HERBERT, i, j))

    tasks = [(i, j) for i in range(len(thetas)) for j in (0, 1)]
    flat = _map_ordered(work, tasks, workers)
    out = []
    for i, t in enumerate(thetas):
        r1, r2 = flat[2 * i], flat[2 * i + 1]
        d1, se1, ci1 = _disagreement(r1, level)
        d2, se2, ci2 = _disagreement(r2, level)
        out.append(HerbertResult(t, d1, d2, se1, se2, ci1, ci2, r1.coincidence_count, r2.coincidence_count, level))
    return out


@dataclass(frozen=True)
class ScanPoint:
    theta: float
    e_qm_closed: float
    e_model_mc: float
    stderr: float
    e_model_closed: float


def correlation_scan(
    model: HiddenVariableModel | ContextualSampler,
    thetas: Sequence[float],
    n: int,
    seed: int,
    *,
    epsilon: float = 0.0,
    kind: SmearingKind | str = SmearingKind.DELTA,
    efficiency: float = 1.0,
    workers: int = 1,
) -> list[ScanPoint]:
    """Conditional correlation of ``model`` against the singlet prediction over a θ grid."""
    a = AnalyzerSpec.make(Z_AXIS, epsilon, kind, efficiency)
    pairs = [SettingPair(a, AnalyzerSpec.make(in_plane(t), epsilon, kind, efficiency)) for t in thetas]
    results = _map_ordered(
        lambda i: simulate_setting(model, pairs[i], n, substream(seed, _SCAN, i)), range(len(pairs)), workers
    )
    points = []
    for t, p, r in zip(thetas, pairs, results):
        if isinstance(model, ContextualSampler):
            closed = conditional_correlation(p)
        elif a.is_sharp or isinstance(model, FactorizedModel):
            try:
                closed = model.correlation_exact(p.first.orientation, p.second.orientation)
            except UnsupportedModelError:
                closed = math.nan
        else:
            closed = math.nan
        points.append(ScanPoint(float(t), conditional_correlation(p), r.r_n, r.stderr, closed))
    return points


@dataclass(frozen=True)
class RunConfig:
    model: str
    settings: tuple[SettingPair, ...]
    seed: int
    pairs_per_run: int = DEFAULT_PAIRS
    runs: int = DEFAULT_RUNS
    mode: SamplingMode = SamplingMode.FRESH
    workers: int = 1
    record_pairs: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        if not self.settings:
            raise ConfigError("at least one setting pair is required")
        if self.pairs_per_run < 1 or self.runs < 1:
            raise ConfigError("pairs_per_run and runs must both be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= _MAX_SEED:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        self.source()  # unknown names fail here

    def source(self) -> HiddenVariableModel | ContextualSampler:
        return model_from_name(self.model)


def run_experiment(config: RunConfig, setting: SettingPair, rng: np.random.Generator) -> RunResult:
    """One run of ``config.pairs_per_run`` pairs at ``setting``."""
    return simulate_setting(config.source(), setting, config.pairs_per_run, rng, config.record_pairs)


@dataclass(frozen=True)
class Report:
    config: RunConfig
    runs: tuple[tuple[RunResult, ...], ...]
    chsh: ChshResult | None

    def pooled(self) -> list[RunResult]:
        return [pool_results(run[k] for run in self.runs) for k in range(len(self.config.settings))]

    def to_csv(self) -> str:
        lines = ["run_index,setting_index,r_n,stderr,coincidences,total_pairs,r_unconditional,stderr_unconditional"]
        for m, run in enumerate(self.runs):
            for k, r in enumerate(run):
                lines.append(
                    f"{m},{k},{r.r_n!r},{r.stderr!r},{r.coincidence_count},{r.total_pairs},"
                    f"{r.r_unconditional!r},{r.stderr_unconditional!r}"
                )
        return "\n".join(lines) + "\n"


def reproduce(config: RunConfig) -> Report:
    """Run every setting ``config.runs`` times; identical config gives identical output."""
    source = config.source()
    if config.mode is SamplingMode.SHARED:
        _require_counterfactual(source, config.settings)
        runs = _map_ordered(
            lambda m: shared_run(
                source, config.settings, config.pairs_per_run, substream(config.seed, _SHARED, m), config.record_pairs
            ),
            range(config.runs),
            config.workers,
        )
    else:
        runs = _fresh_runs(
            source, config.settings, config.pairs_per_run, config.runs, config.seed, config.workers, config.record_pairs
        )
    chsh = _chsh_from_runs(runs, config.mode) if len(config.settings) == 4 else None
    return Report(config, tuple(tuple(r) for r in runs), chsh)
