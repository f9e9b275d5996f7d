"""Monte Carlo and multilevel Monte Carlo estimation from coupled sample pools.

A correction sample holds the quantity of interest evaluated at one
material draw on a level and (when coupled) on the next-coarser level,
with the measured cost of the pair.  Pools are append-only and keyed by
(level, sample index); estimator reductions always run in ascending
sample-index order, so results do not depend on worker scheduling.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from mlmc_seis.rng import make_rng, sample_key
from mlmc_seis.store import append_pool_records

if TYPE_CHECKING:
    from mlmc_seis.plan import Plan


def mc_mean(values: Sequence[float]) -> float:
    """Arithmetic mean; the unbiased single-level estimator."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("mean needs at least one value")
    return float(np.mean(values))


def sample_variance(values: Sequence[float]) -> float:
    """Unbiased sample variance with 1/(N-1) normalization."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("sample variance needs at least two values")
    return float(np.var(values, ddof=1))


def bootstrap_ci(
    values: Sequence[float],
    statistic: str = "mean",
    resamples: int = 1000,
    coverage: float = 0.95,
    rng: np.random.Generator | str = "bootstrap",
) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for the mean or the variance."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("bootstrap needs at least two values")
    if resamples < 100:
        raise ValueError("use at least 100 resamples")
    if statistic not in ("mean", "variance"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if isinstance(rng, str):
        rng = make_rng(rng)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    draws = values[idx]
    if statistic == "mean":
        stats = draws.mean(axis=1)
    else:
        stats = draws.var(axis=1, ddof=1)
    alpha = 1.0 - coverage
    lo, hi = np.quantile(stats, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


@dataclass(frozen=True)
class CorrectionSample:
    """One coupled evaluation: Q_l and (unless at the base level) Q_(l-1)."""

    level: int
    index: int
    seed: str
    fine: float
    coarse: float | None
    work_s: float
    timestamp: float

    def __post_init__(self) -> None:
        if not self.work_s > 0:
            raise ValueError("work must be positive")


@dataclass
class SamplePool:
    """Append-only store of correction samples, unique (level, index) per pool."""

    provenance: dict = field(default_factory=dict)
    _records: dict[int, dict[int, CorrectionSample]] = field(default_factory=dict)

    def add(self, rec: CorrectionSample) -> None:
        level = self._records.setdefault(rec.level, {})
        if rec.index in level:
            raise ValueError(f"duplicate sample index {rec.index} at level {rec.level}")
        level[rec.index] = rec

    def has(self, level: int, index: int) -> bool:
        return index in self._records.get(level, {})

    def level_records(self, level: int) -> list[CorrectionSample]:
        recs = self._records.get(level, {})
        return [recs[i] for i in sorted(recs)]

    def levels(self) -> list[int]:
        return sorted(self._records)

    def count(self, level: int) -> int:
        return len(self._records.get(level, {}))

    def fine_values(self, level: int, count: int | None = None) -> np.ndarray:
        recs = self.level_records(level)
        if count is not None:
            if len(recs) < count:
                raise ValueError(f"level {level} holds {len(recs)} samples, need {count}")
            recs = recs[:count]
        return np.array([r.fine for r in recs])

    def correction_values(self, level: int, count: int | None = None) -> np.ndarray:
        recs = [r for r in self.level_records(level) if r.coarse is not None]
        if count is not None:
            if len(recs) < count:
                raise ValueError(
                    f"level {level} holds {len(recs)} coupled samples, need {count}"
                )
            recs = recs[:count]
        return np.array([r.fine - r.coarse for r in recs])

    def total_work(self, level: int | None = None, count: int | None = None) -> float:
        levels = [level] if level is not None else self.levels()
        total = 0.0
        for lv in levels:
            recs = self.level_records(lv)
            if count is not None:
                recs = recs[:count]
            total += sum(r.work_s for r in recs)
        return total


def mlmc_estimate(pool: SamplePool, plan: "Plan") -> float:
    """Telescoping estimate: base-level mean plus correction means.

    Each mean runs over the first N_l pool samples of its level, so the
    estimate is reproducible from the pool alone.
    """
    total = mc_mean(pool.fine_values(plan.l0, plan.n_samples[0]))
    for l, n in zip(plan.level_range()[1:], plan.n_samples[1:]):
        total += mc_mean(pool.correction_values(l, n))
    return total


def mlmc_estimator_variance(pool: SamplePool, plan: "Plan") -> float:
    """Sum of per-level sample variances over the sample counts."""
    total = sample_variance(pool.fine_values(plan.l0, plan.n_samples[0])) / plan.n_samples[0]
    for l, n in zip(plan.level_range()[1:], plan.n_samples[1:]):
        total += sample_variance(pool.correction_values(l, n)) / n
    return total


def _evaluate_batch(model, level: int, kind: str, run_id: str,
                    indices: Sequence[int]) -> list[CorrectionSample]:
    out = []
    for index in indices:
        key = sample_key(run_id, level, index)
        try:
            theta = model.draw(key)
            fine, work = model.evaluate(theta, level)
            coarse = None
            if kind == "coupled":
                coarse, work_c = model.evaluate(theta, level - 1)
                work += work_c
        except Exception as exc:
            raise RuntimeError(f"sample {key} failed: {exc}") from exc
        out.append(CorrectionSample(
            level=level, index=index, seed=key, fine=float(fine),
            coarse=None if coarse is None else float(coarse),
            work_s=float(work), timestamp=time.time(),
        ))
    return out


def run_samples(
    model,
    level: int,
    kind: str,
    count: int,
    pool: SamplePool,
    run_id: str,
    pool_path: Path | None = None,
    workers: int = 1,
) -> SamplePool:
    """Ensure the pool holds samples 0..count-1 at the level, computing the missing ones.

    Coupled samples evaluate the fine and coarse levels on the same
    material draw.  Completed samples are appended to the pool file as
    they finish, so an interrupted run resumes without recomputation.
    """
    if kind not in ("fine-only", "coupled"):
        raise ValueError(f"kind must be 'fine-only' or 'coupled', got {kind!r}")
    if kind == "coupled" and level < 1:
        raise ValueError("coupled sampling needs level >= 1")
    todo = [i for i in range(count) if not pool.has(level, i)]
    if not todo:
        return pool
    qoi_kind = pool.provenance.get("qoi_kind", "?")

    def commit(records: list[CorrectionSample]) -> None:
        for rec in records:
            pool.add(rec)
        if pool_path is not None:
            append_pool_records(pool_path, records, qoi_kind)

    if workers <= 1:
        # batch of one keeps the resume granularity at single samples
        for index in todo:
            commit(_evaluate_batch(model, level, kind, run_id, [index]))
        return pool

    batch = max(1, math.ceil(len(todo) / (workers * 8)))
    batches = [todo[i : i + batch] for i in range(0, len(todo), batch)]
    with ProcessPoolExecutor(max_workers=workers) as pox:
        pending = {
            pox.submit(_evaluate_batch, model, level, kind, run_id, b) for b in batches
        }
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                commit(fut.result())
    return pool
