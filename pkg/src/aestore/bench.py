"""Seeded failure-injection benchmark producing one CSV row per download."""

from __future__ import annotations

import csv
import logging
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

from .manifest import file_digest
from .repair import RepairConfig, Strategy, download, entangle
from .store import (
    ChunkStore,
    DelayedStore,
    DiskStore,
    FailureInjectingStore,
    FailurePolicy,
    GatewayStore,
    LatencyModel,
    MemoryStore,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "strategy", "failure_rate", "trial", "seed", "success", "wall_time_ms", "total_requests",
    "failed_data_blocks", "parity_requests_mean", "parity_requests_min", "parity_requests_max",
)
WALL_TIME_COLUMNS = ("wall_time_ms",)

SUMMARY_COLUMNS = (
    "strategy", "failure_rate", "trials", "successes", "mean_wall_ms", "sem_wall_ms",
    "mean_total_requests", "parity_mean", "parity_min", "parity_max",
    "parity_per_failure_min", "parity_per_failure_max",
)

FULL_SCALE_TRIALS = 600


@dataclass
class BenchSpec:
    file_size: int = 1 << 20
    s: int = 5
    p: int = 5
    block_size: int = 4096
    failure_rates: Sequence[float] = (0.0, 0.05, 0.10, 0.15)
    trials: int = 100
    strategies: Sequence[str] = ("hierarchical", "round_robin")
    seed: int = 0
    backend: str = "memory"
    deterministic: bool = True
    max_depth: Optional[int] = 8
    hedge_delay: Optional[float] = 0.150
    latency_median: float = 0.0  # seconds; 0 disables the latency simulation
    latency_sigma: float = 0.0
    store_dir: Optional[str] = None
    gateway_url: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for r in self.failure_rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"failure rate {r} outside [0, 1]")
        self.strategies = tuple(Strategy(s).value for s in self.strategies)

    def repair_config(self, strategy: str) -> RepairConfig:
        return RepairConfig(
            strategy=strategy,
            max_depth=self.max_depth,
            hedge_delay=None if self.deterministic else self.hedge_delay,
            deterministic=self.deterministic,
        )


@dataclass
class TrialResult:
    strategy: str
    failure_rate: float
    trial: int
    seed: int
    success: bool
    wall_time_ms: float
    total_requests: int
    parity_requests: list[int] = field(default_factory=list)

    @property
    def parity_mean(self) -> float:
        pr = self.parity_requests
        return sum(pr) / len(pr) if pr else 0.0

    def row(self) -> list:
        pr = self.parity_requests
        return [
            self.strategy, f"{self.failure_rate:g}", self.trial, self.seed, int(self.success),
            f"{self.wall_time_ms:.3f}", self.total_requests, len(pr), f"{self.parity_mean:.4f}",
            min(pr) if pr else 0, max(pr) if pr else 0,
        ]


def make_backend(spec: BenchSpec) -> ChunkStore:
    if spec.backend == "memory":
        return MemoryStore()
    if spec.backend == "disk":
        if not spec.store_dir:
            raise ValueError("disk backend needs a store directory")
        return DiskStore(spec.store_dir)
    if spec.backend == "gateway":
        if not spec.gateway_url:
            raise ValueError("gateway backend needs a gateway URL")
        return GatewayStore(spec.gateway_url)
    raise ValueError(f"unknown backend {spec.backend!r}")


def bench_file(spec: BenchSpec) -> bytes:
    return random.Random(spec.seed).randbytes(spec.file_size)


def summarize(results: list[TrialResult]) -> list[dict]:
    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.strategy, r.failure_rate), []).append(r)
    out = []
    for (strategy, rate), rs in groups.items():
        walls = [r.wall_time_ms for r in rs]
        sem = statistics.stdev(walls) / math.sqrt(len(walls)) if len(walls) > 1 else 0.0
        means = [r.parity_mean for r in rs if r.parity_requests]
        pooled = [c for r in rs for c in r.parity_requests]
        out.append({
            "strategy": strategy,
            "failure_rate": rate,
            "trials": len(rs),
            "successes": sum(r.success for r in rs),
            "mean_wall_ms": statistics.fmean(walls),
            "sem_wall_ms": sem,
            "mean_total_requests": statistics.fmean(r.total_requests for r in rs),
            "parity_mean": statistics.fmean(means) if means else 0.0,
            "parity_min": min(means) if means else 0.0,
            "parity_max": max(means) if means else 0.0,
            "parity_per_failure_min": min(pooled) if pooled else 0,
            "parity_per_failure_max": max(pooled) if pooled else 0,
        })
    return out


def format_summary(summary: list[dict]) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for s in summary:
        cells = []
        for c in SUMMARY_COLUMNS:
            v = s[c]
            cells.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines)


def run_bench(spec: BenchSpec, out: IO[str], base_store: Optional[ChunkStore] = None) -> list[TrialResult]:
    """Entangle one seeded file, then download it once per (strategy, rate, trial).

    Rows are written and flushed as they complete; if a trial raises, a
    ``# ABORTED`` line is appended before the exception propagates.
    """
    data = bench_file(spec)
    digest = file_digest(data)
    store = base_store if base_store is not None else make_backend(spec)
    manifest = entangle(data, store, block_size=spec.block_size, s=spec.s, p=spec.p)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    results = []
    where = ""
    try:
        for strategy in spec.strategies:
            cfg = spec.repair_config(strategy)
            for rate in spec.failure_rates:
                for trial in range(spec.trials):
                    where = f"strategy={strategy} rate={rate:g} trial={trial}"
                    seed = spec.seed + trial
                    trial_store: ChunkStore = FailureInjectingStore(store, FailurePolicy.bernoulli(rate, seed))
                    if spec.latency_median > 0:
                        trial_store = DelayedStore(
                            trial_store, LatencyModel(spec.latency_median, spec.latency_sigma, seed))
                    got, report = download(manifest, cfg, trial_store)
                    res = TrialResult(
                        strategy=strategy,
                        failure_rate=rate,
                        trial=trial,
                        seed=seed,
                        success=got is not None and file_digest(got) == digest,
                        wall_time_ms=report.wall_time * 1000.0,
                        total_requests=report.total_blocks_requested,
                        parity_requests=list(report.parity_requests_per_failure),
                    )
                    results.append(res)
                    writer.writerow(res.row())
                    out.flush()
                log.info("%s rate=%g done", strategy, rate)
    except BaseException as e:
        out.write(f"# ABORTED at {where}: {type(e).__name__}: {e}\n")
        out.flush()
        raise
    return results
