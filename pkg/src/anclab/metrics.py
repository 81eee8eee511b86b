"""SNR, learning curves, convergence detection and runtime benchmarks."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergenceError, UndefinedReferenceError

DEFAULT_WARMUP = 0.25
SEGMENT_MS = 20.0
SEGMENT_CLAMP = (-10.0, 35.0)


def snr_db(clean, test) -> float:
    """``10 log10(sum(clean^2) / sum((test - clean)^2))``; ``math.inf`` for a zero residual."""
    c = np.asarray(clean, dtype=np.float64).ravel()
    t = np.asarray(test, dtype=np.float64).ravel()
    if c.size != t.size:
        raise ValueError(f"length mismatch: {c.size} vs {t.size}")
    p_clean = float(np.sum(c * c))
    if p_clean == 0:
        raise UndefinedReferenceError("clean reference is all zeros")
    r = t - c
    p_res = float(np.sum(r * r))
    if p_res == 0:
        return math.inf
    return 10.0 * math.log10(p_clean / p_res)


def segmental_snr_db(clean, test, sample_rate: int, frame_ms: float = SEGMENT_MS,
                     clamp=SEGMENT_CLAMP) -> float:
    """Mean of per-frame SNRs, each clamped to ``clamp`` dB.

    Frames where both clean and residual are silent are skipped. Not
    comparable to perceptual scores such as STOI or PESQ.
    """
    c = np.asarray(clean, dtype=np.float64).ravel()
    t = np.asarray(test, dtype=np.float64).ravel()
    if c.size != t.size:
        raise ValueError(f"length mismatch: {c.size} vs {t.size}")
    frame = max(1, int(round(sample_rate * frame_ms / 1000.0)))
    n = (c.size // frame) * frame
    if n == 0:
        raise ValueError("signal shorter than one frame")
    pc = np.sum(c[:n].reshape(-1, frame) ** 2, axis=1)
    pr = np.sum((t[:n] - c[:n]).reshape(-1, frame) ** 2, axis=1)
    lo, hi = clamp
    keep = (pc > 0) | (pr > 0)
    if not np.any(keep):
        raise UndefinedReferenceError("clean reference and residual are all zeros")
    pc, pr = pc[keep], pr[keep]
    with np.errstate(divide="ignore"):
        seg = np.where(pr == 0, hi, np.where(pc == 0, lo, 10 * np.log10(pc / np.where(pr == 0, 1, pr))))
    return float(np.mean(np.clip(seg, lo, hi)))


@dataclass
class SnrReport:
    snr_in: float
    snr_out: float
    improvement: float
    segmental_in: float | None = None
    segmental_out: float | None = None
    warmup_samples: int = 0


def _improvement(snr_out, snr_in):
    if snr_out == snr_in:
        return 0.0
    return snr_out - snr_in


def evaluate_denoise(scenario, output, warmup: float = DEFAULT_WARMUP) -> SnrReport:
    """SNR before and after denoising, ignoring the first ``warmup`` fraction.

    The same prefix is dropped from the unprocessed mix and from the output
    so that pass-through processing scores exactly 0 dB.
    """
    clean = scenario.clean.data
    primary = scenario.primary.data
    out = np.asarray(output, dtype=np.float64).ravel()
    if out.size != clean.size:
        raise ValueError(f"output length {out.size} != scenario length {clean.size}")
    if not 0 <= warmup < 1:
        raise ValueError("warmup must be in [0, 1)")
    start = int(clean.size * warmup)
    c, p, o = clean[start:], primary[start:], out[start:]
    snr_in = snr_db(c, p)
    snr_out = snr_db(c, o)
    rate = scenario.sample_rate
    return SnrReport(
        snr_in=snr_in,
        snr_out=snr_out,
        improvement=_improvement(snr_out, snr_in),
        segmental_in=segmental_snr_db(c, p, rate),
        segmental_out=segmental_snr_db(c, o, rate),
        warmup_samples=start,
    )


@dataclass
class LearningCurve:
    block_mse: np.ndarray
    smoothed: np.ndarray
    floor: float
    block: int
    window: int

    def to_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.smoothed)


def _centered_average(values: np.ndarray, window: int) -> np.ndarray:
    n = values.size
    left = window // 2
    right = window - 1 - left
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(n)
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right, n - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


def learning_curve(e, block: int, window: int = 1) -> LearningCurve:
    """Per-block MSE of an error signal, smoothed by a centered moving average.

    The window shrinks at the edges instead of padding. ``floor`` is the
    median of the last 10% of the smoothed curve.
    """
    if block < 1 or window < 1:
        raise ValueError("block and window must be >= 1")
    e = np.asarray(e, dtype=np.float64).ravel()
    if e.size == 0:
        raise ValueError("empty error signal")
    n_blocks = -(-e.size // block)
    sq = e * e
    sums = np.add.reduceat(sq, np.arange(0, e.size, block))
    counts = np.full(n_blocks, block, dtype=np.float64)
    counts[-1] = e.size - block * (n_blocks - 1)
    block_mse = sums / counts
    smoothed = _centered_average(block_mse, window)
    tail = smoothed[-max(1, math.ceil(0.1 * n_blocks)):]
    return LearningCurve(block_mse, smoothed, float(np.median(tail)), block, window)


def convergence_point(curve: LearningCurve, margin_db: float) -> int:
    """First block after which the smoothed curve never leaves ``floor + margin_db``."""
    if not margin_db > 0:
        raise ValueError("margin_db must be > 0")
    bound = curve.floor * 10 ** (margin_db / 10)
    suffix_max = np.maximum.accumulate(curve.smoothed[::-1])[::-1]
    ok = np.flatnonzero(suffix_max <= bound)
    if ok.size == 0:
        raise NoConvergenceError(f"curve never settles within {margin_db} dB of its floor")
    return int(ok[0])


@dataclass
class RuntimeRecord:
    name: str
    seconds: float
    unit: str  # "sample" for streaming filters, "solution" for optimizers
    evaluations: int | None = None
    repetitions: int = 0
    all_seconds: list = field(default_factory=list, repr=False)
    budget: float = 1.0 / 48_000

    @property
    def realtime_feasible(self) -> bool:
        return self.unit == "sample" and self.seconds < self.budget


@dataclass
class RuntimeTable:
    records: list[RuntimeRecord]

    def __post_init__(self):
        for r in self.records:
            if not r.seconds > 0:
                raise ValueError(f"non-positive time for {r.name}")
        self.records.sort(key=lambda r: r.seconds)

    def __getitem__(self, name) -> RuntimeRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def names(self) -> list[str]:
        return [r.name for r in self.records]

    def write_csv(self, path, order=None) -> None:
        """Write one row per algorithm; ``rank`` is the position in the sorted table.

        ``order`` fixes the row order (e.g. for diffable output); the default
        is ascending time.
        """
        rank = {r.name: i + 1 for i, r in enumerate(self.records)}
        records = self.records if order is None else [self[n] for n in order if n in rank]
        rows = [
            [r.name, r.unit, f"{r.seconds:.6e}", "" if r.evaluations is None else r.evaluations,
             r.repetitions, int(r.realtime_feasible), rank[r.name]]
            for r in records
        ]
        write_csv(path, ["algorithm", "unit", "seconds", "evaluations", "repetitions",
                         "realtime_feasible", "rank"], rows)


STREAMING = ("LMS", "NLMS", "RLS", "LMS_Q15")
METAHEURISTIC = ("PSO", "JAYA", "SA")


def bench_runtime(algorithms, scenario, repetitions: int = 5, filter_config=None,
                  num_taps_opt: int = 16, opt_window: int = 48_000, stream_samples: int = 48_000,
                  rls_samples: int = 4_800, opt_params=None, seed: int = 0) -> RuntimeTable:
    """Median-of-repetitions runtime for streaming filters and optimizers.

    Streaming filters report seconds per processed sample over
    ``stream_samples`` samples (``rls_samples`` for RLS, whose per-sample
    cost is flat). Optimizers report seconds per optimized weight vector on
    a ``num_taps_opt``-tap problem; their evaluation counts are attached.
    Streaming filters get an untimed warm-up pass (JIT compilation).
    ``filter_config`` is one config for all filters or a ``{kind: config}`` dict.
    """
    from . import filters, metaheuristics

    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    if isinstance(filter_config, dict):
        cfgs = {filters.normalize_kind(k): v for k, v in filter_config.items()}
    else:
        cfgs = {}
    default = filter_config if isinstance(filter_config, filters.FilterConfig) else filters.FilterConfig()
    x = scenario.reference.data
    d = scenario.primary.data
    budget = 1.0 / scenario.sample_rate
    opt_params = opt_params or {}
    names = [str(a).upper() for a in algorithms]
    records = []

    # streaming filters: interleave repetitions so host drift hits all alike
    stream = [filters.normalize_kind(n) for n in names if n not in METAHEURISTIC]
    lengths = {k: min(rls_samples if k == "RLS" else stream_samples, x.size) for k in stream}
    cfg = {k: cfgs.get(k, default) for k in stream}
    for kind in stream:
        warm = min(lengths[kind], 2 * cfg[kind].block_size)
        filters.process_signal(filters.filter_init(kind, cfg[kind]), x[:warm], d[:warm])
    stream_times = {k: [] for k in stream}
    for _ in range(repetitions):
        for kind in stream:
            n = lengths[kind]
            state = filters.filter_init(kind, cfg[kind])
            t0 = time.perf_counter()
            filters.process_signal(state, x[:n], d[:n])
            stream_times[kind].append((time.perf_counter() - t0) / n)
    for kind in stream:
        ts = stream_times[kind]
        records.append(RuntimeRecord(kind, statistics.median(ts), "sample", None,
                                     repetitions, ts, budget))

    for name in names:
        if name not in METAHEURISTIC:
            continue
        fn, param_cls = metaheuristics.OPTIMIZERS[name]
        n = min(opt_window, x.size)
        obj = metaheuristics.Objective(x[:n], d[:n], num_taps_opt)
        params = opt_params.get(name) or param_cls(seed=seed)
        times, evals = [], None
        for _ in range(repetitions):
            run = fn(obj, params)
            times.append(run.wall_time)
            evals = run.evaluations
        records.append(RuntimeRecord(name, statistics.median(times), "solution", evals,
                                     repetitions, times, budget))
    return RuntimeTable(records)


def write_csv(path, header, rows) -> None:
    """Plot-ready CSV: one header row, comma separated, rows in given order."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
