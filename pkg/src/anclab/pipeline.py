"""Simulated real-time data path with ping-pong (double) buffering.

A producer plays the role of the DMA engine: it copies the next block of
reference and primary samples into one half of a two-half buffer while the
consumer runs the adaptive filter on the other half. A half changes hands
only through explicit handoff events, and the buffer asserts that producer
and consumer never hold the same half.

Two schedulers give identical output: ``"threaded"`` runs the producer in
its own thread, ``"interleaved"`` alternates the two roles on one thread.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import filters
from .audio_io import AudioClip
from .errors import AncError, NumericError
from .metrics import write_csv


class MutualExclusionError(AncError, AssertionError):
    """Producer and consumer addressed the same buffer half."""


def budget(block_size: int, sample_rate: float) -> float:
    """Seconds available to process one block before the next arrives."""
    if block_size <= 0 or sample_rate <= 0:
        raise ValueError("block_size and sample_rate must be positive")
    return block_size / sample_rate


class PingPongBuffer:
    """Two halves, each holding one ``(x, d)`` block pair."""

    PRODUCER = "producer"
    CONSUMER = "consumer"

    def __init__(self, block_size: int):
        self.block_size = block_size
        self.x = np.zeros((2, block_size))
        self.d = np.zeros((2, block_size))
        self.owner = [None, None]
        self.active_half = 0
        self.fill_counts = [0, 0]
        self.violations = 0
        self._lock = threading.Lock()

    def acquire(self, half: int, role: str) -> None:
        with self._lock:
            if self.owner[half] is not None:
                self.violations += 1
                raise MutualExclusionError(
                    f"{role} tried to take half {half} held by {self.owner[half]}"
                )
            other = self.owner[1 - half]
            if other == role:
                self.violations += 1
                raise MutualExclusionError(f"{role} already holds half {1 - half}")
            self.owner[half] = role
            if role == self.PRODUCER:
                self.active_half = half

    def release(self, half: int, role: str) -> None:
        with self._lock:
            if self.owner[half] != role:
                self.violations += 1
                raise MutualExclusionError(f"{role} released half {half} it does not hold")
            self.owner[half] = None

    def fill(self, half: int, x, d) -> None:
        self.x[half] = x
        self.d[half] = d
        self.fill_counts[half] += 1


@dataclass
class DeadlineReport:
    block_budget: float
    per_block_times: np.ndarray
    max_time: float = field(init=False)
    overruns: int = field(init=False)
    headroom: float = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.per_block_times, dtype=np.float64)
        self.per_block_times = t
        self.max_time = float(t.max()) if t.size else 0.0
        self.overruns = int(np.count_nonzero(t > self.block_budget))
        self.headroom = self.block_budget / self.max_time if self.max_time > 0 else float("inf")

    def write_csv(self, path) -> None:
        rows = [[i, f"{t:.9f}", f"{self.block_budget:.9f}", int(t > self.block_budget)]
                for i, t in enumerate(self.per_block_times)]
        write_csv(path, ["block_index", "elapsed_seconds", "budget_seconds", "overrun_flag"], rows)


@dataclass
class StreamResult:
    output: AudioClip
    y: np.ndarray
    deadline: DeadlineReport
    state: filters.FilterState
    padded_samples: int
    fill_counts: list
    violations: int

    @property
    def e(self) -> np.ndarray:
        return self.output.data


def _blocks(scenario, block_size):
    x = scenario.reference.data
    d = scenario.primary.data
    n = x.size
    n_blocks = -(-n // block_size)
    pad = n_blocks * block_size - n
    if pad:
        x = np.concatenate([x, np.zeros(pad)])
        d = np.concatenate([d, np.zeros(pad)])
    return x.reshape(n_blocks, block_size), d.reshape(n_blocks, block_size), pad


class _Consumer:
    def __init__(self, state, buf, n_blocks, last_len):
        self.state = state
        self.last = (n_blocks - 1, last_len)
        self.buf = buf
        B = state.block_size
        self.y = np.empty((n_blocks, B))
        self.e = np.empty((n_blocks, B))
        self.times = np.empty(n_blocks)
        self.run = filters._DISPATCH[state.kind]

    def step(self, k):
        h = k % 2
        self.buf.acquire(h, PingPongBuffer.CONSUMER)
        try:
            # the padded tail of the final block is never shown to the filter
            m = self.last[1] if k == self.last[0] else self.buf.block_size
            t0 = time.perf_counter()
            try:
                r = self.run(self.state, self.buf.x[h][:m], self.buf.d[h][:m], short=True)
            except NumericError as exc:
                raise NumericError(str(exc), block_index=k) from exc
            self.times[k] = time.perf_counter() - t0
            self.y[k, :m] = r.y
            self.e[k, :m] = r.e
            self.y[k, m:] = 0.0
            self.e[k, m:] = 0.0
        finally:
            self.buf.release(h, PingPongBuffer.CONSUMER)


def _produce(buf, X, D, k, pace_until=None):
    h = k % 2
    buf.acquire(h, PingPongBuffer.PRODUCER)
    try:
        buf.fill(h, X[k], D[k])
        if pace_until is not None:
            delay = pace_until - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
    finally:
        buf.release(h, PingPongBuffer.PRODUCER)


def run_stream(scenario, filter_kind: str = "LMS", config: filters.FilterConfig | None = None,
               mode: str = "threaded", paced: bool = False) -> StreamResult:
    """Stream a scenario through a fresh filter block by block.

    The output clip is the error signal ``e`` (the denoised estimate). A
    trailing partial block is zero-padded in the buffer, but only its real
    samples reach the filter; ``padded_samples`` reports the padding.
    """
    config = config or filters.FilterConfig()
    state = filters.filter_init(filter_kind, config)
    B = state.block_size
    rate = scenario.sample_rate
    if len(scenario) < 2 * B:
        raise ValueError(f"scenario needs at least 2 blocks ({2 * B} samples), has {len(scenario)}")
    X, D, pad = _blocks(scenario, B)
    n_blocks = X.shape[0]
    _warm_up(filter_kind, config)
    buf = PingPongBuffer(B)
    consumer = _Consumer(state, buf, n_blocks, B - pad)
    block_budget = budget(B, rate)

    if mode == "interleaved":
        start = time.perf_counter()
        for k in range(n_blocks + 1):
            if k < n_blocks:
                _produce(buf, X, D, k, start + (k + 1) * block_budget if paced else None)
            if k >= 1:
                consumer.step(k - 1)
    elif mode == "threaded":
        _run_threaded(buf, X, D, consumer, n_blocks, block_budget, paced)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    n = len(scenario)
    e = consumer.e.reshape(-1)[:n]
    return StreamResult(
        output=AudioClip.mono(e, rate),
        y=consumer.y.reshape(-1)[:n],
        deadline=DeadlineReport(block_budget, consumer.times),
        state=state,
        padded_samples=pad,
        fill_counts=list(buf.fill_counts),
        violations=buf.violations,
    )


def _warm_up(kind, config):
    # load the compiled kernel outside the timed region
    scratch = filters.filter_init(kind, config)
    z = np.zeros(config.block_size)
    filters._DISPATCH[scratch.kind](scratch, z, z)


def _run_threaded(buf, X, D, consumer, n_blocks, block_budget, paced):
    # empty[h]: half h may be filled; full[h]: half h holds a block to filter
    empty = [threading.Semaphore(1), threading.Semaphore(1)]
    full = [threading.Semaphore(0), threading.Semaphore(0)]
    stop = threading.Event()
    failure = []

    def producer():
        start = time.perf_counter()
        try:
            for k in range(n_blocks):
                h = k % 2
                while not empty[h].acquire(timeout=0.05):
                    if stop.is_set():
                        return
                _produce(buf, X, D, k, start + (k + 1) * block_budget if paced else None)
                full[h].release()
        except BaseException as exc:  # surfaced in the consumer thread
            failure.append(exc)
            stop.set()
            full[0].release()
            full[1].release()

    th = threading.Thread(target=producer, name="pingpong-producer", daemon=True)
    th.start()
    try:
        for k in range(n_blocks):
            h = k % 2
            full[h].acquire()
            if failure:
                raise failure[0]
            consumer.step(k)
            empty[h].release()
    finally:
        stop.set()
        th.join()
    if failure:
        raise failure[0]
