"""Adaptive noise cancellers: LMS, NLMS, RLS and a Q15 fixed-point LMS.

All filters share one calling convention. ``x`` is the reference (noise)
block, ``d`` the primary block; the filter output ``y`` estimates the noise
in ``d`` and the error ``e = d - y`` is the cleaned signal. Weights update
once per sample inside a block, so any block size gives the same weight
trajectory as sample-by-sample processing.

>>> state = filter_init("LMS", FilterConfig(num_taps=96, block_size=256))
>>> state.delay_line.size
351
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from ..config import Config
from ..errors import ConfigError, InstabilityError, NumericError
from . import _kernels

KINDS = ("LMS", "NLMS", "RLS", "LMS_Q15")
_ALIASES = {"lms": "LMS", "nlms": "NLMS", "rls": "RLS", "lms-q15": "LMS_Q15", "lms_q15": "LMS_Q15"}


def normalize_kind(kind: str) -> str:
    k = _ALIASES.get(str(kind).lower(), str(kind).upper())
    if k not in KINDS:
        raise ConfigError(f"unknown filter kind {kind!r}; expected one of {KINDS}")
    return k


@dataclass
class FilterConfig:
    """Adaptive filter parameters.

    Defaults are the embedded operating point: 96 taps, 256-sample blocks,
    step size 0.01. ``nlms_epsilon``, ``rls_lambda`` and ``rls_delta`` are
    conventional choices.
    """

    num_taps: int = 96
    block_size: int = 256
    mu: float = 0.01
    nlms_epsilon: float = 1e-6
    rls_lambda: float = 0.999
    rls_delta: float = 100.0

    def validate(self, kind: str = "LMS") -> None:
        kind = normalize_kind(kind)
        if int(self.num_taps) < 1:
            raise ConfigError("must be >= 1", key="filter.num_taps")
        if int(self.block_size) < 1:
            raise ConfigError("must be >= 1", key="filter.block_size")
        if kind in ("LMS", "NLMS", "LMS_Q15"):
            # mu = 0 is accepted: it freezes the weights (pass-through testing)
            if not (np.isfinite(self.mu) and self.mu >= 0):
                raise ConfigError("must be a finite value >= 0", key="filter.mu")
        if kind == "LMS_Q15" and self.mu >= 1.0:
            raise ConfigError("must be < 1 to be representable in Q15", key="filter.mu")
        if kind == "NLMS" and not self.nlms_epsilon >= 0:
            raise ConfigError("must be >= 0", key="filter.nlms_epsilon")
        if kind == "RLS":
            if not 0 < self.rls_lambda <= 1:
                raise ConfigError("must be in (0, 1]", key="filter.rls_lambda")
            if not self.rls_delta > 0:
                raise ConfigError("must be > 0", key="filter.rls_delta")

    @classmethod
    def from_config(cls, cfg: Config, **overrides) -> "FilterConfig":
        d = cls()
        out = cls(
            num_taps=cfg.get_int("filter.num_taps", d.num_taps),
            block_size=cfg.get_int("filter.block_size", d.block_size),
            mu=cfg.get_float("filter.mu", d.mu),
            nlms_epsilon=cfg.get_float("filter.nlms_epsilon", d.nlms_epsilon),
            rls_lambda=cfg.get_float("filter.rls_lambda", d.rls_lambda),
            rls_delta=cfg.get_float("filter.rls_delta", d.rls_delta),
        )
        for k, v in overrides.items():
            setattr(out, k, v)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FilterState:
    """Mutable adaptive-filter memory; owned by one processing context at a time."""

    kind: str
    config: FilterConfig
    weights: np.ndarray
    delay_line: np.ndarray
    rls_P: np.ndarray | None = None
    # Q15 only: integer mirrors of weights/delay_line and saturation count
    weights_q: np.ndarray | None = None
    delay_line_q: np.ndarray | None = None
    saturations: int = 0
    samples_processed: int = 0
    _scratch: tuple = field(default=(), repr=False)

    @property
    def num_taps(self) -> int:
        return self.weights.size

    @property
    def block_size(self) -> int:
        return self.delay_line.size - self.weights.size + 1


@dataclass
class BlockResult:
    y: np.ndarray
    e: np.ndarray


def filter_init(kind: str, config: FilterConfig | None = None) -> FilterState:
    """Fresh state: zero weights, zero delay line, ``P = delta * I`` for RLS."""
    kind = normalize_kind(kind)
    config = config or FilterConfig()
    config.validate(kind)
    L, B = int(config.num_taps), int(config.block_size)
    state = FilterState(
        kind=kind,
        config=config,
        weights=np.zeros(L),
        delay_line=np.zeros(L + B - 1),
    )
    if kind == "RLS":
        state.rls_P = config.rls_delta * np.eye(L)
        state._scratch = (np.empty(L), np.empty(L))
    elif kind == "LMS_Q15":
        state.weights_q = np.zeros(L, dtype=np.int64)
        state.delay_line_q = np.zeros(L + B - 1, dtype=np.int64)
    return state


def _check_block(state: FilterState, x, d, expected_kind, short=False):
    if expected_kind and state.kind not in expected_kind:
        raise ConfigError(f"state was initialized as {state.kind}, not {expected_kind[0]}")
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    B = state.block_size
    ok = x.shape == d.shape and x.ndim == 1 and (0 < x.size <= B if short else x.size == B)
    if not ok:
        raise ValueError(f"blocks must have length {B}, got x={x.shape}, d={d.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
        raise NumericError("non-finite input sample")
    return x, d


def _load(buf, x, L):
    """Place a block after the ``L - 1`` history samples; returns the active window."""
    m = x.size
    buf[L - 1:L - 1 + m] = x
    return buf[:L - 1 + m]


def _shift(buf, m, L):
    if L > 1:
        buf[:L - 1] = buf[m:m + L - 1].copy()


def lms_process_block(state: FilterState, x, d, *, short=False) -> BlockResult:
    x, d = _check_block(state, x, d, ("LMS",), short)
    L = state.num_taps
    buf = _load(state.delay_line, x, L)
    y, e = np.empty_like(d), np.empty_like(d)
    _kernels.lms_block(buf, state.weights, d, float(state.config.mu), y, e)
    _shift(state.delay_line, d.size, L)
    state.samples_processed += d.size
    return BlockResult(y, e)


def nlms_process_block(state: FilterState, x, d, *, short=False) -> BlockResult:
    """NLMS with the step normalized by the energy of the current tap window."""
    x, d = _check_block(state, x, d, ("NLMS",), short)
    L = state.num_taps
    buf = _load(state.delay_line, x, L)
    y, e = np.empty_like(d), np.empty_like(d)
    cfg = state.config
    _kernels.nlms_block(buf, state.weights, d, float(cfg.mu), float(cfg.nlms_epsilon), y, e)
    _shift(state.delay_line, d.size, L)
    state.samples_processed += d.size
    return BlockResult(y, e)


def rls_process_block(state: FilterState, x, d, *, short=False) -> BlockResult:
    """Exponentially weighted RLS; ``P`` is re-symmetrized after every update.

    Raises
    ------
    InstabilityError
        A diagonal entry of ``P`` became non-positive.
    """
    x, d = _check_block(state, x, d, ("RLS",), short)
    L = state.num_taps
    buf = _load(state.delay_line, x, L)
    y, e = np.empty_like(d), np.empty_like(d)
    u, Pu = state._scratch
    bad = _kernels.rls_block(buf, state.weights, state.rls_P, d,
                             float(state.config.rls_lambda), y, e, u, Pu)
    if bad >= 0:
        raise InstabilityError(
            f"RLS inverse correlation matrix lost positive definiteness at sample "
            f"{state.samples_processed + bad}"
        )
    if not np.all(np.isfinite(state.weights)):
        raise NumericError("RLS weights became non-finite")
    _shift(state.delay_line, d.size, L)
    state.samples_processed += d.size
    return BlockResult(y, e)


def to_q15(values) -> tuple[np.ndarray, int]:
    """Round to Q15 with saturation; returns the words and the clip count."""
    q = np.round(np.asarray(values, dtype=np.float64) * _kernels.Q15_ONE)
    clipped = int(np.count_nonzero((q < -32768) | (q > 32767)))
    return np.clip(q, -32768, 32767).astype(np.int64), clipped


def lms_process_block_q15(state: FilterState, x, d, *, short=False) -> BlockResult:
    """LMS in 16-bit fixed point; saturation is counted in ``state.saturations``."""
    x, d = _check_block(state, x, d, ("LMS_Q15",), short)
    xq, sx = to_q15(x)
    dq, sd = to_q15(d)
    mu_q, _ = to_q15(state.config.mu)
    L = state.num_taps
    buf = _load(state.delay_line_q, xq, L)
    yq = np.empty(d.size, dtype=np.int64)
    eq = np.empty(d.size, dtype=np.int64)
    sat = _kernels.lms_q15_block(buf, state.weights_q, dq, int(mu_q), yq, eq)
    _shift(state.delay_line_q, d.size, L)
    state.saturations += sat + sx + sd
    state.weights = state.weights_q / _kernels.Q15_ONE
    state.delay_line = state.delay_line_q / _kernels.Q15_ONE
    state.samples_processed += d.size
    return BlockResult(yq / _kernels.Q15_ONE, eq / _kernels.Q15_ONE)


_DISPATCH = {
    "LMS": lms_process_block,
    "NLMS": nlms_process_block,
    "RLS": rls_process_block,
    "LMS_Q15": lms_process_block_q15,
}


def process_block(state: FilterState, x, d) -> BlockResult:
    return _DISPATCH[state.kind](state, x, d)


def process_signal(state: FilterState, x, d) -> BlockResult:
    """Run whole signals through ``state`` block by block.

    A trailing partial block is processed at its true length, so the final
    state has seen exactly the input samples and nothing else.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    if x.size != d.size:
        raise ValueError("x and d must have equal length")
    B = state.block_size
    n = x.size
    y = np.empty(n)
    e = np.empty(n)
    run = _DISPATCH[state.kind]
    for start in range(0, n, B):
        sl = slice(start, min(start + B, n))
        r = run(state, x[sl], d[sl], short=True)
        y[sl] = r.y
        e[sl] = r.e
    return BlockResult(y, e)


def nlms_multi(refs, d, num_taps: int, mu: float, eps: float = 1e-6,
               block_size: int = 256) -> BlockResult:
    """NLMS canceller driven by several reference channels at once.

    ``refs`` has shape ``(R, N)``; one ``num_taps`` filter per reference,
    all normalized by the summed window energy.
    """
    refs = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    d = np.asarray(d, dtype=np.float64).ravel()
    R, n = refs.shape
    if n != d.size:
        raise ValueError("references and d must have equal length")
    if not (np.all(np.isfinite(refs)) and np.all(np.isfinite(d))):
        raise NumericError("non-finite input sample")
    L, B = int(num_taps), int(block_size)
    w = np.zeros((R, L))
    bufs = np.zeros((R, L + B - 1))
    y = np.empty(n)
    e = np.empty(n)
    for start in range(0, n, B):
        stop = min(start + B, n)
        m = stop - start
        bufs[:, L - 1:L - 1 + m] = refs[:, start:stop]
        _kernels.nlms_multi_block(bufs[:, :L - 1 + m], w, d[start:stop], mu, eps,
                                  y[start:stop], e[start:stop])
        bufs[:, :L - 1] = bufs[:, m:m + L - 1].copy()
    return BlockResult(y, e)


def write_weights_csv(path, weights) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["tap", "weight"])
        for k, v in enumerate(np.asarray(weights).ravel()):
            wr.writerow([k, f"{v:.17g}"])
