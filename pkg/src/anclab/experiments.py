"""Comparison experiments shared by the CLI and the acceptance tests.

Step sizes: LMS and its Q15 twin use 0.01 (the embedded operating point).
NLMS takes a normalized step, so its default depends on the filter length:
0.1 for the 96-tap canceller, 0.5 for the 16-tap identification problem.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import filters, metaheuristics
from .errors import NoConvergenceError
from .metrics import convergence_point, evaluate_denoise, learning_curve
from .synth import fir_channel, make_rng, synth_system_id

DEFAULT_MU = {"LMS": 0.01, "LMS_Q15": 0.01, "NLMS": 0.1}
STREAMING_ORDER = ("LMS", "NLMS", "RLS", "LMS_Q15")
OPTIMIZER_ORDER = ("PSO", "JAYA", "SA")


def config_for(kind: str, base: filters.FilterConfig | None = None, mu: float | None = None):
    """Copy of ``base`` with the step size appropriate for ``kind``."""
    kind = filters.normalize_kind(kind)
    base = base or filters.FilterConfig()
    if mu is None:
        mu = DEFAULT_MU.get(kind, base.mu)
    return replace(base, mu=mu)


def noise_path_convergence(scenario, kinds=("LMS", "NLMS", "RLS"), configs=None, seed: int = 0,
                           sensor_noise_db: float = -40.0, block: int = 256, window: int = 1,
                           margin_db: float = 3.0):
    """Learning curves for identifying the scenario's reference-to-primary path.

    The speech is removed from the primary channel (``primary - clean``) and
    white sensor noise at ``sensor_noise_db`` is added, which gives every
    filter a well-defined error floor. Returns ``{kind: (curve, index)}``
    with ``index=None`` when a filter never settles.
    """
    x = scenario.reference.data
    noise = scenario.primary.data - scenario.clean.data
    p = np.mean(noise**2)
    v = make_rng(seed).standard_normal(x.size) * math.sqrt(p * 10 ** (sensor_noise_db / 10))
    d = noise + v
    configs = configs or {}
    out = {}
    for kind in kinds:
        kind = filters.normalize_kind(kind)
        cfg = configs.get(kind) or config_for(kind)
        state = filters.filter_init(kind, cfg)
        e = filters.process_signal(state, x, d).e
        curve = learning_curve(e, block, window)
        try:
            idx = convergence_point(curve, margin_db)
        except NoConvergenceError:
            idx = None
        out[kind] = (curve, idx)
    return out


SYSTEM_ID = dict(n=8000, taps=16, noise_db=-40.0, block=32, window=5, margin_db=3.0,
                 mu={"LMS": 0.01, "NLMS": 0.5}, rls_lambda=0.999, rls_delta=100.0)


def system_id_convergence(seed: int, **overrides) -> dict[str, int | None]:
    """Convergence block of LMS, NLMS and RLS on a white-input identification task."""
    p = {**SYSTEM_ID, **overrides}
    x, d, _ = synth_system_id(p["n"], p["taps"], seed, p["noise_db"])
    out = {}
    for kind in ("LMS", "NLMS", "RLS"):
        cfg = filters.FilterConfig(num_taps=p["taps"], block_size=p["block"],
                                   mu=p["mu"].get(kind, 0.01), rls_lambda=p["rls_lambda"],
                                   rls_delta=p["rls_delta"])
        e = filters.process_signal(filters.filter_init(kind, cfg), x, d).e
        curve = learning_curve(e, p["block"], p["window"])
        try:
            out[kind] = convergence_point(curve, p["margin_db"])
        except NoConvergenceError:
            out[kind] = None
    return out


def optimize_fixed_filter(scenario, name: str, num_taps: int = 16, window: int = 48_000,
                          params=None, seed: int = 0):
    """Design a fixed FIR canceller offline and apply it to the whole scenario.

    The optimizer sees the first ``window`` samples only. Returns the run and
    the cleaned signal ``primary - w * reference``.
    """
    fn, param_cls = metaheuristics.OPTIMIZERS[name.upper()]
    x = scenario.reference.data
    d = scenario.primary.data
    n = min(window, x.size)
    obj = metaheuristics.Objective(x[:n], d[:n], num_taps)
    run = fn(obj, params or param_cls(seed=seed))
    return run, d - fir_channel(x, run.best.position)


def denoise_improvement(scenario, kind: str, config=None, warmup: float = 0.25) -> float:
    cfg = config or config_for(kind)
    state = filters.filter_init(kind, cfg)
    e = filters.process_signal(state, scenario.reference.data, scenario.primary.data).e
    return evaluate_denoise(scenario, e, warmup).improvement
