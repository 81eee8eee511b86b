"""Offline filter-weight search with PSO, JAYA and simulated annealing.

Each optimizer minimizes the mean squared cancellation error of a fixed FIR
weight vector over a window of reference/primary samples. They are the slow,
evaluation-hungry counterpart to the streaming filters: useful to design a
filter offline, far too expensive to run per sample.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .synth import make_rng


@dataclass
class Objective:
    """Block MSE of a fixed FIR canceller on one signal window.

    The window is treated as starting from silence: ``x[n - k] = 0`` for
    ``n < k``, and the mean runs over every sample of the window.
    """

    x: np.ndarray
    d: np.ndarray
    num_taps: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).ravel()
        self.d = np.asarray(self.d, dtype=np.float64).ravel()
        if self.x.size != self.d.size:
            raise ValueError("x and d windows must have equal length")
        if self.num_taps < 1 or self.x.size < self.num_taps:
            raise ValueError("window length must be >= num_taps >= 1")
        n, L = self.x.size, int(self.num_taps)
        # column k holds x delayed by k samples
        X = np.zeros((n, L))
        for k in range(L):
            X[k:, k] = self.x[: n - k]
        self._X = X

    def __call__(self, weights) -> float:
        return mse_objective(weights, self)

    def batch(self, positions: np.ndarray) -> np.ndarray:
        """MSE for each row of ``positions``."""
        r = self.d[:, None] - self._X @ positions.T
        return np.mean(r * r, axis=0)


def mse_objective(weights, obj: Objective) -> float:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size != obj.num_taps:
        raise ValueError(f"expected {obj.num_taps} weights, got {w.size}")
    r = obj.d - obj._X @ w
    return float(np.mean(r * r))


@dataclass
class Candidate:
    position: np.ndarray
    fitness: float
    velocity: np.ndarray | None = None


@dataclass
class PsoParams:
    swarm_size: int = 30
    iterations: int = 200
    w: float = 0.7
    c1: float = 0.9
    c2: float = 0.9
    bounds: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError("swarm_size must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (0 <= self.c1 <= 1 and 0 <= self.c2 <= 1):
            raise ValueError("c1 and c2 must lie in [0, 1]")
        if not self.bounds > 0:
            raise ValueError("bounds must be > 0")


@dataclass
class JayaParams:
    population: int = 20
    iterations: int = 300
    bounds: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.bounds > 0:
            raise ValueError("bounds must be > 0")


@dataclass
class SaParams:
    """Annealing schedule. ``t0=None`` starts at the initial MSE and
    ``min_temp=None`` stops at ``t0 * 1e-4``."""

    t0: float | None = None
    alpha: float = 0.95
    steps_per_temp: int = 50
    min_temp: float | None = None
    perturb_scale: float = 0.05
    bounds: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.steps_per_temp < 1:
            raise ValueError("steps_per_temp must be >= 1")
        if self.t0 is not None and not self.t0 > 0:
            raise ValueError("t0 must be > 0")
        if self.min_temp is not None and not self.min_temp > 0:
            raise ValueError("min_temp must be > 0")
        if self.t0 is not None and self.min_temp is not None and not self.t0 > self.min_temp:
            raise ValueError("t0 must exceed min_temp")
        if self.perturb_scale < 0:
            raise ValueError("perturb_scale must be >= 0")
        if not self.bounds > 0:
            raise ValueError("bounds must be > 0")


@dataclass
class OptimizerRun:
    """Outcome of one optimizer execution.

    ``history[i]`` is the best fitness after iteration ``i`` (entry 0 is the
    initial population / starting point); ``eval_history`` and
    ``time_history`` are the cumulative evaluations and seconds at the same
    points.
    """

    name: str
    best: Candidate
    history: np.ndarray
    evaluations: int
    wall_time: float
    eval_history: np.ndarray = field(repr=False, default=None)
    time_history: np.ndarray = field(repr=False, default=None)
    params: dict = field(default_factory=dict)

    def same_result(self, other: "OptimizerRun") -> bool:
        """Equality on every wall-clock independent field."""
        return (
            self.name == other.name
            and np.array_equal(self.best.position, other.best.position)
            and self.best.fitness == other.best.fitness
            and np.array_equal(self.history, other.history)
            and np.array_equal(self.eval_history, other.eval_history)
            and self.evaluations == other.evaluations
        )

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["iteration", "best_mse", "evaluations", "elapsed_seconds"])
            for i, (f, ev, t) in enumerate(zip(self.history, self.eval_history, self.time_history)):
                wr.writerow([i, f"{f:.17g}", int(ev), f"{t:.9f}"])


class _Recorder:
    def __init__(self):
        self.t0 = time.perf_counter()
        self.best, self.evals, self.times = [], [], []

    def log(self, best, evals):
        self.best.append(best)
        self.evals.append(evals)
        self.times.append(time.perf_counter() - self.t0)

    def finish(self, name, cand, evals, params):
        return OptimizerRun(
            name=name,
            best=cand,
            history=np.array(self.best),
            evaluations=evals,
            wall_time=time.perf_counter() - self.t0,
            eval_history=np.array(self.evals, dtype=np.int64),
            time_history=np.array(self.times),
            params=params,
        )


def _initial(rng, count, dim, bounds, initial):
    if initial is None:
        return rng.uniform(-bounds, bounds, (count, dim))
    pos = np.array(initial, dtype=np.float64).reshape(-1, dim)
    if pos.shape[0] != count:
        raise ValueError(f"initial must provide {count} positions")
    return pos


def pso_optimize(obj: Objective, params: PsoParams | None = None, initial=None) -> OptimizerRun:
    """Particle swarm search over the box ``[-bounds, bounds]^num_taps``.

    Velocities start at zero and are clamped to ``bounds / 2`` per
    coordinate; fresh ``r1, r2 ~ U[0, 1]`` are drawn per coordinate per step.
    """
    p = params or PsoParams()
    rng = make_rng(p.seed)
    dim = obj.num_taps
    rec = _Recorder()

    x = _initial(rng, p.swarm_size, dim, p.bounds, initial)
    v = np.zeros_like(x)
    fit = obj.batch(x)
    evals = p.swarm_size
    pbest, pbest_fit = x.copy(), fit.copy()
    g = int(np.argmin(pbest_fit))
    gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
    rec.log(gbest_fit, evals)

    vmax = p.bounds / 2
    for _ in range(p.iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = p.w * v + p.c1 * r1 * (pbest - x) + p.c2 * r2 * (gbest - x)
        np.clip(v, -vmax, vmax, out=v)
        x = np.clip(x + v, -p.bounds, p.bounds)
        fit = obj.batch(x)
        evals += p.swarm_size
        better = fit < pbest_fit
        pbest[better] = x[better]
        pbest_fit[better] = fit[better]
        g = int(np.argmin(pbest_fit))
        if pbest_fit[g] < gbest_fit:
            gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
        rec.log(gbest_fit, evals)

    best = Candidate(gbest, gbest_fit, velocity=v[int(np.argmin(fit))].copy())
    return rec.finish("PSO", best, evals, asdict(p))


def jaya_optimize(obj: Objective, params: JayaParams | None = None, initial=None) -> OptimizerRun:
    """JAYA with the candidate's own coordinate taken in absolute value.

    Proposal: ``x' = x + r1 * (best - |x|) - r2 * (worst - |x|)``, kept only
    if it strictly lowers the candidate's fitness.
    """
    p = params or JayaParams()
    rng = make_rng(p.seed)
    dim = obj.num_taps
    rec = _Recorder()

    pop = _initial(rng, p.population, dim, p.bounds, initial)
    fit = obj.batch(pop)
    evals = p.population
    rec.log(float(fit.min()), evals)

    for _ in range(p.iterations):
        best = pop[int(np.argmin(fit))].copy()
        worst = pop[int(np.argmax(fit))].copy()
        r1 = rng.random(pop.shape)
        r2 = rng.random(pop.shape)
        a = np.abs(pop)
        prop = np.clip(pop + r1 * (best - a) - r2 * (worst - a), -p.bounds, p.bounds)
        pfit = obj.batch(prop)
        evals += p.population
        better = pfit < fit
        pop[better] = prop[better]
        fit[better] = pfit[better]
        rec.log(float(fit.min()), evals)

    i = int(np.argmin(fit))
    return rec.finish("JAYA", Candidate(pop[i].copy(), float(fit[i])), evals, asdict(p))


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis rule: downhill always, uphill with ``exp(-delta / T)``."""
    if delta <= 0:
        return 1.0
    return math.exp(-delta / temperature)


def sa_optimize(obj: Objective, params: SaParams | None = None, initial=None) -> OptimizerRun:
    """Simulated annealing with single-coordinate Gaussian moves.

    The temperature is multiplied by ``alpha`` after every
    ``steps_per_temp`` moves until it falls to ``min_temp``.
    """
    p = params or SaParams()
    rng = make_rng(p.seed)
    dim = obj.num_taps
    rec = _Recorder()

    cur = _initial(rng, 1, dim, p.bounds, initial)[0]
    cur_fit = obj(cur)
    evals = 1
    best, best_fit = cur.copy(), cur_fit
    rec.log(best_fit, evals)

    t = p.t0 if p.t0 is not None else cur_fit
    if not t > 0:
        # already exact; nothing to anneal
        return rec.finish("SA", Candidate(best, best_fit), evals, asdict(p))
    t_min = p.min_temp if p.min_temp is not None else t * 1e-4
    while t > t_min:
        for _ in range(p.steps_per_temp):
            j = int(rng.integers(dim))
            step = rng.normal(0.0, p.perturb_scale)
            cand = cur.copy()
            cand[j] = min(max(cand[j] + step, -p.bounds), p.bounds)
            cand_fit = obj(cand)
            evals += 1
            delta = cand_fit - cur_fit
            if delta <= 0 or rng.random() < math.exp(-delta / t):
                cur, cur_fit = cand, cand_fit
                if cur_fit < best_fit:
                    best, best_fit = cur.copy(), cur_fit
        rec.log(best_fit, evals)
        t *= p.alpha

    return rec.finish("SA", Candidate(best, best_fit), evals, asdict(p))


def sa_expected_evaluations(params: SaParams, initial_fitness: float) -> int:
    """Analytic evaluation budget: one per move plus the starting point."""
    t = params.t0 if params.t0 is not None else initial_fitness
    t_min = params.min_temp if params.min_temp is not None else t * 1e-4
    levels = 0
    while t > t_min:
        levels += 1
        t *= params.alpha
    return levels * params.steps_per_temp + 1


OPTIMIZERS = {
    "PSO": (pso_optimize, PsoParams),
    "JAYA": (jaya_optimize, JayaParams),
    "SA": (sa_optimize, SaParams),
}
