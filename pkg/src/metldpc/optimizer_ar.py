"""Adaptive-range local search over degree-distribution coefficients.

The optimizer walks the free coefficients of a fixed Tanner-graph
structure (see :class:`~metldpc.structure.CoefficientLayout`), scoring
each candidate by the decoding threshold of the ensemble completed with
the concentrated check construction.  Candidates whose implied
coefficients turn negative or whose check design is infeasible score
minus infinity and never reach density evolution.

One run:

  1. seed a population with queen's-move steps from a random start,
  2. evaluate, keep the best and next-best candidates,
  3. redraw the population uniformly within +-search_range of the best
     (the best itself survives verbatim),
  4. when a generation improves the best threshold by less than ``delta``,
     rescale search_range to range_mult * max|best - next best| (clamped
     to [1e-6, 0.5] so it can neither collapse nor blow past the box),
  5. stop after ``stall_generations`` consecutive generations without a
     ``delta``-sized improvement.

Identical inputs and seed give identical traces; thresholds are cached on
a 1e-9 quantization of the candidate so repeated vectors (the retained
best in particular) are never recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .check_design import InfeasibleStructureError, design_checks
from .density_evolution import DEFAULT_PARAMS, DEParams, ThresholdResult, threshold
from .ensemble import ChannelAssignment, Ensemble, VariableClass, validate
from .structure import CoefficientLayout, StructureTemplate

__all__ = [
    "ARConfig",
    "ARTraceRow",
    "ARResult",
    "CandidateEvaluator",
    "queens_init",
    "ar_optimize",
    "trace_csv",
]

SR_FLOOR = 1e-6
SR_CEIL = 0.5
CACHE_QUANTUM = 1e-9


def _as_floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ARConfig:
    """Adaptive-range controls; defaults follow the benchmark protocol."""

    n_pop: int = 100
    range_mult: float = 1.25
    search_range0: float = 0.1
    delta: float = 1e-5
    stall_generations: int = 3
    seed: int = 0
    max_generations: int = 0  # 0 = run until the stall rule fires
    bisect_tol: float | None = None  # override DE bisection tolerance

    def __post_init__(self) -> None:
        if self.n_pop < 2:
            raise ValueError("population size must be at least 2")
        if self.range_mult <= 0 or self.search_range0 <= 0 or self.delta <= 0:
            raise ValueError("range_mult, search_range0 and delta must be positive")
        if self.stall_generations < 1:
            raise ValueError("stall_generations must be at least 1")


@dataclass(frozen=True)
class ARTraceRow:
    generation: int
    best_threshold: float
    search_range: float
    best_vector: tuple[float, ...]


@dataclass(frozen=True)
class ARResult:
    best_vector: tuple[float, ...]
    best_coeffs: tuple[float, ...]
    best_threshold: ThresholdResult
    trace: tuple[ARTraceRow, ...]
    evaluations: int


def trace_csv(trace: Sequence[ARTraceRow]) -> str:
    width = max((len(r.best_vector) for r in trace), default=0)
    header = ["generation", "best_threshold", "search_range"]
    header += [f"q{j + 1}" for j in range(width)]
    lines = [",".join(header)]
    for r in trace:
        cells = [str(r.generation), repr(r.best_threshold), repr(r.search_range)]
        cells += [repr(v) for v in r.best_vector]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def queens_init(
    n_dims: int,
    n_points: int,
    bounds: tuple[Sequence[float], Sequence[float]],
    rng: np.random.Generator | int,
    feasible: Callable[[np.ndarray], bool] | None = None,
    max_tries: int = 500,
) -> list[np.ndarray]:
    """Queen's-move population seeding.

    The first point is uniform in the box; each following point moves from
    its predecessor either along one coordinate or along a random diagonal,
    by a uniformly drawn length, reflected at the box walls.  Points failing
    the optional feasibility predicate are redrawn.
    """
    if n_dims < 1:
        raise ValueError("need at least one dimension")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != (n_dims,) or hi.shape != (n_dims,) or np.any(hi < lo):
        raise ValueError("bad bounds")
    span = hi - lo

    def reflect(v: np.ndarray) -> np.ndarray:
        out = v.copy()
        for j in range(n_dims):
            if span[j] == 0.0:
                out[j] = lo[j]
                continue
            r = (out[j] - lo[j]) % (2.0 * span[j])
            out[j] = lo[j] + (span[j] - abs(r - span[j]))
        return out

    for _ in range(max_tries):
        seed_pt = rng.uniform(lo, hi)
        if feasible is None or feasible(seed_pt):
            break
    else:
        raise InfeasibleStructureError("empty feasible set within the coefficient box")

    points = [seed_pt]
    while len(points) < n_points:
        prev = points[-1]
        for _ in range(max_tries):
            if rng.integers(2) == 0:
                j = int(rng.integers(n_dims))
                step = np.zeros(n_dims)
                step[j] = rng.uniform(-span[j], span[j])
            else:
                length = rng.uniform(0.0, 1.0)
                signs = rng.integers(0, 2, n_dims) * 2 - 1
                step = signs * length * span
            cand = reflect(prev + step)
            if feasible is None or feasible(cand):
                points.append(cand)
                break
        else:
            raise InfeasibleStructureError("could not reach a feasible point by queen's moves")
    return points


class CandidateEvaluator:
    """Threshold objective for free-coefficient vectors, with caching.

    Scores a candidate by completing the ensemble (coefficients -> check
    design -> validation) and bisecting its threshold; structural failures
    score -inf and remember the reason for error reporting.
    """

    def __init__(
        self,
        lambda_struct: Sequence[tuple[int, ChannelAssignment, tuple[int, ...]]],
        template: StructureTemplate,
        rate: float,
        channel: str,
        de_params: DEParams = DEFAULT_PARAMS,
    ):
        self.lambda_struct = tuple(lambda_struct)
        self.template = template
        self.rate = rate
        self.channel = channel
        self.de_params = de_params
        self.layout = CoefficientLayout.build(self.lambda_struct, template)
        self._cache: dict[tuple[int, ...], tuple[float, ThresholdResult | None, str | None]] = {}
        self.evaluations = 0

    def feasible_box(self, q: np.ndarray) -> bool:
        return self.layout.rebuild(q) is not None

    def ensemble_for(self, q: Sequence[float]) -> Ensemble:
        coeffs = self.layout.rebuild(q)
        if coeffs is None:
            raise InfeasibleStructureError("negative implied coefficient")
        var_classes = tuple(
            VariableClass(b, d, c)
            for (_, b, d), c in zip(self.lambda_struct, coeffs)
        )
        chk = design_checks(var_classes, self.rate, self.template.check_groups, self.template.m_e)
        if len(chk) > self.template.c_max:
            raise InfeasibleStructureError(
                f"{len(chk)} check classes exceed c_max={self.template.c_max}"
            )
        ens = Ensemble(self.template.m_e, var_classes, chk, self.rate)
        report = validate(ens, 1e-6)
        if not report.ok:
            raise InfeasibleStructureError(f"constraint violation: {report}")
        return ens

    def score(self, q: Sequence[float]) -> tuple[float, ThresholdResult | None, str | None]:
        key = tuple(int(round(v / CACHE_QUANTUM)) for v in q)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        try:
            ens = self.ensemble_for(q)
        except InfeasibleStructureError as exc:
            out = (float("-inf"), None, str(exc))
            self._cache[key] = out
            return out
        result = threshold(ens, self.channel, self.de_params)
        self.evaluations += 1
        out = (result.threshold, result, None)
        self._cache[key] = out
        return out


def ar_optimize(
    lambda_struct: Sequence[tuple[int, ChannelAssignment, tuple[int, ...]]],
    template: StructureTemplate,
    rate: float,
    channel: str,
    cfg: ARConfig,
    de_params: DEParams = DEFAULT_PARAMS,
) -> ARResult:
    """Optimize the free coefficients of a fixed structure; deterministic per seed."""
    if cfg.bisect_tol is not None:
        de_params = replace(
            de_params, bisect_tol_bec=cfg.bisect_tol, bisect_tol_awgn=cfg.bisect_tol
        )
    ev = CandidateEvaluator(lambda_struct, template, rate, channel, de_params)
    layout = ev.layout

    if layout.n_free == 0:
        score, result, reason = ev.score(())
        if result is None:
            raise InfeasibleStructureError(reason or "structure infeasible")
        row = ARTraceRow(0, score, 0.0, ())
        return ARResult((), layout.rebuild(()), result, (row,), ev.evaluations)

    rng = np.random.default_rng(cfg.seed)
    population = queens_init(
        layout.n_free, cfg.n_pop, layout.bounds(), rng, feasible=ev.feasible_box
    )

    def evaluate(pop: list[np.ndarray]) -> tuple[int, int, float]:
        scores = [ev.score(q)[0] for q in pop]
        best_i = max(range(len(pop)), key=lambda i: (scores[i], -i))
        rest = [i for i in range(len(pop)) if i != best_i]
        next_i = max(rest, key=lambda i: (scores[i], -i)) if rest else best_i
        return best_i, next_i, scores[best_i]

    best_i, next_i, best_score = evaluate(population)
    if best_score == float("-inf"):
        reasons = (ev.score(q)[2] for q in population)
        first = next((r for r in reasons if r), "structure infeasible")
        raise InfeasibleStructureError(f"every initial candidate is infeasible: {first}")
    best_q = population[best_i].copy()
    next_q = population[next_i].copy()

    search_range = cfg.search_range0
    trace = [ARTraceRow(0, best_score, search_range, _as_floats(best_q))]
    lo, hi = (np.asarray(b, dtype=float) for b in layout.bounds())
    stall = 0
    generation = 0

    while True:
        if cfg.max_generations and generation >= cfg.max_generations:
            break
        population = [best_q.copy()]
        for _ in range(cfg.n_pop - 1):
            draw_lo = np.maximum(lo, best_q - search_range)
            draw_hi = np.minimum(hi, best_q + search_range)
            population.append(rng.uniform(draw_lo, draw_hi))
        generation += 1

        best_i, next_i, gen_best = evaluate(population)
        improvement = gen_best - best_score
        best_score = gen_best
        best_q = population[best_i].copy()
        next_q = population[next_i].copy()
        trace.append(ARTraceRow(generation, best_score, search_range, _as_floats(best_q)))

        if improvement < cfg.delta:
            stall += 1
            if stall >= cfg.stall_generations:
                break
            gap = float(np.max(np.abs(best_q - next_q)))
            search_range = min(max(cfg.range_mult * gap, SR_FLOOR), SR_CEIL)
        else:
            stall = 0

    score, result, _ = ev.score(best_q)
    coeffs = layout.rebuild(best_q)
    return ARResult(_as_floats(best_q), coeffs, result, tuple(trace), ev.evaluations)
