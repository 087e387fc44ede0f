"""Differential evolution over Tanner-graph structures.

The outer search runs classic rand/1/bin differential evolution on the
integer degree genes a template leaves open; every gene is scored by a
full inner adaptive-range run on its coefficients, so the objective is
"the best threshold this structure reaches".  Genes that decode to an
invalid structure (domain violations, over-degree classes, no transmitted
class, infeasible check design) score minus infinity.

Determinism: the inner run's seed is derived from the outer seed and the
gene content, so a gene's objective is the same whenever and wherever it
is evaluated; objectives are cached per gene.  Equal thresholds break
toward the lower maximum variable-node degree, then toward the earlier
population slot.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .check_design import InfeasibleStructureError, design_checks
from .density_evolution import DEFAULT_PARAMS, DEParams, ThresholdResult, threshold
from .ensemble import Ensemble, VariableClass
from .optimizer_ar import ARConfig, ARResult, ar_optimize
from .structure import StructureTemplate, decode_structure, enumerate_genes

__all__ = [
    "DifEConfig",
    "DifETraceRow",
    "DifEResult",
    "derive_seed",
    "decode_gene",
    "struct_objective",
    "dife_optimize",
    "dife_trace_csv",
    "exhaustive_best",
]

NEG_INF = float("-inf")


@dataclass(frozen=True)
class DifEConfig:
    population: int = 10
    f: float = 0.5
    cr: float = 0.8
    max_generations: int = 30
    stall_generations: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("differential evolution needs a population of at least 4")
        if self.f <= 0:
            raise ValueError("scale factor must be positive")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError("crossover rate must lie in [0, 1]")


@dataclass(frozen=True)
class DifETraceRow:
    generation: int
    best_threshold: float
    best_gene: tuple[int, ...]


@dataclass(frozen=True)
class DifEResult:
    best_gene: tuple[int, ...]
    best_lambda: tuple
    best_coeffs: tuple[float, ...]
    best_threshold: ThresholdResult
    trace: tuple[DifETraceRow, ...]
    evaluations: int


def dife_trace_csv(trace: Sequence[DifETraceRow]) -> str:
    lines = ["generation,best_threshold,best_gene"]
    for r in trace:
        gene = ";".join(str(v) for v in r.best_gene)
        lines.append(f"{r.generation},{r.best_threshold!r},{gene}")
    return "\n".join(lines) + "\n"


def derive_seed(master: int, *parts: int) -> int:
    """Stable 63-bit seed from a master seed and integer context."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master).to_bytes(8, "little", signed=True))
    for p in parts:
        h.update(int(p).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little") >> 1


def decode_gene(gene: Sequence[int], template: StructureTemplate):
    """Gene vector -> variable-side structure, or None when infeasible."""
    return decode_structure(template, gene)


def _max_var_degree(decoded) -> int:
    return max(sum(d) for _, _, d in decoded)


def struct_objective(
    gene: Sequence[int],
    template: StructureTemplate,
    rate: float,
    channel: str,
    ar_cfg: ARConfig,
    de_params: DEParams = DEFAULT_PARAMS,
    restarts: int = 1,
) -> tuple[float, ARResult | None]:
    """Inner-optimized threshold of a structure gene; -inf when infeasible.

    The coefficient surface can hide its best basin from a single
    adaptive-range run, so ``restarts`` independent seeded runs may be taken
    and the best kept; seeds derive from the master seed and gene content,
    so the objective is a pure function of (gene, config).
    """
    decoded = decode_gene(gene, template)
    if decoded is None:
        return NEG_INF, None
    best: ARResult | None = None
    for r in range(max(restarts, 1)):
        salt = (r,) if r else ()
        inner_cfg = replace(ar_cfg, seed=derive_seed(ar_cfg.seed, *salt, *gene))
        try:
            result = ar_optimize(decoded, template, rate, channel, inner_cfg, de_params)
        except InfeasibleStructureError:
            continue
        if best is None or result.best_threshold.threshold > best.best_threshold.threshold:
            best = result
    if best is None:
        return NEG_INF, None
    return best.best_threshold.threshold, best


def exhaustive_best(
    template: StructureTemplate,
    rate: float,
    channel: str,
    ar_cfg: ARConfig,
    de_params: DEParams = DEFAULT_PARAMS,
    limit: int = 64,
) -> tuple[tuple[int, ...], float]:
    """Enumerate every gene (small spaces only) and return the best one.

    Uses the same derived seeds and tie-breaks as :func:`dife_optimize`,
    which makes it an oracle for the evolutionary search.
    """
    best: tuple[float, int, tuple[int, ...]] | None = None
    n = 0
    for gene in enumerate_genes(template):
        n += 1
        if n > limit:
            raise ValueError(f"gene space exceeds the enumeration limit of {limit}")
        score, result = struct_objective(gene, template, rate, channel, ar_cfg, de_params)
        decoded = decode_gene(gene, template)
        max_deg = _max_var_degree(decoded) if decoded else 10**9
        key = (score, -max_deg, gene)
        if best is None or (key[0], key[1]) > (best[0], best[1]):
            best = (score, -max_deg, gene)
    if best is None:
        raise ValueError("template has no genes to enumerate")
    return best[2], best[0]


def dife_optimize(
    template: StructureTemplate,
    rate: float,
    channel: str,
    cfg: DifEConfig,
    ar_cfg: ARConfig,
    de_params: DEParams = DEFAULT_PARAMS,
    polish_cfg: ARConfig | None = None,
    polish_top_k: int = 3,
    polish_restarts: int = 2,
    inner_restarts: int = 1,
) -> DifEResult:
    """rand/1/bin differential evolution on the template's free degrees.

    Inner runs are deliberately budget-capped, and the coefficient surface
    of a single structure can hold far-apart local maxima, so the inner
    objective is a noisy lower bound on a structure's real quality.  When
    ``polish_cfg`` is given, the ``polish_top_k`` best distinct structures
    are re-optimized with ``polish_restarts`` independent restarts each and
    the overall winner is returned; everything stays seed-deterministic.
    """
    positions = template.free_degree_positions()
    if not positions:
        raise ValueError("template has no free degrees to search")
    domains = [template.class_slots[s].domains[t] for s, t in positions]
    n_genes = len(positions)
    rng = np.random.default_rng(cfg.seed)

    cache: dict[tuple[int, ...], tuple[float, ARResult | None]] = {}
    evaluations = 0

    def score(gene: tuple[int, ...]) -> tuple[float, ARResult | None]:
        nonlocal evaluations
        hit = cache.get(gene)
        if hit is None:
            hit = struct_objective(
                gene, template, rate, channel, ar_cfg, de_params, inner_restarts
            )
            cache[gene] = hit
            evaluations += 1
        return hit

    def tiebreak(gene: tuple[int, ...]) -> int:
        decoded = decode_gene(gene, template)
        return -_max_var_degree(decoded) if decoded else -(10**9)

    def clip(values: np.ndarray) -> tuple[int, ...]:
        out = []
        for v, (lo, hi) in zip(values, domains):
            iv = int(round(v))
            out.append(min(max(iv, lo), hi))
        return tuple(out)

    def draw_member() -> tuple[int, ...]:
        # degree budgets make most uniform draws structurally dead, so
        # resample until the gene at least decodes
        gene = None
        for _ in range(200):
            gene = tuple(int(rng.integers(lo, hi + 1)) for lo, hi in domains)
            if decode_gene(gene, template) is not None:
                return gene
        return gene

    population = [draw_member() for _ in range(cfg.population)]
    scores = [score(g)[0] for g in population]

    def current_best() -> int:
        return max(
            range(cfg.population),
            key=lambda i: (scores[i], tiebreak(population[i]), -i),
        )

    best_i = current_best()
    best_gene, best_score = population[best_i], scores[best_i]
    trace = [DifETraceRow(0, best_score, best_gene)]
    stall = 0

    for generation in range(1, cfg.max_generations + 1):
        for i in range(cfg.population):
            choices = [j for j in range(cfg.population) if j != i]
            a, b, c = rng.choice(len(choices), size=3, replace=False)
            qa = np.array(population[choices[a]], dtype=float)
            qb = np.array(population[choices[b]], dtype=float)
            qc = np.array(population[choices[c]], dtype=float)
            mutant = clip(qa + cfg.f * (qb - qc))
            forced = int(rng.integers(n_genes))
            trial = tuple(
                mutant[j] if (rng.random() < cfg.cr or j == forced) else population[i][j]
                for j in range(n_genes)
            )
            trial_score = score(trial)[0]
            if trial_score > scores[i] or (
                trial_score == scores[i] and tiebreak(trial) > tiebreak(population[i])
            ):
                population[i] = trial
                scores[i] = trial_score

        best_i = current_best()
        improved = scores[best_i] > best_score
        if improved or (
            scores[best_i] == best_score and tiebreak(population[best_i]) > tiebreak(best_gene)
        ):
            best_gene = population[best_i]
        if improved:
            best_score = scores[best_i]
            stall = 0
        elif best_score > NEG_INF:
            # stalling only means something once a feasible incumbent exists
            stall += 1
        trace.append(DifETraceRow(generation, best_score, best_gene))
        if stall >= cfg.stall_generations:
            break

    final_score, ar_result = score(best_gene)
    if ar_result is None:
        raise InfeasibleStructureError(
            "no feasible structure found within the generation budget"
        )
    best_coeffs = ar_result.best_coeffs

    if polish_cfg is not None and polish_top_k > 0 and polish_restarts > 0:
        feasible = [g for g, (s, r) in cache.items() if r is not None]
        feasible.sort(key=lambda g: (-cache[g][0], -tiebreak(g), g))
        shortlist = feasible[:polish_top_k]
        if best_gene not in shortlist:
            shortlist = [best_gene] + shortlist[: max(polish_top_k - 1, 0)]
        for gene in shortlist:
            decoded_g = decode_gene(gene, template)
            for restart in range(polish_restarts):
                seeded = replace(
                    polish_cfg, seed=derive_seed(polish_cfg.seed, restart + 1, *gene)
                )
                try:
                    polished = ar_optimize(decoded_g, template, rate, channel, seeded, de_params)
                except InfeasibleStructureError:
                    continue
                value = polished.best_threshold.threshold
                if value > final_score or (
                    value == final_score and tiebreak(gene) > tiebreak(best_gene)
                ):
                    final_score = value
                    best_gene = gene
                    best_coeffs = polished.best_coeffs

    decoded = decode_gene(best_gene, template)
    var_classes = tuple(
        VariableClass(b, d, c) for (_, b, d), c in zip(decoded, best_coeffs)
    )
    chk = design_checks(var_classes, rate, template.check_groups, template.m_e)
    ens = Ensemble(template.m_e, var_classes, chk, rate)
    final = threshold(ens, channel, de_params)
    return DifEResult(best_gene, decoded, best_coeffs, final, tuple(trace), evaluations)
