"""Constrained two-objective NSGA-II over integer green-time genomes.

The genome is one green duration per link, in seconds, clamped to the
config's [min_green_s, max_green_s]. Variation operators repair bounds, so
every individual is feasible. A run is fully deterministic given its seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from . import objectives
from .core import IntersectionConfig, ObjectiveVector, QueueState, SignalPlan

Genome = tuple[int, ...]

INF = float("inf")


@dataclass
class Individual:
    genome: Genome
    objectives: ObjectiveVector
    rank: int = -1
    crowding: float = 0.0
    feasible: bool = True

    def to_dict(self) -> dict:
        return {
            "genome": list(self.genome),
            "f1": self.objectives.f1,
            "f2": self.objectives.f2,
        }


@dataclass(frozen=True)
class OptimizerParams:
    population_size: int = 60
    generations: int = 100
    crossover_prob: float = 0.9
    mutation_prob: Optional[float] = None  # None -> 1/L
    tournament_size: int = 2
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population_size must be an even integer >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not (0.0 <= self.crossover_prob <= 1.0):
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob is not None and not (0.0 <= self.mutation_prob <= 1.0):
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerParams":
        return cls(
            population_size=int(d.get("population_size", 60)),
            generations=int(d.get("generations", 100)),
            crossover_prob=float(d.get("crossover_prob", 0.9)),
            mutation_prob=d.get("mutation_prob"),
            tournament_size=int(d.get("tournament_size", 2)),
            rng_seed=int(d.get("rng_seed", 0)),
        )


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """True iff a is no worse in both objectives and strictly better in one."""
    return a.f1 <= b.f1 and a.f2 <= b.f2 and (a.f1 < b.f1 or a.f2 < b.f2)


def fast_non_dominated_sort(pop: Sequence[Individual]) -> list[list[int]]:
    """Partition the population into Pareto fronts; updates rank in place."""
    n = len(pop)
    objs = [(ind.objectives.f1, ind.objectives.f2) for ind in pop]
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        a1, a2 = objs[p]
        for q in range(n):
            if p == q:
                continue
            b1, b2 = objs[q]
            if a1 <= b1 and a2 <= b2 and (a1 < b1 or a2 < b2):
                dominated_by[p].append(q)
            elif b1 <= a1 and b2 <= a2 and (b1 < a1 or b2 < a2):
                domination_count[p] += 1
        if domination_count[p] == 0:
            pop[p].rank = 0
            fronts[0].append(p)
    k = 0
    while fronts[k]:
        nxt: list[int] = []
        for p in fronts[k]:
            for q in dominated_by[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    pop[q].rank = k + 1
                    nxt.append(q)
        fronts.append(nxt)
        k += 1
    fronts.pop()
    return fronts


def crowding_distance(front: Sequence[Individual]) -> list[float]:
    """Crowding distances for one non-dominated front; extremes get +inf."""
    n = len(front)
    if n <= 2:
        dists = [INF] * n
    else:
        dists = [0.0] * n
        for key in (lambda ind: ind.objectives.f1, lambda ind: ind.objectives.f2):
            order = sorted(range(n), key=lambda i: key(front[i]))
            lo, hi = key(front[order[0]]), key(front[order[-1]])
            dists[order[0]] = INF
            dists[order[-1]] = INF
            span = hi - lo
            if span == 0:
                continue
            for j in range(1, n - 1):
                if dists[order[j]] == INF:
                    continue
                gap = key(front[order[j + 1]]) - key(front[order[j - 1]])
                dists[order[j]] += gap / span
    for ind, d in zip(front, dists):
        ind.crowding = d
    return dists


def _better(pop: Sequence[Individual], i: int, j: int) -> int:
    """Crowded-comparison: lower rank, then larger crowding, then lower index."""
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return i if a.rank < b.rank else j
    if a.crowding != b.crowding:
        return i if a.crowding > b.crowding else j
    return min(i, j)


def tournament_select(
    pop: Sequence[Individual], k: int, rng: random.Random
) -> Individual:
    candidates = rng.sample(range(len(pop)), min(k, len(pop)))
    best = candidates[0]
    for other in candidates[1:]:
        best = _better(pop, best, other)
    return pop[best]


def crossover(
    a: Genome, b: Genome, rng: random.Random, crossover_prob: float = 0.9
) -> tuple[Genome, Genome]:
    """Uniform per-gene exchange; applied to the pair with crossover_prob."""
    if len(a) != len(b):
        raise ValueError("genomes must have equal length")
    if rng.random() >= crossover_prob:
        return a, b
    c1, c2 = list(a), list(b)
    for i in range(len(a)):
        if rng.random() < 0.5:
            c1[i], c2[i] = c2[i], c1[i]
    return tuple(c1), tuple(c2)


def mutate(
    g: Genome,
    rng: random.Random,
    cfg: IntersectionConfig,
    mutation_prob: float,
) -> Genome:
    """Per-gene uniform re-draw within the green bounds."""
    out = list(g)
    for i in range(len(out)):
        if rng.random() < mutation_prob:
            out[i] = rng.randint(cfg.min_green_s, cfg.max_green_s)
    return tuple(out)


def plan_from_genome(
    genome: Sequence[int], cfg: IntersectionConfig, guidance_pad_s: int = 0
) -> SignalPlan:
    """Wrap raw greens as a full cycle in fixed link order."""
    return SignalPlan(
        phases=tuple((i, int(g)) for i, g in enumerate(genome)),
        inter_green_s=cfg.inter_green_s,
        guidance_pad_s=guidance_pad_s,
    )


def _update_archive(archive: dict[Genome, Individual], front: Iterable[Individual]):
    for ind in front:
        if ind.genome in archive:
            continue
        dominated = False
        for existing in list(archive.values()):
            if dominates(existing.objectives, ind.objectives):
                dominated = True
                break
            if dominates(ind.objectives, existing.objectives):
                del archive[existing.genome]
        if not dominated:
            archive[ind.genome] = Individual(ind.genome, ind.objectives)


def run(
    queue: QueueState,
    cfg: IntersectionConfig,
    params: OptimizerParams,
    guidance_pad_s: int = 0,
    queue_weighted_f2: bool = False,
    on_generation: Optional[Callable[[int, list[Individual]], None]] = None,
) -> list[Individual]:
    """Evolve green-time plans against ``queue``; return the Pareto front.

    The returned front is the non-dominated archive over all evaluated
    individuals, sorted by (f1, f2, genome) for reproducible output.
    ``on_generation`` is invoked with (generation, archive front so far)
    after each generation, mainly for instrumentation in tests.
    """
    if queue.num_links != cfg.num_links:
        raise ValueError(
            f"queue has {queue.num_links} links, config expects {cfg.num_links}"
        )
    rng = random.Random(params.rng_seed)
    L = cfg.num_links
    mut_prob = params.mutation_prob if params.mutation_prob is not None else 1.0 / L

    # The genome space is small relative to the evaluation count; memoize.
    cache: dict[Genome, ObjectiveVector] = {}

    def eval_genome(g: Genome) -> Individual:
        obj = cache.get(g)
        if obj is None:
            obj = objectives.evaluate(
                plan_from_genome(g, cfg, guidance_pad_s), queue, cfg,
                queue_weighted_f2=queue_weighted_f2,
            )
            cache[g] = obj
        return Individual(genome=g, objectives=obj)

    pop = [
        eval_genome(
            tuple(rng.randint(cfg.min_green_s, cfg.max_green_s) for _ in range(L))
        )
        for _ in range(params.population_size)
    ]
    archive: dict[Genome, Individual] = {}
    fronts = fast_non_dominated_sort(pop)
    for f in fronts:
        crowding_distance([pop[i] for i in f])
    _update_archive(archive, (pop[i] for i in fronts[0]))

    for gen in range(params.generations):
        offspring: list[Individual] = []
        while len(offspring) < params.population_size:
            p1 = tournament_select(pop, params.tournament_size, rng)
            p2 = tournament_select(pop, params.tournament_size, rng)
            c1, c2 = crossover(p1.genome, p2.genome, rng, params.crossover_prob)
            offspring.append(eval_genome(mutate(c1, rng, cfg, mut_prob)))
            offspring.append(eval_genome(mutate(c2, rng, cfg, mut_prob)))

        combined = pop + offspring
        fronts = fast_non_dominated_sort(combined)
        _update_archive(archive, (combined[i] for i in fronts[0]))
        survivors: list[Individual] = []
        for f in fronts:
            members = [combined[i] for i in f]
            crowding_distance(members)
            if len(survivors) + len(members) <= params.population_size:
                survivors.extend(members)
            else:
                members.sort(key=lambda ind: -ind.crowding)
                survivors.extend(
                    members[: params.population_size - len(survivors)]
                )
                break
        pop = survivors
        if on_generation is not None:
            on_generation(gen, list(archive.values()))

    front = sorted(
        archive.values(),
        key=lambda ind: (ind.objectives.f1, ind.objectives.f2, ind.genome),
    )
    for ind in front:
        ind.rank = 0
    return front


def select_operating_point(
    front: Sequence[Individual],
    policy: str,
    cfg: IntersectionConfig,
    guidance_pad_s: int = 0,
    weights: tuple[float, float] = (0.5, 0.5),
) -> SignalPlan:
    """Pick one plan from a Pareto front for execution.

    Policies: ``knee`` (closest to the ideal point in normalized objective
    space), ``weighted`` (min w1*f1' + w2*f2' over normalized objectives),
    ``min_f1``, ``min_f2``. Ties break by lower f1, then lower f2, then
    lexicographic genome.
    """
    if not front:
        raise ValueError("empty Pareto front")

    f1s = [ind.objectives.f1 for ind in front]
    f2s = [ind.objectives.f2 for ind in front]
    lo1, hi1 = min(f1s), max(f1s)
    lo2, hi2 = min(f2s), max(f2s)

    def norm(ind: Individual) -> tuple[float, float]:
        n1 = 0.0 if hi1 == lo1 else (ind.objectives.f1 - lo1) / (hi1 - lo1)
        n2 = 0.0 if hi2 == lo2 else (ind.objectives.f2 - lo2) / (hi2 - lo2)
        return n1, n2

    def tiebreak(ind: Individual):
        return (ind.objectives.f1, ind.objectives.f2, ind.genome)

    if policy == "knee":
        key = lambda ind: (math.hypot(*norm(ind)), *tiebreak(ind))
    elif policy == "weighted":
        w1, w2 = weights
        key = lambda ind: (
            w1 * norm(ind)[0] + w2 * norm(ind)[1],
            *tiebreak(ind),
        )
    elif policy == "min_f1":
        key = lambda ind: tiebreak(ind)
    elif policy == "min_f2":
        key = lambda ind: (ind.objectives.f2, ind.objectives.f1, ind.genome)
    else:
        raise ValueError(f"unknown selection policy {policy!r}")

    best = min(front, key=key)
    return plan_from_genome(best.genome, cfg, guidance_pad_s)
