"""Robustness minimization over the concretization box, per configuration.

The optimizer is a self-contained derivative-free search: a Latin
hypercube batch seeds the incumbent, then (1+1)-style local perturbation
with an adaptive step (halved on failure, doubled on success) and
restarts on stagnation.  Everything is driven by one seeded RNG, so runs
are reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

from .ctgen import Configuration
from .sim import (
    InstantiationError, Scenario, ScenarioSample, box_dimension, instantiate,
    run_policy,
)
from .stl import PredicateMap, SpecSynthesisResult, Trace, robustness, synthesize
from .tasks import format_task
from .theory import ActionTheory


class FalsificationError(Exception):
    pass


_INIT_BATCH = 8
_STAGNATION = 12  # non-improving evaluations before a restart
_INIT_STEP = 0.25
_MIN_STEP = 1e-3


@dataclass(frozen=True)
class FalsificationProblem:
    config: Configuration
    spec: SpecSynthesisResult
    theory: ActionTheory
    scenario: Scenario
    pmap: PredicateMap
    budget: int
    seed: int
    sim_dt: float = 0.25

    def __post_init__(self):
        if self.budget < 1:
            raise FalsificationError("budget must be at least 1")


@dataclass(frozen=True)
class FalsificationResult:
    status: str  # "falsified" | "passed-budget-exhausted"
    best_robustness: float
    best_sample: Optional[ScenarioSample]
    best_trace: Optional[Trace]
    evaluations: int
    infeasible: int

    def __post_init__(self):
        if (self.status == "falsified") != (self.best_robustness < 0):
            raise FalsificationError("status/robustness inconsistency")


def _latin_hypercube(rng: random.Random, n: int, d: int) -> list[tuple[float, ...]]:
    cols = []
    for _ in range(d):
        cells = list(range(n))
        rng.shuffle(cells)
        cols.append([(c + rng.random()) / n for c in cells])
    return [tuple(cols[j][i] for j in range(d)) for i in range(n)]


def falsify(problem: FalsificationProblem) -> FalsificationResult:
    """Minimize robustness of the synthesized spec over the unit box.

    Stops early at the first strictly negative, non-truncated robustness.
    Truncated traces are evaluated but can never count as falsified.
    """
    theory, scn, pmap = problem.theory, problem.scenario, problem.pmap
    config, spec = problem.config, problem.spec
    # with several surviving branches the policy follows the first one;
    # the spec is their disjunction, so a violation is still a violation
    ops = list(spec.branches[0].ops)
    horizon = max(len(ops), 1) * spec.delta_t
    d = box_dimension(scn)
    rng = random.Random(problem.seed)

    evaluations = 0
    infeasible = 0
    best_rho = math.inf
    best_sample: Optional[ScenarioSample] = None
    best_trace: Optional[Trace] = None
    best_point: Optional[tuple[float, ...]] = None

    def evaluate(point: tuple[float, ...]):
        nonlocal evaluations, infeasible, best_rho, best_sample, best_trace, best_point
        evaluations += 1
        try:
            sample = instantiate(theory, config.initial_world, scn, pmap, point)
        except InstantiationError:
            infeasible += 1
            return None
        trace, truncated = run_policy(theory, scn, sample, ops,
                                      problem.sim_dt, horizon)
        r = robustness(spec.formula, trace, 0.0)
        effective = r.value if not (truncated or r.truncated) else max(r.value, 0.0)
        if effective < best_rho:
            best_rho = effective
            best_sample, best_trace, best_point = sample, trace, point
        return effective

    initial = _latin_hypercube(rng, min(_INIT_BATCH, problem.budget), d)
    for p in initial:
        v = evaluate(p)
        if v is not None and v < 0:
            return _result(best_rho, best_sample, best_trace, evaluations, infeasible)
        if evaluations >= problem.budget:
            break

    step = _INIT_STEP
    since_improvement = 0
    while evaluations < problem.budget:
        if best_point is None or since_improvement >= _STAGNATION:
            candidate = tuple(rng.random() for _ in range(d))
            step = _INIT_STEP
            since_improvement = 0
        else:
            candidate = tuple(min(1.0, max(0.0, x + rng.gauss(0.0, step)))
                              for x in best_point)
        before = best_rho
        v = evaluate(candidate)
        if v is not None and v < 0:
            break
        if v is not None and v < before:
            step = min(2.0 * step, 1.0)
            since_improvement = 0
        else:
            step = max(0.5 * step, _MIN_STEP)
            since_improvement += 1

    if best_sample is None:
        raise FalsificationError(
            "every instantiation was infeasible for %s" % format_task(config.task))
    return _result(best_rho, best_sample, best_trace, evaluations, infeasible)


def _result(rho, sample, trace, evaluations, infeasible) -> FalsificationResult:
    status = "falsified" if rho < 0 else "passed-budget-exhausted"
    return FalsificationResult(status, rho, sample, trace, evaluations, infeasible)


@dataclass(frozen=True)
class CampaignEntry:
    index: int
    task_text: str
    status: str  # falsify status or "error"
    robustness: Optional[float]
    evaluations: int
    error: Optional[str] = None


def campaign(configs: list[Configuration], theory: ActionTheory, scn: Scenario,
             pmap: PredicateMap, budget: int, seed: int,
             sim_dt: float = 0.25) -> list[tuple[CampaignEntry, Optional[FalsificationResult]]]:
    """Falsify each configuration; individual failures are recorded and the
    campaign continues.  Per-config seeds are derived from the base seed."""
    out = []
    for i, config in enumerate(configs):
        task_text = format_task(config.task)
        try:
            spec = synthesize(config, theory, pmap)
            problem = FalsificationProblem(config, spec, theory, scn, pmap,
                                           budget, seed + i, sim_dt)
            res = falsify(problem)
            out.append((CampaignEntry(i, task_text, res.status,
                                      res.best_robustness, res.evaluations), res))
        except Exception as e:  # campaign must survive per-config failures
            out.append((CampaignEntry(i, task_text, "error", None, 0, str(e)), None))
    return out


def summarize(entries: list[CampaignEntry]) -> dict:
    n = len(entries)
    falsified = sum(1 for e in entries if e.status == "falsified")
    passed = sum(1 for e in entries if e.status == "passed-budget-exhausted")
    errors = sum(1 for e in entries if e.status == "error")
    return {"configurations": n, "falsified": falsified, "passed": passed,
            "errors": errors}
