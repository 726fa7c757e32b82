"""Per-frame scheduling decisions.

Each policy picks an interference-free subset of the frame's non-empty jobs.
The objective is the sum of job weights, where a job's weight is its
application's queue backlog times the probability that every one of its
tasks succeeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, MalformedDecision
from .model import FrameState, NetworkModel, mask_to_workers, popcount

# Relative slack on branch-and-bound pruning. Bounds are summed in a different
# order than the canonical objective, so a tied subset could otherwise be cut
# by a rounding error and break the tie-break contract.
_PRUNE_SLACK = 1e-12


@dataclass(frozen=True)
class Weight:
    app_index: int
    value: float
    tasks: int

    @property
    def cardinality(self) -> int:
        return popcount(self.tasks)


@dataclass(frozen=True)
class Decision:
    scheduled: tuple[int, ...] = ()
    used_workers: int = 0

    @classmethod
    def of(cls, scheduled, masks: Sequence[int]) -> Decision:
        scheduled = tuple(sorted(scheduled))
        used = 0
        for i in scheduled:
            used |= masks[i]
        return cls(scheduled, used)

    def validate(self, masks: Sequence[int]) -> None:
        """Raise ``MalformedDecision`` unless the decision invariants hold."""
        used = 0
        for i in self.scheduled:
            if masks[i] == 0:
                raise MalformedDecision(f"app {i} scheduled with an empty job")
            if used & masks[i]:
                raise MalformedDecision(f"app {i} interferes on workers {mask_to_workers(used & masks[i])}")
            used |= masks[i]
        if used != self.used_workers:
            raise MalformedDecision("used_workers is not the union of scheduled jobs")

    def __contains__(self, app: int) -> bool:
        return app in self.scheduled


def objective(weights: Sequence[Weight], scheduled: Sequence[int]) -> float:
    """Sum of scheduled weights, added in ascending app order."""
    total = 0.0
    for i in sorted(scheduled):
        total += weights[i].value
    return total


def compute_weights(queues, frame: FrameState, model: NetworkModel) -> list[Weight]:
    """Backlog-times-success-probability weight for every application."""
    q = getattr(queues, "q", queues)
    if len(q) != model.num_apps or len(frame.jobs) != model.num_apps:
        raise DimensionMismatch(
            f"{len(q)} queues and {len(frame.jobs)} jobs for a model with {model.num_apps} apps"
        )
    probs = frame.completion_probs(model)
    weights = []
    for i, job in enumerate(frame.jobs):
        if job.tasks == 0:
            weights.append(Weight(i, 0.0, 0))
            continue
        success = 1.0
        for j in mask_to_workers(job.tasks):
            success *= float(probs[i, j])
        weights.append(Weight(i, float(q[i]) * success, job.tasks))
    return weights


def lex_smaller(a: Sequence[int], b: Sequence[int]) -> bool:
    return tuple(sorted(a)) < tuple(sorted(b))


def solve_exact(weights: Sequence[Weight]) -> tuple[Decision, float]:
    """Maximum-weight interference-free subset by branch and bound.

    Only jobs with positive weight are candidates. Among optimal subsets the
    one whose sorted index list is lexicographically smallest is returned.
    """
    cand = sorted(
        (w for w in weights if w.tasks and w.value > 0.0),
        key=lambda w: (-w.value, w.app_index),
    )
    masks = [w.tasks for w in weights]
    values = [w.value for w in cand]
    cmasks = [w.tasks for w in cand]
    k = len(cand)

    best_set: tuple[int, ...] = ()
    best_val = 0.0
    chosen: list[int] = []

    def visit(pos: int, used: int, current: float) -> None:
        nonlocal best_set, best_val
        if chosen:
            members = tuple(sorted(cand[p].app_index for p in chosen))
            val = objective(weights, members)
            if val > best_val or (val == best_val and members < best_set):
                best_set, best_val = members, val
        if pos == k:
            return
        room = 0.0
        for p in range(pos, k):
            if not cmasks[p] & used:
                room += values[p]
        if current + room < best_val * (1.0 - _PRUNE_SLACK):
            return
        if not cmasks[pos] & used:
            chosen.append(pos)
            visit(pos + 1, used | cmasks[pos], current + values[pos])
            chosen.pop()
        visit(pos + 1, used, current)

    visit(0, 0, 0.0)
    return Decision.of(best_set, masks), best_val


def greedy_keys(weights: Sequence[Weight]) -> list[float]:
    return [w.value / math.sqrt(w.cardinality) if w.tasks else 0.0 for w in weights]


def _scan(order: Sequence[int], masks: Sequence[int], num_workers: int) -> Decision:
    available = (1 << num_workers) - 1
    picked = []
    for i in order:
        mask = masks[i]
        if mask and not mask & ~available:
            picked.append(i)
            available &= ~mask
    return Decision.of(picked, masks)


def solve_greedy(
    weights: Sequence[Weight], cardinalities: Sequence[int] | None = None, num_workers: int = 64
) -> tuple[Decision, float]:
    """Scan jobs by weight / sqrt(job size), taking each one whose workers are all free."""
    if cardinalities is not None and list(cardinalities) != [w.cardinality for w in weights]:
        raise DimensionMismatch("cardinalities do not match the weights' task masks")
    keys = greedy_keys(weights)
    # stable sort: equal keys keep ascending app order
    order = sorted(range(len(weights)), key=lambda i: -keys[i])
    decision = _scan(order, [w.tasks for w in weights], num_workers)
    return decision, objective(weights, decision.scheduled)


def random_order(uniforms: np.ndarray) -> list[int]:
    return [int(i) for i in np.argsort(uniforms, kind="stable")]


def solve_baseline_random(
    weights: Sequence[Weight], rng: np.random.Generator | None = None, uniforms=None, num_workers: int = 64
) -> Decision:
    """Schedule feasible jobs scanning apps in a uniformly random order."""
    if uniforms is None:
        uniforms = rng.random(len(weights))
    return _scan(random_order(uniforms), [w.tasks for w in weights], num_workers)


def solve_baseline_priority(weights: Sequence[Weight], num_workers: int = 64) -> Decision:
    return _scan(range(len(weights)), [w.tasks for w in weights], num_workers)


PolicyFn = Callable[[Sequence[Weight], int, np.ndarray], Decision]

POLICIES: dict[str, PolicyFn] = {
    "exact": lambda w, m, u: solve_exact(w)[0],
    "greedy": lambda w, m, u: solve_greedy(w, None, m)[0],
    "random": lambda w, m, u: solve_baseline_random(w, uniforms=u, num_workers=m),
    "priority": lambda w, m, u: solve_baseline_priority(w, m),
}


def get_policy(name: str) -> PolicyFn:
    try:
        return POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
