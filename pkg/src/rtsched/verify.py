"""Executable checks on the schedulers.

* Set packing reduces to the per-frame optimization: with unit completion
  probabilities and equal backlogs, the best schedule is a maximum packing.
* The greedy scheduler is within ``sqrt(M)`` of the optimum on every frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .engine import Requirement
from .errors import InvalidInstance
from .model import FrameState, NetworkModel, frame_from_masks, generate_frame, make_rng, workers_to_mask
from .scheduler import Weight, compute_weights, solve_exact, solve_greedy

RATIO_TOL = 1e-9
REDUCTION_R = 0.5


@dataclass(frozen=True)
class SetPackingInstance:
    universe_size: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.universe_size < 1:
            raise InvalidInstance("universe size must be positive")
        for k, s in enumerate(self.sets):
            if not s:
                raise InvalidInstance(f"set {k + 1} is empty")
            bad = [e for e in s if not 1 <= e <= self.universe_size]
            if bad:
                raise InvalidInstance(f"set {k + 1} has elements outside [1, {self.universe_size}]: {sorted(bad)}")

    @classmethod
    def of(cls, universe_size: int, sets: Sequence[Sequence[int]]) -> SetPackingInstance:
        return cls(universe_size, tuple(frozenset(s) for s in sets))

    @classmethod
    def parse(cls, text: str) -> SetPackingInstance:
        """Read ``m n`` on the first line, then one line of elements per set."""
        lines = [ln.split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or len(lines[0]) != 2:
            raise InvalidInstance("line 1: expected 'm n'")
        try:
            m, n = int(lines[0][0]), int(lines[0][1])
            sets = [[int(x) for x in ln] for ln in lines[1:]]
        except ValueError as exc:
            raise InvalidInstance(f"non-integer token: {exc}") from None
        if len(sets) != n:
            raise InvalidInstance(f"header declares {n} sets, found {len(sets)}")
        return cls.of(m, sets)

    def to_text(self) -> str:
        rows = [f"{self.universe_size} {len(self.sets)}"]
        rows += [" ".join(str(e) for e in sorted(s)) for s in self.sets]
        return "\n".join(rows) + "\n"


def reduce_set_packing(instance: SetPackingInstance) -> tuple[NetworkModel, FrameState, Requirement]:
    """One app per set, one worker per element, every task certain to succeed.

    The generation matrix is the set-membership indicator, so sampling a frame
    from the model reproduces the instance exactly. All apps share the same
    requirement, so every job has the same weight and the best schedule is a
    maximum packing.
    """
    n, m = len(instance.sets), instance.universe_size
    masks = [workers_to_mask(e - 1 for e in s) for s in instance.sets]
    gen = np.array([[float(mk >> j & 1) for j in range(m)] for mk in masks])
    model = NetworkModel.constant(gen, np.ones((n, m)))
    return model, frame_from_masks(masks, 1), Requirement((REDUCTION_R,) * n)


def packing_via_scheduler(instance: SetPackingInstance) -> list[int]:
    """Indices (0-based) of a maximum packing, found by the exact scheduler."""
    model, frame, req = reduce_set_packing(instance)
    # backlog after the first frame's arrivals
    weights = compute_weights(req.r, frame, model)
    return list(solve_exact(weights)[0].scheduled)


@dataclass
class RatioReport:
    frames_audited: int
    frames_skipped: int
    max_ratio: float
    bound: float
    violations: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> RatioReport:
        return cls(**doc)


def frame_ratio(weights: Sequence[Weight], num_workers: int) -> tuple[float, float]:
    """``(OPT, APX)`` objective values of the exact and greedy schedulers."""
    return solve_exact(weights)[1], solve_greedy(weights, None, num_workers)[1]


def uniform_queues(n: int, rng: np.random.Generator, high: float = 10.0) -> list[float]:
    return list(rng.uniform(0.0, high, n))


def adversarial_weights(num_apps: int, num_workers: int, rng: np.random.Generator) -> list[Weight]:
    """Star instance: one wide job that greedy prefers over the singletons it blocks.

    The wide job covers ``k`` workers with weight 1; up to ``num_apps - 1``
    singletons sit on distinct workers of the star with weight just under
    ``1/sqrt(k)``. Greedy takes the star, the optimum takes the singletons,
    so the ratio approaches ``sqrt(k)``.
    """
    k = int(rng.integers(1, num_workers + 1))
    star = [int(x) for x in rng.choice(num_workers, size=k, replace=False)]
    weights = [Weight(0, 1.0, workers_to_mask(star))]
    leaves = min(num_apps - 1, k)
    for a, j in enumerate(star[:leaves], start=1):
        w = (1.0 - float(rng.uniform(0.0, 0.05))) / math.sqrt(k)
        weights.append(Weight(a, w, 1 << j))
    return weights


QueueDist = Callable[[int, np.random.Generator], Sequence[float]]


def audit_ratio(
    model: NetworkModel,
    frames: int,
    seed=0,
    queue_distribution: str | QueueDist = "uniform",
) -> RatioReport:
    """Compare exact and greedy objective values on random frames.

    ``queue_distribution`` is ``"uniform"`` (backlogs i.i.d. uniform on
    [0, 10], jobs sampled from ``model``), ``"adversarial"`` (star
    instances sized by the model), or a callable ``(n, rng) -> backlogs``.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    rng = make_rng(seed)
    m = model.num_workers
    bound = math.sqrt(m)
    audited = skipped = violations = 0
    worst = 0.0
    for t in range(1, frames + 1):
        if queue_distribution == "adversarial":
            weights = adversarial_weights(model.num_apps, m, rng)
        else:
            frame = generate_frame(model, t, rng)
            draw = uniform_queues if queue_distribution == "uniform" else queue_distribution
            weights = compute_weights(list(draw(model.num_apps, rng)), frame, model)
        opt, apx = frame_ratio(weights, m)
        if opt == 0.0 and apx == 0.0:
            skipped += 1
            continue
        audited += 1
        ratio = opt / apx if apx > 0 else math.inf
        worst = max(worst, ratio)
        if opt - bound * apx > RATIO_TOL * max(1.0, opt):
            violations += 1
    return RatioReport(audited, skipped, worst, bound, violations)


def load_instance(path: str | Path) -> SetPackingInstance:
    return SetPackingInstance.parse(Path(path).read_text())
