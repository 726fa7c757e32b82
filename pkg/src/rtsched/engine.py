"""Virtual-queue simulation loop.

Each application owns a virtual queue that receives ``r_i`` (fractional)
packets at the start of every frame and loses one packet whenever the
application's job completes. Scheduling on the backlog keeps the queues
stable exactly when the requirement vector is achievable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .model import NetworkModel, generate_frame, make_rng, sample_task_completions
from .scheduler import compute_weights, get_policy, solve_exact, solve_greedy

TRACE_EVERY = 10


@dataclass(frozen=True)
class Requirement:
    r: tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        for i, x in enumerate(r):
            if not 0.0 <= x <= 1.0 or math.isnan(x):
                raise ValueError(f"requirement r[{i}] = {x!r} must be in [0, 1]")
        object.__setattr__(self, "r", r)

    def __len__(self):
        return len(self.r)

    def scaled(self, c: float) -> Requirement:
        return Requirement(tuple(c * x for x in self.r))


def as_requirement(r) -> Requirement:
    return r if isinstance(r, Requirement) else Requirement(tuple(r))


@dataclass(frozen=True)
class QueueState:
    q: tuple[float, ...]
    frame: int = 1

    @classmethod
    def empty(cls, n: int) -> QueueState:
        return cls((0.0,) * n, 1)


@dataclass
class SimMetrics:
    requirement: tuple[float, ...]
    policy: str
    frames: int
    completions: list[int]
    generated: list[int]
    final_queue: list[float]
    queue_trace: list[list[float]] = field(default_factory=list)
    decisions: list[list[int]] | None = None
    ratio_log: list[list[float]] | None = None

    @property
    def empirical_rate(self) -> list[float]:
        return [c / self.frames for c in self.completions]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["requirement"] = list(self.requirement)
        doc["empirical_rate"] = self.empirical_rate
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> SimMetrics:
        doc = dict(doc)
        doc.pop("empirical_rate", None)
        doc["requirement"] = tuple(doc["requirement"])
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write_trace_csv(self, path: str | Path) -> None:
        n = len(self.completions)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame"] + [f"q_{i}" for i in range(n)])
            for row in self.queue_trace:
                writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def _resolve_policy(policy):
    if callable(policy):
        return policy, getattr(policy, "__name__", "custom")
    return get_policy(policy), policy


def _step(queues: QueueState, model: NetworkModel, requirement: Requirement, policy_fn, rng):
    n = model.num_apps
    if len(queues.q) != n or len(requirement) != n:
        raise DimensionMismatch(
            f"{len(queues.q)} queues and {len(requirement)} requirements for {n} apps"
        )
    t = queues.frame
    q = [qi + ri for qi, ri in zip(queues.q, requirement.r)]
    frame = generate_frame(model, t, rng)
    order_u = rng.random(n)
    weights = compute_weights(q, frame, model)
    decision = policy_fn(weights, model.num_workers, order_u)
    decision.validate(frame.masks)
    done = sample_task_completions(model, frame, decision, rng)
    q = [max(qi - 1.0, 0.0) if d else qi for qi, d in zip(q, done)]
    return QueueState(tuple(q), t + 1), done, decision, frame, weights


def step(queues: QueueState, model: NetworkModel, requirement, policy, rng):
    """Advance one frame: arrivals, weights, decision, completions, departures.

    Returns ``(new_queues, completed, decision)``.
    """
    fn, _ = _resolve_policy(policy)
    new, done, decision, _, _ = _step(queues, model, as_requirement(requirement), fn, rng)
    return new, done, decision


def simulate(
    model: NetworkModel,
    requirement,
    policy,
    frames: int,
    seed,
    *,
    trace_every: int = TRACE_EVERY,
    record_decisions: bool = False,
    record_ratio: bool = False,
) -> SimMetrics:
    """Run ``frames`` frames from empty queues with a private random stream."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    requirement = as_requirement(requirement)
    fn, name = _resolve_policy(policy)
    rng = make_rng(seed)
    n = model.num_apps
    state = QueueState.empty(n)
    completions = [0] * n
    generated = [0] * n
    trace: list[list[float]] = []
    decisions = [] if record_decisions else None
    ratios = [] if record_ratio else None
    for t in range(1, frames + 1):
        state, done, decision, frame, weights = _step(state, model, requirement, fn, rng)
        for i in range(n):
            completions[i] += done[i]
            generated[i] += frame.jobs[i].tasks != 0
        if trace_every and t % trace_every == 0:
            trace.append([t, *state.q])
        if decisions is not None:
            decisions.append(list(decision.scheduled))
        if ratios is not None:
            ratios.append([solve_exact(weights)[1], solve_greedy(weights, None, model.num_workers)[1]])
    return SimMetrics(
        requirement=requirement.r,
        policy=name,
        frames=frames,
        completions=completions,
        generated=generated,
        final_queue=list(state.q),
        queue_trace=trace,
        decisions=decisions,
        ratio_log=ratios,
    )


def default_stability_threshold(metrics: SimMetrics) -> float:
    return 100.0 * max(metrics.requirement, default=0.0) * math.sqrt(metrics.frames)


def is_stable_proxy(metrics: SimMetrics, threshold: float | None = None, *, growth: float = 0.5) -> bool:
    """Finite-horizon stand-in for bounded average backlog.

    Stable iff no sampled queue exceeds ``threshold`` and, for every app, the
    mean backlog over the last quarter of the run is at most
    ``1 + growth`` times the mean over the second quarter. Differences below
    ``sqrt(frames)`` packets are ignored: completion counts fluctuate on that
    scale even when the queue is stable.
    """
    if threshold is None:
        threshold = default_stability_threshold(metrics)
    if not metrics.queue_trace:
        raise ValueError("stability check needs a recorded queue trace")
    trace = np.asarray(metrics.queue_trace, dtype=float)
    t, q = trace[:, 0], trace[:, 1:]
    if q.max() > threshold:
        return False
    T = metrics.frames
    second = q[(t > T / 4) & (t <= T / 2)]
    last = q[t > 3 * T / 4]
    if len(second) == 0 or len(last) == 0:
        return True
    m2, m4 = second.mean(axis=0), last.mean(axis=0)
    drifting = (m4 > (1.0 + growth) * m2) & (m4 - m2 > math.sqrt(T))
    return not bool(drifting.any())


def simulate_many(
    model: NetworkModel,
    requirements: Sequence,
    policy: str,
    frames: int,
    seeds: Sequence,
) -> tuple[np.ndarray, np.ndarray]:
    """Completion counts and final queues for many independent runs.

    Runs through the compiled kernel when it supports the model and policy
    (results are identical to :func:`simulate` with the same seed), otherwise
    through :func:`simulate`. Returns arrays of shape (runs, N).
    """
    from . import kernel

    if kernel.supports(model, policy):
        return kernel.run_batch(model, requirements, policy, frames, seeds)
    counts = np.zeros((len(seeds), model.num_apps), dtype=np.int64)
    finals = np.zeros((len(seeds), model.num_apps))
    for b, (req, seed) in enumerate(zip(requirements, seeds)):
        m = simulate(model, req, policy, frames, seed, trace_every=0)
        counts[b] = m.completions
        finals[b] = m.final_queue
    return counts, finals
