"""Monte-Carlo estimates of the requirement vectors a policy can fulfill.

A requirement ``r`` is judged fulfilled when every application's completion
rate, averaged over several independent runs, is at least ``r_i - epsilon``.
Every tested point gets its own seeds, derived from ``(base_seed,
point_index, replicate)``, and those seeds do not depend on the policy, so
two policies evaluated at the same point see the same job and completion
draws.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import Requirement, as_requirement, simulate_many
from .errors import NotTwoApps
from .model import NetworkModel

EPSILON = 0.01
FRAMES = 10_000
REPLICATES = 5
GRID_STEP = 0.02
RESOLUTION = 0.005
RETEST_FACTOR = 3


def point_seeds(base_seed: int, point_index: int, replicates: int, offset: int = 0) -> list[tuple[int, int, int]]:
    return [(base_seed, point_index, offset + k) for k in range(replicates)]


@dataclass
class FulfillmentVerdict:
    requirement: tuple[float, ...]
    fulfilled: bool
    margins: list[float]
    rates: list[float]
    seeds_used: list

    @property
    def min_margin(self) -> float:
        return min(self.margins)


def check_fulfillment(
    model: NetworkModel,
    requirement,
    policy: str,
    frames: int = FRAMES,
    seeds: Sequence = (0,),
    epsilon: float = EPSILON,
) -> FulfillmentVerdict:
    """Average completion rates over ``seeds`` and compare them with ``requirement``."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if not seeds:
        raise ValueError("at least one seed is required")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    req = as_requirement(requirement)
    if len(req) != model.num_apps:
        raise ValueError(f"requirement has {len(req)} entries for {model.num_apps} apps")
    counts, _ = simulate_many(model, [req] * len(seeds), policy, frames, list(seeds))
    rates = (counts / frames).mean(axis=0)
    margins = [float(x - ri) for x, ri in zip(rates, req.r)]
    return FulfillmentVerdict(
        requirement=req.r,
        fulfilled=min(margins) >= -epsilon,
        margins=margins,
        rates=[float(x) for x in rates],
        seeds_used=list(seeds),
    )


@dataclass
class RegionEstimate:
    policy: str
    params: dict
    points: list[FulfillmentVerdict] = field(default_factory=list)
    boundary: float | None = None
    largest_fulfilled: float | None = None

    def fulfilled_set(self) -> set[tuple[float, ...]]:
        return {p.requirement for p in self.points if p.fulfilled}

    def verdict_at(self, r) -> FulfillmentVerdict | None:
        r = tuple(r)
        for p in self.points:
            if p.requirement == r:
                return p
        return None

    def monotonicity_flags(self) -> list[tuple[tuple[float, ...], tuple[float, ...]]]:
        """Pairs ``(unfulfilled, fulfilled)`` where the first is dominated by the second.

        Such pairs are Monte-Carlo noise near the boundary; they are reported,
        not corrected.
        """
        good = [p.requirement for p in self.points if p.fulfilled]
        flags = []
        for p in self.points:
            if p.fulfilled:
                continue
            for g in good:
                if all(a <= b for a, b in zip(p.requirement, g)):
                    flags.append((p.requirement, g))
                    break
        return flags

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = len(self.points[0].requirement) if self.points else 0
        writer.writerow([f"r_{i}" for i in range(n)] + ["fulfilled", "min_margin"])
        for p in self.points:
            writer.writerow([repr(x) for x in p.requirement] + [int(p.fulfilled), repr(p.min_margin)])
        return buf.getvalue()

    def boundary_dict(self) -> dict:
        return {
            "policy": self.policy,
            "params": self.params,
            "boundary": self.boundary,
            "largest_fulfilled": self.largest_fulfilled,
        }


def read_region_csv(text: str) -> list[tuple[tuple[float, ...], bool, float]]:
    rows = list(csv.reader(io.StringIO(text)))
    n = len(rows[0]) - 2
    return [(tuple(float(x) for x in row[:n]), row[n] == "1", float(row[n + 1])) for row in rows[1:]]


def grid_values(step: float) -> list[float]:
    count = 1.0 / step
    if step <= 0 or abs(count - round(count)) > 1e-9:
        raise ValueError(f"grid step {step!r} does not divide [0, 1]")
    return [round(k * step, 12) for k in range(int(round(count)) + 1)]


def _check_task(args):
    model, req, policy, frames, seeds, epsilon = args
    return check_fulfillment(model, req, policy, frames, seeds, epsilon)


def _evaluate(tasks: list, jobs: int) -> list[FulfillmentVerdict]:
    if jobs <= 1 or len(tasks) < 2:
        return [_check_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so the merge is by point index
        return list(pool.map(_check_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def sweep_grid_2d(
    model: NetworkModel,
    policy: str,
    step: float = GRID_STEP,
    frames: int = FRAMES,
    replicates: int = REPLICATES,
    *,
    base_seed: int = 0,
    epsilon: float = EPSILON,
    jobs: int = 1,
) -> RegionEstimate:
    """Fulfillment verdicts on the full ``(r_0, r_1)`` grid with spacing ``step``."""
    if model.num_apps != 2:
        raise NotTwoApps(f"grid sweep needs exactly 2 apps, model has {model.num_apps}")
    values = grid_values(step)
    tasks = []
    for a in values:
        for b in values:
            idx = len(tasks)
            tasks.append((model, Requirement((a, b)), policy, frames, point_seeds(base_seed, idx, replicates), epsilon))
    points = _evaluate(tasks, jobs)
    params = {"step": step, "frames": frames, "replicates": replicates, "base_seed": base_seed, "epsilon": epsilon}
    return RegionEstimate(policy, params, points)


def _is_symmetric(model: NetworkModel) -> bool:
    return bool(np.all(model.gen_prob == model.gen_prob[0]))


def sweep_symmetric(
    model: NetworkModel,
    policy: str,
    resolution: float = RESOLUTION,
    frames: int = FRAMES,
    replicates: int = REPLICATES,
    *,
    base_seed: int = 0,
    epsilon: float = EPSILON,
    max_rounds: int = 4,
) -> RegionEstimate:
    """Largest common requirement ``r`` (all ``r_i = r``) the policy fulfills.

    Bisects on ``r`` in [0, 1] assuming fulfillment is downward closed. The
    final fulfilled point is re-tested with ``RETEST_FACTOR`` times as many
    seeds; if it fails there, bisection resumes below it. The reported
    ``boundary`` is the smallest per-app completion rate achieved at the
    confirmed point (capped by that point's ``r``), which removes the
    ``epsilon`` slack from the estimate; ``largest_fulfilled`` keeps the raw
    bisection result.
    """
    if not _is_symmetric(model):
        raise ValueError("symmetric sweep needs identical generation probabilities for every app")
    n = model.num_apps
    est = RegionEstimate(policy, {
        "resolution": resolution, "frames": frames, "replicates": replicates,
        "base_seed": base_seed, "epsilon": epsilon,
    })

    def test(r: float, reps: int = replicates, offset: int = 0) -> FulfillmentVerdict:
        idx = len(est.points)
        v = check_fulfillment(model, (r,) * n, policy, frames, point_seeds(base_seed, idx, reps, offset), epsilon)
        est.points.append(v)
        return v

    lo_v = test(0.0)
    hi_v = test(1.0)
    if hi_v.fulfilled:
        lo, hi, confirmed = 1.0, 1.0, hi_v
    else:
        lo, hi, confirmed = 0.0, 1.0, lo_v
        for _ in range(max_rounds):
            best = None
            while hi - lo > resolution:
                mid = (lo + hi) / 2
                v = test(mid)
                if v.fulfilled:
                    lo, best = mid, v
                else:
                    hi = mid
            if best is None:
                break
            check = test(lo, replicates * RETEST_FACTOR)
            if check.fulfilled:
                confirmed = check
                break
            # noise flip: lo is above the boundary after all
            hi = lo
            lo = confirmed.requirement[0]
    r_star = confirmed.requirement[0]
    est.largest_fulfilled = r_star
    est.boundary = min(r_star, min(confirmed.rates)) if r_star > 0 else 0.0
    return est


def containment_violations(inner: RegionEstimate, outer: RegionEstimate) -> list[tuple[float, ...]]:
    """Points fulfilled in ``inner`` but not in ``outer``."""
    outer_ok = outer.fulfilled_set()
    return [p.requirement for p in inner.points if p.fulfilled and p.requirement not in outer_ok]


def scaled_audit(
    exact: RegionEstimate,
    model: NetworkModel,
    policy: str = "greedy",
    factor: float | None = None,
    *,
    jobs: int = 1,
) -> list[FulfillmentVerdict]:
    """Re-test every point fulfilled in ``exact`` at ``r / factor`` under ``policy``.

    ``factor`` defaults to ``sqrt(M)``, the guaranteed shrinkage for the greedy
    policy. Returns the failed verdicts (empty when the guarantee holds).
    Scaled points reuse the seeds of their source point.
    """
    if factor is None:
        factor = math.sqrt(model.num_workers)
    p = exact.params
    tasks = []
    for v in exact.points:
        if v.fulfilled:
            req = Requirement(tuple(x / factor for x in v.requirement))
            tasks.append((model, req, policy, p["frames"], v.seeds_used, p["epsilon"]))
    return [v for v in _evaluate(tasks, jobs) if not v.fulfilled]
