"""Network parameters and per-frame stochastic sampling.

A network has ``N`` applications and ``M`` specialized workers. In every frame
each application draws a job (a set of tasks, one per required worker) and the
scheduled tasks then succeed or fail independently.

Random draws follow a fixed per-frame layout so that a run is reproducible
from its seed regardless of which policy is scheduling::

    [generation  N*M] [workload levels N*M, workload model only] [order N] [completion N*M]

Every block is consumed app-major, worker-major. The ``order`` block is drawn
for every policy even though only the random baseline reads it, which keeps
the job and completion streams identical across policies for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, MalformedDecision

MAX_WORKERS = 64


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Private random stream for one run; ``seed`` may be a tuple of ints."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_to_workers(mask: int) -> list[int]:
    return [j for j in range(mask.bit_length()) if mask >> j & 1]


def workers_to_mask(workers: Sequence[int]) -> int:
    mask = 0
    for j in workers:
        mask |= 1 << int(j)
    return mask


def _prob_matrix(raw: Any, name: str, shape: tuple[int, int]) -> np.ndarray:
    """Validate a nested list of probabilities and return it as a float array."""
    rows, cols = shape
    if not isinstance(raw, (list, tuple, np.ndarray)) or len(raw) != rows:
        raise ConfigError(f"{name}: expected {rows} rows, got {_describe_len(raw)}")
    out = np.empty(shape, dtype=float)
    for i, row in enumerate(raw):
        if not isinstance(row, (list, tuple, np.ndarray)) or len(row) != cols:
            raise ConfigError(f"{name}[{i}]: expected {cols} columns, got {_describe_len(row)}")
        for j, value in enumerate(row):
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ConfigError(f"{name}[{i}][{j}]: expected a number, got {value!r}")
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name}[{i}][{j}] = {value!r}: probability must be in [0, 1]")
            out[i, j] = value
    return out


def _describe_len(raw: Any) -> str:
    try:
        return f"{len(raw)} entries"
    except TypeError:
        return repr(raw)


class CompletionModel:
    """Task completion probabilities, possibly depending on the frame's workload."""

    def effective_probs(self, workload_draw: np.ndarray | None) -> np.ndarray:
        raise NotImplementedError

    def draw_levels(self, uniforms: np.ndarray) -> np.ndarray | None:
        return None

    @property
    def draws_levels(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantCompletion(CompletionModel):
    probs: np.ndarray

    def effective_probs(self, workload_draw=None):
        return self.probs

    def to_dict(self):
        return {"constant": self.probs.tolist()}

    def __eq__(self, other):
        return isinstance(other, ConstantCompletion) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class WorkloadCompletion(CompletionModel):
    """Time-varying workloads: each (app, worker) pair draws a workload level
    i.i.d. per frame, and the task succeeds with that level's probability.

    ``level_probs`` has shape (L, N, M); ``level_dist`` has shape (N, M, L).
    """

    labels: tuple[str, ...]
    level_probs: np.ndarray
    level_dist: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cdf = np.cumsum(self.level_dist, axis=-1)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def draws_levels(self):
        return True

    def draw_levels(self, uniforms):
        # inverse-CDF lookup; clip guards against cumulative sums a hair below 1
        levels = (uniforms[..., None] >= self._cdf).sum(axis=-1)
        return np.minimum(levels, len(self.labels) - 1)

    def effective_probs(self, workload_draw):
        n, m = workload_draw.shape
        return self.level_probs[workload_draw, np.arange(n)[:, None], np.arange(m)[None, :]]

    def to_dict(self):
        return {
            "workload": {
                "levels": [
                    {"label": label, "probs": self.level_probs[k].tolist()}
                    for k, label in enumerate(self.labels)
                ],
                "level_dist": self.level_dist.tolist(),
            }
        }

    def __eq__(self, other):
        return (
            isinstance(other, WorkloadCompletion)
            and self.labels == other.labels
            and np.array_equal(self.level_probs, other.level_probs)
            and np.array_equal(self.level_dist, other.level_dist)
        )


@dataclass(frozen=True, eq=False)
class NetworkModel:
    num_apps: int
    num_workers: int
    gen_prob: np.ndarray
    completion: CompletionModel

    def __post_init__(self):
        if self.num_apps < 1:
            raise ConfigError(f"num_apps = {self.num_apps!r}: must be a positive integer")
        if not 1 <= self.num_workers <= MAX_WORKERS:
            raise ConfigError(f"num_workers = {self.num_workers!r}: must be in [1, {MAX_WORKERS}]")
        shape = (self.num_apps, self.num_workers)
        object.__setattr__(self, "gen_prob", _prob_matrix(self.gen_prob, "gen_prob", shape))
        self.gen_prob.setflags(write=False)

    @classmethod
    def constant(cls, gen_prob, completion_probs) -> NetworkModel:
        """Model with constant completion probabilities."""
        gen = np.asarray(gen_prob, dtype=float)
        if gen.ndim != 2:
            raise ConfigError("gen_prob: expected a matrix")
        n, m = gen.shape
        probs = _prob_matrix(np.asarray(completion_probs, dtype=float).tolist(), "completion.constant", (n, m))
        return cls(n, m, gen, ConstantCompletion(probs))

    @classmethod
    def uniform(cls, num_apps: int, num_workers: int, gen: float, completion: float) -> NetworkModel:
        shape = (num_apps, num_workers)
        return cls.constant(np.full(shape, gen), np.full(shape, completion))

    @classmethod
    def from_dict(cls, doc: dict) -> NetworkModel:
        if not isinstance(doc, dict):
            raise ConfigError("model config must be a JSON object")
        for key in ("num_apps", "num_workers", "gen_prob", "completion"):
            if key not in doc:
                raise ConfigError(f"missing required key {key!r}")
        n, m = doc["num_apps"], doc["num_workers"]
        for key, value in (("num_apps", n), ("num_workers", m)):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} = {value!r}: expected an integer")
        if n < 1:
            raise ConfigError(f"num_apps = {n}: must be a positive integer")
        if not 1 <= m <= MAX_WORKERS:
            raise ConfigError(f"num_workers = {m}: must be in [1, {MAX_WORKERS}]")
        gen = _prob_matrix(doc["gen_prob"], "gen_prob", (n, m))
        return cls(n, m, gen, _completion_from_dict(doc["completion"], n, m))

    def to_dict(self) -> dict:
        return {
            "num_apps": self.num_apps,
            "num_workers": self.num_workers,
            "gen_prob": self.gen_prob.tolist(),
            "completion": self.completion.to_dict(),
        }

    def __eq__(self, other):
        return (
            isinstance(other, NetworkModel)
            and self.num_apps == other.num_apps
            and self.num_workers == other.num_workers
            and np.array_equal(self.gen_prob, other.gen_prob)
            and self.completion == other.completion
        )

    @property
    def block_size(self) -> int:
        """Uniforms consumed per frame under the stream layout."""
        nm = self.num_apps * self.num_workers
        return (3 if self.completion.draws_levels else 2) * nm + self.num_apps


def _completion_from_dict(raw: Any, n: int, m: int) -> CompletionModel:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ConfigError('completion: expected {"constant": matrix} or {"workload": {...}}')
    (tag, body), = raw.items()
    if tag == "constant":
        return ConstantCompletion(_prob_matrix(body, "completion.constant", (n, m)))
    if tag != "workload":
        raise ConfigError(f"completion: unknown variant {tag!r}")
    if not isinstance(body, dict) or "levels" not in body or "level_dist" not in body:
        raise ConfigError("completion.workload: expected keys 'levels' and 'level_dist'")
    levels = body["levels"]
    if not isinstance(levels, list) or not levels:
        raise ConfigError("completion.workload.levels: expected a non-empty list")
    labels, mats = [], []
    for k, level in enumerate(levels):
        where = f"completion.workload.levels[{k}]"
        if not isinstance(level, dict) or "probs" not in level:
            raise ConfigError(f"{where}: expected an object with 'probs'")
        labels.append(str(level.get("label", k)))
        mats.append(_prob_matrix(level["probs"], f"{where}.probs", (n, m)))
    dist_raw = body["level_dist"]
    n_levels = len(mats)
    dist = np.empty((n, m, n_levels))
    if not isinstance(dist_raw, list) or len(dist_raw) != n:
        raise ConfigError(f"completion.workload.level_dist: expected {n} rows")
    for i, row in enumerate(dist_raw):
        if not isinstance(row, list) or len(row) != m:
            raise ConfigError(f"completion.workload.level_dist[{i}]: expected {m} columns")
        for j, cat in enumerate(row):
            where = f"completion.workload.level_dist[{i}][{j}]"
            if not isinstance(cat, list) or len(cat) != n_levels:
                raise ConfigError(f"{where}: expected {n_levels} level probabilities")
            for k, p in enumerate(cat):
                if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{where}[{k}] = {p!r}: probability must be in [0, 1]")
            if abs(sum(cat) - 1.0) > 1e-9:
                raise ConfigError(f"{where}: level probabilities sum to {sum(cat)!r}, not 1")
            dist[i, j] = cat
    return WorkloadCompletion(tuple(labels), np.stack(mats), dist)


def load_model(path: str | Path) -> NetworkModel:
    return NetworkModel.from_dict(load_json(path))


def load_json(path: str | Path) -> Any:
    """Read a JSON document, reporting parse errors as ``path:line:col: msg``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


@dataclass(frozen=True)
class JobVector:
    app_index: int
    tasks: int  # bit j set iff the job has a task for worker j

    @property
    def cardinality(self) -> int:
        return popcount(self.tasks)

    @property
    def empty(self) -> bool:
        return self.tasks == 0


@dataclass(frozen=True, eq=False)
class FrameState:
    frame_index: int
    jobs: tuple[JobVector, ...]
    workload_draw: np.ndarray | None = None

    @property
    def masks(self) -> list[int]:
        return [job.tasks for job in self.jobs]

    def completion_probs(self, model: NetworkModel) -> np.ndarray:
        """Per-(app, worker) success probability in effect for this frame."""
        return model.completion.effective_probs(self.workload_draw)


def frame_from_masks(masks: Sequence[int], t: int = 1, workload_draw=None) -> FrameState:
    return FrameState(t, tuple(JobVector(i, int(mk)) for i, mk in enumerate(masks)), workload_draw)


def _bits_to_masks(bits: np.ndarray) -> list[int]:
    weights = [1 << j for j in range(bits.shape[1])]
    return [sum(w for w, b in zip(weights, row) if b) for row in bits]


def generate_frame(model: NetworkModel, t: int, rng: np.random.Generator) -> FrameState:
    """Draw every application's job for frame ``t`` (plus workload levels)."""
    n, m = model.num_apps, model.num_workers
    bits = rng.random((n, m)) < model.gen_prob
    draw = None
    if model.completion.draws_levels:
        draw = model.completion.draw_levels(rng.random((n, m)))
    return frame_from_masks(_bits_to_masks(bits), t, draw)


def check_decision(frame: FrameState, scheduled) -> int:
    """Return the union of scheduled workers, or raise ``MalformedDecision``."""
    used = 0
    for i in sorted(scheduled):
        if not 0 <= i < len(frame.jobs):
            raise MalformedDecision(f"app index {i} out of range")
        mask = frame.jobs[i].tasks
        if mask == 0:
            raise MalformedDecision(f"app {i} scheduled with an empty job")
        if used & mask:
            raise MalformedDecision(
                f"app {i} interferes on workers {mask_to_workers(used & mask)}"
            )
        used |= mask
    return used


def sample_task_completions(
    model: NetworkModel, frame: FrameState, decision, rng: np.random.Generator
) -> list[bool]:
    """Per-app completion indicators for one frame.

    All ``N*M`` completion uniforms are consumed whatever the decision, so the
    stream position after this call does not depend on the policy.
    """
    scheduled = decision.scheduled if hasattr(decision, "scheduled") else decision
    check_decision(frame, scheduled)
    u = rng.random((model.num_apps, model.num_workers))
    ok = u < frame.completion_probs(model)
    done = [False] * model.num_apps
    for i in scheduled:
        mask = frame.jobs[i].tasks
        done[i] = all(ok[i, j] for j in mask_to_workers(mask))
    return done
