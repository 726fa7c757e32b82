"""Command-line front end.

Subcommands::

    rtsched simulate     --config exp.json [--policy exact] [--frames T] [--seed S] [--out metrics.json]
    rtsched sweep        --config exp.json [--mode grid|symmetric] [--out region.csv]
    rtsched verify-ratio [--config model.json] [--frames T] [--out report.json]
    rtsched reduce       instance.txt [--out model.json]

Configuration errors exit with status 2 and a one-line message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import region
from .engine import Requirement, simulate
from .errors import ConfigError, InvalidInstance
from .model import NetworkModel, load_json
from .scheduler import POLICIES
from .verify import audit_ratio, load_instance, packing_via_scheduler, reduce_set_packing

EXPERIMENT_KEYS = {
    "requirement", "policy", "frames", "seed", "replicates",
    "step", "resolution", "epsilon", "mode",
}
MODEL_KEYS = {"num_apps", "num_workers", "gen_prob", "completion"}


@dataclass
class ExperimentConfig:
    model: NetworkModel
    policy: str = "exact"
    frames: int = region.FRAMES
    seed: int = 0
    replicates: int = region.REPLICATES
    requirement: Requirement | None = None
    step: float = region.GRID_STEP
    resolution: float = region.RESOLUTION
    epsilon: float = region.EPSILON
    mode: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - EXPERIMENT_KEYS - MODEL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        model = NetworkModel.from_dict({k: doc[k] for k in MODEL_KEYS if k in doc})
        cfg = cls(model)
        for key in ("policy", "mode"):
            if key in doc:
                setattr(cfg, key, doc[key])
        for key in ("frames", "seed", "replicates"):
            if key in doc:
                value = doc[key]
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} = {value!r}: expected an integer")
                setattr(cfg, key, value)
        for key in ("step", "resolution", "epsilon"):
            if key in doc:
                value = doc[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key} = {value!r}: expected a number")
                setattr(cfg, key, float(value))
        if "requirement" in doc:
            cfg.requirement = _requirement(doc["requirement"], model.num_apps)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        doc = self.model.to_dict()
        doc.update(
            policy=self.policy, frames=self.frames, seed=self.seed, replicates=self.replicates,
            step=self.step, resolution=self.resolution, epsilon=self.epsilon,
        )
        if self.mode is not None:
            doc["mode"] = self.mode
        if self.requirement is not None:
            doc["requirement"] = list(self.requirement.r)
        return doc

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"policy = {self.policy!r}: choose from {', '.join(sorted(POLICIES))}")
        if self.frames < 1:
            raise ConfigError(f"frames = {self.frames}: must be >= 1")
        if self.replicates < 1:
            raise ConfigError(f"replicates = {self.replicates}: must be >= 1")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon = {self.epsilon}: must be >= 0")
        if self.mode not in (None, "grid", "symmetric"):
            raise ConfigError(f"mode = {self.mode!r}: expected 'grid' or 'symmetric'")


def _requirement(raw, n: int) -> Requirement:
    if isinstance(raw, str):
        try:
            raw = [float(x) for x in raw.split(",")]
        except ValueError:
            raise ConfigError(f"requirement {raw!r}: expected comma-separated numbers") from None
    if not isinstance(raw, list) or len(raw) != n:
        raise ConfigError(f"requirement: expected {n} entries")
    for i, x in enumerate(raw):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not 0.0 <= x <= 1.0:
            raise ConfigError(f"requirement[{i}] = {x!r}: must be a number in [0, 1]")
    return Requirement(tuple(raw))


def _anchored(path, exc: ConfigError) -> ConfigError:
    msg = str(exc)
    return ConfigError(msg if msg.startswith(str(path)) else f"{path}: {msg}")


def _load_config(args) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.from_dict(load_json(args.config))
    except ConfigError as exc:
        raise _anchored(args.config, exc) from None
    for flag in ("policy", "frames", "seed", "replicates", "step", "resolution", "epsilon", "mode"):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, flag, value)
    if getattr(args, "requirement", None) is not None:
        cfg.requirement = _requirement(args.requirement, cfg.model.num_apps)
    cfg.validate()
    return cfg


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    req = cfg.requirement or Requirement((0.0,) * cfg.model.num_apps)
    metrics = simulate(cfg.model, req, cfg.policy, cfg.frames, cfg.seed, record_decisions=args.trace)
    if args.trace:
        for t, scheduled in enumerate(metrics.decisions, start=1):
            print(f"frame {t}: scheduled apps {scheduled}", file=sys.stderr)
    if args.trace_csv:
        metrics.write_trace_csv(args.trace_csv)
    _write(metrics.to_json(), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    mode = cfg.mode or ("grid" if cfg.model.num_apps == 2 else "symmetric")
    if mode == "grid":
        est = region.sweep_grid_2d(
            cfg.model, cfg.policy, cfg.step, cfg.frames, cfg.replicates,
            base_seed=cfg.seed, epsilon=cfg.epsilon, jobs=args.jobs,
        )
    else:
        est = region.sweep_symmetric(
            cfg.model, cfg.policy, cfg.resolution, cfg.frames, cfg.replicates,
            base_seed=cfg.seed, epsilon=cfg.epsilon,
        )
    _write(est.to_csv(), args.out)
    if mode == "symmetric":
        boundary = json.dumps(est.boundary_dict(), indent=2, sort_keys=True) + "\n"
        target = args.boundary or (str(args.out) + ".boundary.json" if args.out else None)
        if target:
            Path(target).write_text(boundary)
        print(f"r* = {est.boundary:.4f} (largest fulfilled {est.largest_fulfilled:.4f})", file=sys.stderr)
    return 0


def cmd_verify_ratio(args) -> int:
    if args.config:
        try:
            models = [NetworkModel.from_dict(load_json(args.config))]
        except ConfigError as exc:
            raise _anchored(args.config, exc) from None
    else:
        models = [NetworkModel.uniform(12, m, 0.3, 0.9) for m in (1, 4, 9, 16)]
    frames = args.frames or 1000
    seed = args.seed or 0
    reports = []
    for k, model in enumerate(models):
        for dist in ("uniform", "adversarial"):
            rep = audit_ratio(model, frames, (seed, k, int(dist == "adversarial")), dist)
            doc = {"num_apps": model.num_apps, "num_workers": model.num_workers, "distribution": dist}
            doc.update(json.loads(rep.to_json()))
            reports.append(doc)
    total = sum(r["violations"] for r in reports)
    _write(json.dumps({"reports": reports, "violations": total}, indent=2, sort_keys=True) + "\n", args.out)
    return 0 if total == 0 else 1


def cmd_reduce(args) -> int:
    instance = load_instance(args.instance)
    model, _, _ = reduce_set_packing(instance)
    packing = packing_via_scheduler(instance)
    if args.out:
        Path(args.out).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"packing size {len(packing)}")
    for i in packing:
        print(f"set {i + 1}: {' '.join(str(e) for e in sorted(instance.sets[i]))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtsched", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON model/experiment config")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--frames", type=int, help="frames per run (T)")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("simulate", help="run one simulation and write metrics JSON")
    common(p)
    p.add_argument("--policy", choices=sorted(POLICIES))
    p.add_argument("--requirement", help="comma-separated r_i (overrides config)")
    p.add_argument("--trace", action="store_true", help="log every frame's decision")
    p.add_argument("--trace-csv", help="write the sampled queue trace as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="estimate the achievable requirement region")
    common(p)
    p.add_argument("--policy", choices=sorted(POLICIES))
    p.add_argument("--mode", choices=["grid", "symmetric"])
    p.add_argument("--replicates", type=int, help="seeds per point")
    p.add_argument("--step", type=float, help="grid spacing")
    p.add_argument("--resolution", type=float, help="bisection resolution")
    p.add_argument("--epsilon", type=float, help="fulfillment slack")
    p.add_argument("--boundary", help="where to write the symmetric boundary JSON")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-ratio", help="audit greedy against exact on random frames")
    common(p, config_required=False)
    p.set_defaults(func=cmd_verify_ratio)

    p = sub.add_parser("reduce", help="solve a set-packing instance through the scheduler")
    p.add_argument("instance", help="plain-text instance: 'm n' then one set per line")
    p.add_argument("--out", help="write the reduced model config JSON here")
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInstance) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
