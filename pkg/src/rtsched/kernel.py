"""Compiled simulation loop for sweeps.

Mirrors :func:`rtsched.engine.simulate` operation for operation (same draw
layout, same summation order, same tie-breaks) so that both produce the same
counts and queues bit for bit. The exact policy enumerates every subset of
applications here, so this path is meant for the small ``N`` of region sweeps.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .model import NetworkModel, WorkloadCompletion, make_rng

POLICY_CODES = {"exact": 0, "greedy": 1, "random": 2, "priority": 3}
MAX_EXACT_APPS = 12


@numba.njit(cache=True)
def _lex_smaller(a, b):
    # sorted index lists of bitsets a != b; the first index where they differ
    # belongs to exactly one of them
    d = a ^ b
    low = d & (-d)
    if a & low:
        return (b & ~((low << 1) - 1)) != 0
    return (a & ~((low << 1) - 1)) == 0


@numba.njit(cache=True)
def _insertion_order(keys, descending):
    n = keys.shape[0]
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        cur = order[i]
        k = i
        while k > 0:
            prev = order[k - 1]
            if descending:
                moves = keys[prev] < keys[cur]
            else:
                moves = keys[prev] > keys[cur]
            if not moves:
                break
            order[k] = prev
            k -= 1
        order[k] = cur
    return order


@numba.njit(cache=True)
def _run(u, gen, probs, cdf, level_probs, workload, r, policy, trace_every):
    T = u.shape[0]
    n, m = gen.shape
    nm = n * m
    n_levels = level_probs.shape[0]
    completions = np.zeros(n, dtype=np.int64)
    q = np.zeros(n)
    n_trace = T // trace_every if trace_every > 0 else 0
    trace = np.zeros((n_trace, n))
    bits = np.zeros((n, m), dtype=np.bool_)
    peff = probs.copy()
    w = np.zeros(n)
    card = np.zeros(n, dtype=np.int64)
    masks = np.zeros(n, dtype=np.int64)
    sched = np.zeros(n, dtype=np.bool_)
    n_sub = 1 << n if policy == 0 else 1
    val = np.zeros(n_sub)
    uni = np.zeros(n_sub, dtype=np.int64)
    valid = np.zeros(n_sub, dtype=np.bool_)
    all_workers = (1 << m) - 1 if m < 63 else -1

    for t in range(T):
        row = u[t]
        off = 0
        for i in range(n):
            masks[i] = 0
            card[i] = 0
            for j in range(m):
                b = row[off + i * m + j] < gen[i, j]
                bits[i, j] = b
                if b:
                    masks[i] |= 1 << j
                    card[i] += 1
        off += nm
        if workload:
            for i in range(n):
                for j in range(m):
                    x = row[off + i * m + j]
                    lv = 0
                    for k in range(n_levels):
                        if x >= cdf[i, j, k]:
                            lv += 1
                    if lv > n_levels - 1:
                        lv = n_levels - 1
                    peff[i, j] = level_probs[lv, i, j]
            off += nm
        order_u = row[off:off + n]
        off += n

        for i in range(n):
            q[i] = q[i] + r[i]
        for i in range(n):
            if card[i] == 0:
                w[i] = 0.0
            else:
                s = 1.0
                for j in range(m):
                    if bits[i, j]:
                        s *= peff[i, j]
                w[i] = q[i] * s

        for i in range(n):
            sched[i] = False
        if policy == 0:
            valid[0] = True
            val[0] = 0.0
            uni[0] = 0
            best = 0
            best_val = 0.0
            for s in range(1, n_sub):
                h = 0
                while (s >> (h + 1)) != 0:
                    h += 1
                prev = s ^ (1 << h)
                ok = valid[prev] and card[h] > 0 and w[h] > 0.0 and (uni[prev] & masks[h]) == 0
                valid[s] = ok
                if not ok:
                    continue
                uni[s] = uni[prev] | masks[h]
                val[s] = val[prev] + w[h]
                if val[s] > best_val or (val[s] == best_val and _lex_smaller(s, best)):
                    best = s
                    best_val = val[s]
            for i in range(n):
                sched[i] = (best >> i) & 1 == 1
        else:
            if policy == 1:
                keys = np.zeros(n)
                for i in range(n):
                    if card[i] > 0:
                        keys[i] = w[i] / math.sqrt(card[i])
                order = _insertion_order(keys, True)
            elif policy == 2:
                order = _insertion_order(order_u, False)
            else:
                order = np.arange(n)
            avail = all_workers
            for k in range(n):
                i = order[k]
                if masks[i] != 0 and (masks[i] & ~avail) == 0:
                    sched[i] = True
                    avail &= ~masks[i]

        for i in range(n):
            if not sched[i]:
                continue
            done = True
            for j in range(m):
                if bits[i, j] and not (row[off + i * m + j] < peff[i, j]):
                    done = False
            if done:
                completions[i] += 1
                q[i] = max(q[i] - 1.0, 0.0)
        if trace_every > 0 and (t + 1) % trace_every == 0:
            trace[(t + 1) // trace_every - 1] = q
    return completions, q, trace


def _model_arrays(model: NetworkModel):
    comp = model.completion
    n, m = model.num_apps, model.num_workers
    if isinstance(comp, WorkloadCompletion):
        return comp.level_probs[0].copy(), comp._cdf, comp.level_probs, True
    return np.asarray(comp.probs, dtype=float), np.zeros((n, m, 1)), np.zeros((1, n, m)), False


def supports(model: NetworkModel, policy) -> bool:
    if not isinstance(policy, str) or policy not in POLICY_CODES:
        return False
    if model.num_workers > 62:
        return False
    return policy != "exact" or model.num_apps <= MAX_EXACT_APPS


def run_one(model: NetworkModel, requirement, policy: str, frames: int, seed, trace_every: int = 0):
    """One run through the compiled loop: ``(completions, final_queue, trace)``."""
    if model.num_workers > 62:
        raise ValueError("compiled kernel supports at most 62 workers")
    code = POLICY_CODES[policy]
    if code == 0 and model.num_apps > MAX_EXACT_APPS:
        raise ValueError(f"compiled exact policy enumerates subsets; N <= {MAX_EXACT_APPS}")
    probs, cdf, level_probs, workload = _model_arrays(model)
    u = make_rng(seed).random((frames, model.block_size))
    r = np.asarray(getattr(requirement, "r", requirement), dtype=float)
    return _run(u, model.gen_prob, probs, cdf, level_probs, workload, r, code, trace_every)


def run_batch(model: NetworkModel, requirements, policy: str, frames: int, seeds):
    if len(requirements) != len(seeds):
        raise ValueError("one seed per requirement is needed")
    n = model.num_apps
    counts = np.zeros((len(seeds), n), dtype=np.int64)
    finals = np.zeros((len(seeds), n))
    for b, (req, seed) in enumerate(zip(requirements, seeds)):
        c, q, _ = run_one(model, req, policy, frames, seed)
        counts[b] = c
        finals[b] = q
    return counts, finals
