import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_packing
from rtsched.errors import InvalidInstance
from rtsched.model import NetworkModel, generate_frame, make_rng
from rtsched.scheduler import Weight
from rtsched.verify import (
    RatioReport,
    SetPackingInstance,
    audit_ratio,
    frame_ratio,
    packing_via_scheduler,
    reduce_set_packing,
)


def test_reduction_builds_matching_network():
    inst = SetPackingInstance.of(3, [[1, 2], [2, 3], [3]])
    model, frame, req = reduce_set_packing(inst)
    assert (model.num_apps, model.num_workers) == (3, 3)
    assert frame.masks == [0b011, 0b110, 0b100]
    assert np.all(model.completion.probs == 1.0)
    assert len(set(req.r)) == 1 and req.r[0] > 0
    # sampling the reduced model reproduces the instance
    assert generate_frame(model, 1, make_rng(0)).masks == frame.masks


@pytest.mark.parametrize("sets, size", [
    ([[1, 2], [2, 3], [3]], 2),
    ([[1]], 1),
    ([[k] for k in range(1, 7)], 6),
])
def test_reduced_packing_sizes(sets, size):
    inst = SetPackingInstance.of(max(max(s) for s in sets), sets)
    assert brute_force_packing(sets) == size
    assert len(packing_via_scheduler(inst)) == size


def test_packing_from_scheduler_is_disjoint():
    inst = SetPackingInstance.of(3, [[1, 2], [2, 3], [3]])
    assert packing_via_scheduler(inst) == [0, 2]


@pytest.mark.parametrize("text", ["", "3\n", "3 2\n1 2\n", "2 1\n\n", "2 1\n1 x\n", "2 1\n3\n"])
def test_invalid_instances(text):
    with pytest.raises(InvalidInstance):
        SetPackingInstance.parse(text)


def test_empty_set_rejected():
    with pytest.raises(InvalidInstance):
        SetPackingInstance.of(2, [[1], []])


def test_instance_text_round_trip():
    inst = SetPackingInstance.of(4, [[1, 4], [2], [2, 3]])
    assert SetPackingInstance.parse(inst.to_text()) == inst


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10).flatmap(lambda m: st.tuples(
    st.just(m),
    st.lists(st.sets(st.integers(1, m), min_size=1), min_size=1, max_size=8),
)))
def test_reduction_matches_brute_force(data):
    m, sets = data
    assert len(packing_via_scheduler(SetPackingInstance.of(m, sets))) == brute_force_packing(sets)


def test_single_job_ratio_is_one():
    assert frame_ratio([Weight(0, 2.5, 0b11)], 2) == (2.5, 2.5)


def test_empty_frames_are_skipped():
    report = audit_ratio(NetworkModel.uniform(3, 3, 0.0, 0.9), 50, 1)
    assert report.frames_skipped == 50 and report.frames_audited == 0


def test_star_instance_by_hand():
    star = Weight(0, 1.99, 0b1111)
    leaves = [Weight(k, 1.0, 1 << (k - 1)) for k in range(1, 5)]
    assert frame_ratio([star, *leaves], 4) == (4.0, 4.0)
    leaves = [Weight(k, 0.5, 1 << (k - 1)) for k in range(1, 5)]
    opt, apx = frame_ratio([star, *leaves], 4)
    assert (opt, apx) == (2.0, 1.99)
    assert opt / apx <= math.sqrt(4)


@pytest.mark.parametrize("dist", ["uniform", "adversarial"])
@pytest.mark.parametrize("m", [1, 4, 9])
def test_audit_has_no_violations(m, dist):
    report = audit_ratio(NetworkModel.uniform(8, m, 0.3, 0.9), 500, (m, 1), dist)
    assert report.violations == 0
    assert report.max_ratio <= report.bound + 1e-9


def test_disjoint_jobs_give_ratio_one():
    # identity generation: each app owns its own worker
    model = NetworkModel.constant(np.eye(5) * 0.7, np.full((5, 5), 0.9))
    report = audit_ratio(model, 300, 2)
    assert report.frames_audited > 0 and report.max_ratio == 1.0


def test_custom_queue_distribution():
    report = audit_ratio(NetworkModel.uniform(4, 4, 0.5, 0.9), 100, 3, lambda n, rng: [1.0] * n)
    assert report.violations == 0


def test_report_json_round_trip():
    report = audit_ratio(NetworkModel.uniform(4, 4, 0.5, 0.9), 100, 3)
    assert RatioReport.from_dict(json.loads(report.to_json())) == report
