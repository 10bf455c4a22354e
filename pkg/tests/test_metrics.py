import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionsphere.errors import DimensionError
from motionsphere.metrics import (
    HORIZONS_MS,
    bone_length_drift,
    build_report,
    horizon_frames,
    mpjpe,
    mpjs,
    resampled_mpjpe,
    zero_velocity_baseline,
)
from motionsphere.skeleton import chain5_topology
from motionsphere.srvf import PoseSequence


def test_mpjpe_examples(rng):
    truth = rng.standard_normal((10, 5, 3))
    assert mpjpe(truth, truth, 10) == 0.0
    delta = np.array([3.0, -4.0, 12.0])
    assert mpjpe(truth + delta, truth, 7) == pytest.approx(13.0, rel=1e-12)


def test_mpjpe_window_against_loop_oracle(rng):
    pred, truth = rng.standard_normal((2, 10, 5, 3))
    for d in (1, 4, 10):
        acc = [np.sum((pred[t, j] - truth[t, j]) ** 2) for t in range(d) for j in range(5)]
        assert mpjpe(pred, truth, d) == pytest.approx(np.sqrt(np.mean(acc)), rel=1e-12)
    single = np.sqrt(np.mean(np.sum((pred[3] - truth[3]) ** 2, axis=-1)))
    assert mpjpe(pred, truth, 4, window=False) == pytest.approx(single, rel=1e-12)


def test_mpjpe_translation_invariant(rng):
    pred, truth = rng.standard_normal((2, 6, 5, 3))
    shift = rng.standard_normal(3) * 50
    assert mpjpe(pred + shift, truth + shift, 6) == pytest.approx(mpjpe(pred, truth, 6), rel=1e-10)


def test_mpjpe_errors(rng):
    with pytest.raises(DimensionError):
        mpjpe(np.zeros((4, 2, 3)), np.zeros((5, 2, 3)), 2)
    with pytest.raises(DimensionError):
        mpjpe(np.zeros((4, 2, 3)), np.zeros((4, 2, 3)), 5)


def test_mpjs_examples(rng):
    static = np.repeat(rng.standard_normal((1, 5, 3)), 6, axis=0)
    assert np.array_equal(mpjs([static, static]), np.zeros(5))
    v = np.array([1.0, 2.0, 2.0])
    moving = rng.standard_normal((1, 5, 3)) + np.arange(6)[:, None, None] * v
    np.testing.assert_allclose(mpjs([moving]), np.full(5, 3.0), rtol=1e-12)


def test_mpjs_translation_invariant(rng):
    seqs = [rng.standard_normal((5, 4, 3)) for _ in range(3)]
    moved = [s + rng.standard_normal(3) for s in seqs]
    np.testing.assert_allclose(mpjs(moved), mpjs(seqs), rtol=1e-9)


def test_mpjs_errors():
    with pytest.raises(DimensionError):
        mpjs([np.zeros((1, 2, 3))])
    with pytest.raises(DimensionError):
        mpjs([np.zeros((3, 2, 3)), np.zeros((4, 2, 3))])


def test_zero_velocity_baseline(rng):
    prior = PoseSequence(rng.standard_normal((8, 5, 3)), 25)
    base = zero_velocity_baseline(prior, 10)
    assert base.frames.shape == (10, 5, 3)
    assert np.all(mpjs([base]) == 0)
    static_truth = np.repeat(prior.frames[-1:], 10, axis=0)
    assert mpjpe(base, static_truth, 10) == 0.0


def test_baseline_mpjpe_matches_displacement_oracle(rng):
    prior = rng.standard_normal((5, 4, 3))
    truth = rng.standard_normal((9, 4, 3))
    base = zero_velocity_baseline(PoseSequence(prior, 25), 9)
    total, count = 0.0, 0
    for t in range(9):
        for j in range(4):
            total += sum((truth[t, j, c] - prior[-1, j, c]) ** 2 for c in range(3))
            count += 1
    oracle = np.sqrt(total / count)
    assert abs(mpjpe(base, truth, 9) - oracle) / oracle < 1e-12


def test_bone_length_drift(rng):
    topo = chain5_topology()
    pose = rng.standard_normal((5, 3))
    rigid = np.stack([pose + t * np.array([1.0, 0.5, 0.0]) for t in range(10)])
    assert bone_length_drift(rigid, topo) < 1e-12
    scales = np.linspace(1.0, 1.1, 10)
    ramp = scales[:, None, None] * pose
    assert bone_length_drift(ramp, topo) == pytest.approx(0.1, abs=1e-9)


def test_horizon_frames_at_25fps():
    assert [horizon_frames(ms, 25) for ms in HORIZONS_MS] == [2, 4, 8, 10, 25]


def test_resampled_protocol_is_seeded(rng):
    errs = rng.uniform(10, 20, 50)
    a = resampled_mpjpe(errs, seed=3)
    assert a == resampled_mpjpe(errs, seed=3)
    assert 10 < a[0] < 20 and a[1] > 0
    assert resampled_mpjpe(np.full(12, 4.0)) == (4.0, 0.0)


def test_build_report_keys_and_values(rng):
    priors = [rng.standard_normal((10, 5, 3)) for _ in range(4)]
    truths = [np.repeat(p[-1:], 10, axis=0) for p in priors]
    rep = build_report(truths, truths, priors, 25)
    assert sorted(rep.mpjpe_at) == [80, 160, 320, 400]
    assert all(v == 0 for v in rep.mpjpe_at.values())
    assert all(v == 0 for v in rep.baseline_mpjpe_at.values())
    d = json.loads(rep.to_text())
    assert d["mpjpe_ms_400"] == 0 and d["mpjpe_ms_1000"] is None
    assert d["sample_count"] == 4 and len(d["mpjs_curve"]) == 10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), frames=st.integers(2, 12), joints=st.integers(1, 6))
def test_metric_invariants(seed, frames, joints):
    r = np.random.default_rng(seed)
    pred, truth = r.standard_normal((2, frames, joints, 3)) * 100
    d = int(r.integers(1, frames + 1))
    err = mpjpe(pred, truth, d)
    assert err >= 0 and err == pytest.approx(mpjpe(truth, pred, d), rel=1e-12)
    assert mpjpe(truth, truth, d) == 0
    shift = r.standard_normal(3) * 1e3
    assert mpjpe(pred + shift, truth + shift, d) == pytest.approx(err, rel=1e-9)
    speeds = mpjs([pred])
    assert speeds.shape == (frames - 1,) and np.all(speeds >= 0)
