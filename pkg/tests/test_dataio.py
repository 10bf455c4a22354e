import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from motionsphere.dataio import (
    DatasetManifest,
    downsample_fps,
    encode_dataset,
    fnv1a_64,
    load_motion_csv,
    make_dataset,
    save_motion_csv,
    slice_nonoverlapping,
    synth_params,
    synthetic_motions,
)
from motionsphere.errors import DimensionError, ParseError
from motionsphere.metrics import bone_length_drift, mpjs
from motionsphere.skeleton import chain5_topology
from motionsphere.srvf import PoseSequence, ScaledSrvf, srvf_decode


def test_fnv1a_known_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_csv_small_file(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(
        "# fps=50\njoint_0_x,joint_0_y,joint_0_z,joint_1_x,joint_1_y,joint_1_z\n"
        "1,2,3,4,5,6\n7,8,9,10,11,12\n13,14,15,16,17,18\n"
    )
    seq = load_motion_csv(path)
    assert seq.frames.shape == (3, 2, 3) and seq.fps == 50
    assert seq.frames[2, 1, 2] == 18


def test_csv_roundtrip_bitwise(tmp_path, rng):
    seq = PoseSequence(rng.standard_normal((7, 5, 3)) * 1e3, 25)
    path = tmp_path / "r.csv"
    save_motion_csv(seq, path)
    back = load_motion_csv(path)
    assert back.frames.tobytes() == seq.frames.tobytes()
    assert back.fps == 25


@pytest.mark.parametrize(
    "text,needle,line",
    [
        ("joint_0_x,joint_0_y,joint_0_z\n1,2,3\n", "fps", None),
        ("# fps=25\njoint_0_x,joint_0_y,joint_0_q\n1,2,3\n", "expected 'joint_0_z'", 2),
        ("# fps=25\njoint_0_x,joint_0_y,joint_0_z\n1,2,3\n1,2\n", "row has 2 values", 4),
        ("# fps=25\njoint_0_x,joint_0_y,joint_0_z\n1,2,abc\n", "non-numeric", 3),
        ("# fps=fast\njoint_0_x,joint_0_y,joint_0_z\n1,2,3\n", "bad fps", 1),
    ],
)
def test_csv_parse_errors(tmp_path, text, needle, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_motion_csv(path)
    assert needle in str(info.value)
    assert info.value.line == line


def test_downsample(rng):
    seq = PoseSequence(rng.standard_normal((10, 2, 3)), 50)
    assert np.array_equal(downsample_fps(seq, 1).frames, seq.frames)
    half = downsample_fps(seq, 2)
    assert half.fps == 25
    assert np.array_equal(half.frames, seq.frames[[0, 2, 4, 6, 8]])


def test_downsample_doubles_per_frame_speed():
    v = np.array([2.0, 0.0, 1.0])
    seq = PoseSequence(np.arange(20)[:, None, None] * v + np.zeros((1, 3, 3)), 50)
    np.testing.assert_allclose(mpjs([downsample_fps(seq, 2)]), 2 * mpjs([seq])[:9], rtol=1e-12)


def test_slicing(rng):
    seq = PoseSequence(rng.standard_normal((150, 2, 3)), 25)
    parts = slice_nonoverlapping(seq, 75)
    assert len(parts) == 2
    assert np.array_equal(parts[1].frames[0], seq.frames[75])
    assert slice_nonoverlapping(PoseSequence(seq.frames[:74], 25), 75) == []
    odd = PoseSequence(seq.frames[:100], 25)
    cat = np.concatenate([p.frames for p in slice_nonoverlapping(odd, 30)])
    assert np.array_equal(cat, odd.frames[:90])


def _named(kind, count, frames, seed, prefix):
    return [(f"{prefix}_{i:03d}", s) for i, s in enumerate(synthetic_motions(kind, count, frames, seed))]


def test_make_dataset_shapes_and_split():
    items = _named("pendulum_walk", 6, 50, 1, "train") + _named("pendulum_walk", 2, 50, 2, "test")
    train, test, man = make_dataset(items, prior_len=10, future_len=10, split_rule="test_*")
    assert len(train) == 12 and len(test) == 4
    assert train.prior_len == 10 and train.future_len == 10
    assert all(p.frames[:, 0].max() == 0 for p, _ in train.samples)
    assert man.files == sorted(n for n, _ in items)
    assert man.splits["test_000"] == "test"
    assert train.sources[:2] == [("train_000", 0), ("train_000", 20)]
    _, _, man25 = make_dataset(items, prior_len=25, future_len=25, split_rule="test_*")
    assert man25.prior_len == 25 and man25.future_len == 25


def test_make_dataset_pairs_are_contiguous():
    items = _named("figure8", 3, 60, 4, "a")
    train, _, _ = make_dataset(items, prior_len=8, future_len=12)
    raw = dict(items)
    rec = train.normalization
    for (name, start), (prior, future) in zip(train.sources, train.samples):
        window = np.concatenate([prior.frames, future.frames])
        src = raw[name].frames[start : start + 20]
        expected = (src - rec.mean) / rec.norm
        expected = expected - expected[:, :1]
        np.testing.assert_allclose(window, expected, atol=1e-12)


def test_manifest_deterministic_and_stats_train_only():
    tr = _named("pendulum_walk", 4, 40, 1, "train")
    a = make_dataset(tr + _named("two_mode", 2, 40, 2, "test"), split_rule="test_*")[2]
    b = make_dataset(tr + _named("two_mode", 2, 40, 2, "test"), split_rule="test_*")[2]
    c = make_dataset(tr + _named("figure8", 2, 40, 9, "test"), split_rule="test_*")[2]
    assert a.to_text() == b.to_text()
    assert a.content_hash != c.content_hash
    assert a.norm_mean == c.norm_mean and a.norm_value == c.norm_value
    assert DatasetManifest.from_text(a.to_text()) == a


def test_make_dataset_from_files(tmp_path):
    for i, s in enumerate(synthetic_motions("pendulum_walk", 3, 40, 5)):
        save_motion_csv(s, tmp_path / f"s{i}.csv")
    files = sorted(tmp_path.glob("*.csv"))
    _, _, m1 = make_dataset(files)
    _, _, m2 = make_dataset(list(reversed(files)))
    assert m1 == m2
    h = 0xCBF29CE484222325
    for f in files:
        h = fnv1a_64(f.read_bytes(), h)
    assert m1.content_hash == f"{h:016x}"


def test_make_dataset_errors():
    a = ("a", PoseSequence(np.random.default_rng(0).standard_normal((30, 5, 3)), 25))
    b = ("b", PoseSequence(np.random.default_rng(1).standard_normal((30, 4, 3)), 25))
    with pytest.raises(DimensionError):
        make_dataset([a, b])
    with pytest.raises(ValueError):
        make_dataset([("a", PoseSequence(a[1].frames[:5], 25))])


def test_encoded_future_starts_at_seam():
    train, _, _ = make_dataset(_named("pendulum_walk", 2, 40, 1, "x"))
    enc = encode_dataset(train)
    assert enc.grid_size == 11 and enc.prior_points.shape == enc.future_points.shape
    for i, (prior, future) in enumerate(train.samples):
        curve = srvf_decode(ScaledSrvf(enc.future_points[i], enc.future_scales[i], enc.anchors[i]))
        assert np.array_equal(curve[0], prior.frames[-1].reshape(-1))
        np.testing.assert_allclose(curve[1:].reshape(future.frames.shape), future.frames, atol=0.05)


def test_encode_cache_roundtrip(tmp_path):
    train, _, _ = make_dataset(_named("figure8", 2, 40, 3, "x"))
    a = encode_dataset(train, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    b = encode_dataset(train, cache_dir=tmp_path)
    for k in a.__dict__:
        assert np.array_equal(getattr(a, k), getattr(b, k))


@pytest.mark.parametrize("kind", ["pendulum_walk", "figure8", "two_mode"])
def test_synthetic_rigid_and_deterministic(kind):
    topo = chain5_topology()
    a = synthetic_motions(kind, 5, 60, seed=11)
    b = synthetic_motions(kind, 5, 60, seed=11)
    for x, y in zip(a, b):
        assert x.frames.tobytes() == y.frames.tobytes()
        assert bone_length_drift(x, topo) < 1e-9
    # Smooth: second differences stay small relative to first differences.
    f = a[0].frames
    assert np.abs(np.diff(f, 2, axis=0)).max() < 0.5 * np.abs(np.diff(f, axis=0)).max()


def test_synthetic_jitter_range():
    ps = synth_params("pendulum_walk", 200, 50, seed=0)
    freqs = np.array([p.frequency for p in ps])
    assert freqs.min() >= 0.9 and freqs.max() <= 1.1


def test_pendulum_speed_peaks_match_analytic():
    fps = 25.0
    seq = synthetic_motions("pendulum_walk", 1, 100, seed=7, fps=fps)[0]
    p = synth_params("pendulum_walk", 1, 100, seed=7, fps=fps)[0]
    speed = mpjs([seq])
    # All joints move with the angular rate |theta'| = A w |cos(w t + phase)|.
    t_mid = (np.arange(99) + 0.5) / fps
    w = 2 * np.pi * p.frequency
    rate = np.abs(p.amplitude * w * np.cos(w * t_mid + p.phase))
    corr = np.corrcoef(speed, rate)[0, 1]
    assert corr > 0.99
    # Peaks recur every half period and sit where the analytic rate peaks.
    half = fps / (2 * p.frequency)
    peaks = [i for i in range(1, 98) if speed[i] >= speed[i - 1] and speed[i] >= speed[i + 1]]
    ana = [i for i in range(1, 98) if rate[i] >= rate[i - 1] and rate[i] >= rate[i + 1]]
    assert len(peaks) == len(ana) >= 3
    assert max(abs(a - b) for a, b in zip(peaks, ana)) <= 1
    assert np.all(np.abs(np.diff(peaks) - half) <= 1.5)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    values=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=6, max_size=60),
    fps=st.floats(1.0, 240.0),
)
def test_csv_roundtrip_property(tmp_path, values, fps):
    # Any finite doubles survive the text roundtrip bit for bit.
    usable = len(values) // 3 * 3
    seq = PoseSequence(np.array(values[:usable]).reshape(-1, 1, 3), fps)
    path = tmp_path / "p.csv"
    save_motion_csv(seq, path)
    back = load_motion_csv(path)
    assert back.frames.tobytes() == seq.frames.tobytes() and back.fps == fps
