"""Skeleton topology, pose-space distances and losses, and pose normalization."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, DimensionError, ParseError
from .srvf import PoseSequence


@dataclass(frozen=True)
class SkeletonTopology:
    joint_count: int
    bones: tuple
    root_index: int = 0
    joint_names: tuple = None

    def __post_init__(self):
        bones = tuple((int(a), int(b)) for a, b in self.bones)
        object.__setattr__(self, "bones", bones)
        k = self.joint_count
        if k < 1:
            raise ValueError("joint_count must be positive")
        if not bones:
            raise ValueError("a topology needs at least one bone")
        if not 0 <= self.root_index < k:
            raise ValueError(f"root_index {self.root_index} out of range")
        for a, b in bones:
            if not (0 <= a < k and 0 <= b < k):
                raise ValueError(f"bone ({a}, {b}) indexes outside [0, {k})")
            if a == b:
                raise ValueError(f"bone ({a}, {b}) is a self-loop")
        # Acyclic and connected over the joints the bones touch.
        used = {j for bone in bones for j in bone}
        parent = {j: j for j in used}

        def find(j):
            while parent[j] != j:
                parent[j] = parent[parent[j]]
                j = parent[j]
            return j

        for a, b in bones:
            ra, rb = find(a), find(b)
            if ra == rb:
                raise ValueError("bone list contains a cycle")
            parent[ra] = rb
        if len({find(j) for j in used}) != 1:
            raise ValueError("bone list is not connected")
        if self.joint_names is not None:
            names = tuple(self.joint_names)
            if len(names) != k:
                raise ValueError("joint_names must have one label per joint")
            object.__setattr__(self, "joint_names", names)

    @property
    def num_bones(self):
        return len(self.bones)

    def incidence(self):
        """``(B, k)`` matrix mapping joint positions to bone vectors (child - parent)."""
        d = np.zeros((self.num_bones, self.joint_count))
        for i, (a, b) in enumerate(self.bones):
            d[i, a] = -1.0
            d[i, b] = 1.0
        return d


def chain5_topology():
    """Five-joint skeleton used by the synthetic motions.

    0 pelvis (root), 1 neck, 2 hand, 3 knee, 4 foot.
    """
    return SkeletonTopology(
        5,
        ((0, 1), (1, 2), (0, 3), (3, 4)),
        root_index=0,
        joint_names=("pelvis", "neck", "hand", "knee", "foot"),
    )


def h36m17_topology():
    """17-joint Human3.6M-style skeleton (hips as root).

    Joint order follows the common 17-joint subset: hips, right leg (3),
    left leg (3), spine, thorax, neck, head, left arm (3), right arm (3).
    The bone pairs are a convention; the source joint selection is not
    published with explicit indices.
    """
    names = (
        "hips", "rhip", "rknee", "rankle", "lhip", "lknee", "lankle",
        "spine", "thorax", "neck", "head",
        "lshoulder", "lelbow", "lwrist", "rshoulder", "relbow", "rwrist",
    )
    bones = (
        (0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6),
        (0, 7), (7, 8), (8, 9), (9, 10),
        (8, 11), (11, 12), (12, 13), (8, 14), (14, 15), (15, 16),
    )
    return SkeletonTopology(17, bones, root_index=0, joint_names=names)


def load_topology(path):
    """Read a topology file: ``k``, ``root_index``, then ``parent child [name]`` lines."""
    path = Path(path)
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if len(rows) < 3:
        raise ParseError("topology needs k, root_index and at least one bone", path)
    try:
        k = int(rows[0][1][0])
        root = int(rows[1][1][0])
    except (ValueError, IndexError):
        raise ParseError("expected integer joint count and root index", path, rows[0][0])
    bones = []
    for lineno, parts in rows[2:]:
        if len(parts) < 2:
            raise ParseError("bone line needs 'parent child'", path, lineno)
        try:
            bones.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(f"non-integer bone indices {parts[:2]}", path, lineno)
    try:
        return SkeletonTopology(k, tuple(bones), root_index=root)
    except ValueError as exc:
        raise ParseError(str(exc), path)


def save_topology(topo, path):
    lines = [str(topo.joint_count), str(topo.root_index)]
    lines += [f"{a} {b}" for a, b in topo.bones]
    Path(path).write_text("\n".join(lines) + "\n")


def gram_matrix(pose):
    p = np.asarray(pose, dtype=float)
    return p @ p.T


def gram_distance(p1, p2):
    """Rotation-invariant squared distance between two ``(k, 3)`` joint configurations.

    Equals ``tr(G1) + tr(G2) - 2 * nuclear_norm(P2^T P1)``, i.e. the residual of
    the best orthogonal alignment of P2 onto P1.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise DimensionError(f"pose shapes differ: {p1.shape} vs {p2.shape}")
    sigma = np.linalg.svd(p2.T @ p1, compute_uv=False)
    val = np.sum(p1 * p1) + np.sum(p2 * p2) - 2.0 * np.sum(sigma)
    return float(max(val, 0.0))


def _frames_of(seqs):
    out = []
    for s in seqs:
        out.append(s.frames if isinstance(s, PoseSequence) else np.asarray(s, dtype=float))
    return out


def _check_matched(pred, truth):
    if len(pred) != len(truth):
        raise DimensionError(f"{len(pred)} predictions vs {len(truth)} ground truths")
    for a, b in zip(pred, truth):
        if a.shape != b.shape:
            raise DimensionError(f"sequence shapes differ: {a.shape} vs {b.shape}")


def skeleton_integrity_loss(pred, truth):
    """Mean Gram distance over all samples and frames."""
    pred, truth = _frames_of(pred), _frames_of(truth)
    _check_matched(pred, truth)
    vals = [gram_distance(a[t], b[t]) for a, b in zip(pred, truth) for t in range(a.shape[0])]
    return float(np.mean(vals))


def _bone_vectors(frames, topo):
    parent, child = np.array(topo.bones).T
    return frames[..., child, :] - frames[..., parent, :]


def bone_lengths(pose, topo):
    return np.linalg.norm(_bone_vectors(np.asarray(pose, dtype=float), topo), axis=-1)


def bone_length_loss(pred, truth, topo):
    """Mean absolute difference of bone lengths over samples, frames and bones."""
    pred, truth = _frames_of(pred), _frames_of(truth)
    _check_matched(pred, truth)
    diffs = [np.abs(bone_lengths(a, topo) - bone_lengths(b, topo)) for a, b in zip(pred, truth)]
    return float(np.mean(np.stack(diffs)))


@dataclass(frozen=True)
class NormalizationRecord:
    """Mean pose and norm removed by :func:`normalize_pose_sequence`."""

    mean: np.ndarray
    norm: float
    root_index: int = 0

    def invert(self, frames):
        """Undo the mean/norm steps; the root translation is not recoverable."""
        return np.asarray(frames, dtype=float) * self.norm + self.mean


def fit_normalization(sequences, topo):
    """Mean pose and RMS Frobenius deviation over every frame of ``sequences``."""
    frames = np.concatenate(_frames_of(sequences), axis=0)
    mean = frames.mean(axis=0)
    norm = float(np.sqrt(np.mean(np.sum((frames - mean) ** 2, axis=(1, 2)))))
    if norm <= 0 or not np.isfinite(norm):
        raise DegenerateInputError("pose data has zero spread; cannot normalize")
    return NormalizationRecord(mean, norm, topo.root_index)


def apply_normalization(seq, record):
    frames = (seq.frames - record.mean) / record.norm
    frames = frames - frames[:, record.root_index : record.root_index + 1, :]
    return PoseSequence(frames, seq.fps)


def normalize_pose_sequence(seq, topo, record=None):
    """Subtract the mean pose, divide by the norm, then center on the root joint.

    Without a ``record`` the statistics are fitted on ``seq`` itself.
    Returns ``(normalized_sequence, record)``.
    """
    if record is None:
        record = fit_normalization([seq], topo)
    if record.norm <= 0:
        raise DegenerateInputError("normalization norm must be positive")
    return apply_normalization(seq, record), record
