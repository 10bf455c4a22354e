"""Checkpoint container: JSON header followed by a little-endian float64 block.

Layout::

    MSCKPT <format_version>\\n
    <header byte count>\\n
    <header: JSON, sorted keys>
    <parameter block: float64, little-endian>

The header lists every array stored in the block (name and shape) in order.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..skeleton import NormalizationRecord, SkeletonTopology
from .config import TrainConfig
from .networks import MLP

MAGIC = "MSCKPT"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    generator: MLP
    critic: MLP
    config: TrainConfig
    mu: np.ndarray
    normalization: NormalizationRecord
    topology: SkeletonTopology
    prior_len: int
    future_len: int
    fps: float
    scale_stats: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def grid_size(self):
        return self.mu.shape[0]

    @property
    def joint_count(self):
        return self.topology.joint_count

    def _arrays(self):
        arrays = [("mu", self.mu), ("norm_mean", self.normalization.mean)]
        arrays += [(f"gen_{i}", p) for i, p in enumerate(self.generator.params)]
        arrays += [(f"critic_{i}", p) for i, p in enumerate(self.critic.params)]
        return arrays

    def header(self):
        return {
            "format_version": self.format_version,
            "config": self.config.to_dict(),
            "shapes": {
                "prior_len": self.prior_len,
                "future_len": self.future_len,
                "grid_size": self.grid_size,
                "joint_count": self.joint_count,
                "fps": self.fps,
            },
            "topology": {
                "joint_count": self.topology.joint_count,
                "bones": [list(b) for b in self.topology.bones],
                "root_index": self.topology.root_index,
            },
            "normalization": {"norm": self.normalization.norm, "root_index": self.normalization.root_index},
            "scale_policy": self.config.scale_policy,
            "scale_stats": self.scale_stats,
            "networks": {
                "generator": {"activation": self.generator.activation, "slope": self.generator.slope},
                "critic": {"activation": self.critic.activation, "slope": self.critic.slope},
            },
            "arrays": [[name, list(a.shape)] for name, a in self._arrays()],
        }

    def to_bytes(self):
        head = json.dumps(self.header(), sort_keys=True).encode("utf-8")
        block = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in self._arrays())
        return f"{MAGIC} {self.format_version}\n{len(head)}\n".encode("ascii") + head + block

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data, path=None):
        try:
            line1_end = data.index(b"\n")
            line2_end = data.index(b"\n", line1_end + 1)
            magic, version = data[:line1_end].decode("ascii").split()
            head_len = int(data[line1_end + 1 : line2_end])
        except ValueError:
            raise ParseError("not a checkpoint file (bad preamble)", path, 1)
        if magic != MAGIC:
            raise ParseError(f"bad magic {magic!r}", path, 1)
        if int(version) != FORMAT_VERSION:
            raise ParseError(f"unsupported checkpoint format version {version}", path, 1)
        start = line2_end + 1
        try:
            head = json.loads(data[start : start + head_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"corrupt header: {exc}", path, 3)
        offset = start + head_len
        arrays = {}
        for name, shape in head["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            nbytes = 8 * count
            chunk = data[offset : offset + nbytes]
            if len(chunk) != nbytes:
                raise ParseError("parameter block is truncated", path)
            arrays[name] = np.frombuffer(chunk, dtype="<f8").astype(float).reshape(shape)
            offset += nbytes
        if offset != len(data):
            raise ParseError("trailing bytes after parameter block", path)
        gen_params = [arrays[n] for n, _ in head["arrays"] if n.startswith("gen_")]
        critic_params = [arrays[n] for n, _ in head["arrays"] if n.startswith("critic_")]
        nets = head["networks"]
        topo = head["topology"]
        shapes = head["shapes"]
        norm = head["normalization"]
        return cls(
            generator=MLP(gen_params, nets["generator"]["activation"], nets["generator"]["slope"]),
            critic=MLP(critic_params, nets["critic"]["activation"], nets["critic"]["slope"]),
            config=TrainConfig.from_dict(head["config"]),
            mu=arrays["mu"],
            normalization=NormalizationRecord(arrays["norm_mean"], norm["norm"], norm["root_index"]),
            topology=SkeletonTopology(
                topo["joint_count"], tuple(map(tuple, topo["bones"])), topo["root_index"]
            ),
            prior_len=shapes["prior_len"],
            future_len=shapes["future_len"],
            fps=shapes["fps"],
            scale_stats=head["scale_stats"],
            format_version=head["format_version"],
        )

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes(), path)
