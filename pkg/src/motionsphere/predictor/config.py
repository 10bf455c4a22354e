"""Training hyperparameters and named presets."""

import dataclasses
from dataclasses import dataclass

MU_SOURCES = ("priors", "futures", "union")
SCALE_POLICIES = ("prior_ratio", "train_mean", "regressed")


@dataclass
class TrainConfig:
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 10.0
    beta4: float = 10.0
    gp_lambda: float = 10.0
    lr: float = 1e-3
    batch: int = 16
    epochs: int = 300
    seed: int = 0
    use_adversarial: bool = True
    use_reconstruction: bool = True
    use_skeleton: bool = True
    use_bone: bool = True
    mu_source: str = "futures"
    scale_policy: str = "prior_ratio"
    adam_b1: float = 0.9
    adam_b2: float = 0.999
    adam_eps: float = 1e-8
    gen_hidden: tuple = (256, 256)
    critic_hidden: tuple = (128, 64)
    leaky_slope: float = 0.2
    karcher_threshold: float = 1e-6
    karcher_max_iters: int = 5000

    def __post_init__(self):
        self.gen_hidden = tuple(int(h) for h in self.gen_hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.batch < 1 or self.epochs < 0:
            raise ValueError("batch must be >= 1 and epochs >= 0")
        if min(self.beta1, self.beta2, self.beta3, self.beta4, self.gp_lambda) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.mu_source not in MU_SOURCES:
            raise ValueError(f"mu_source must be one of {MU_SOURCES}")
        if self.scale_policy not in SCALE_POLICIES:
            raise ValueError(f"scale_policy must be one of {SCALE_POLICIES}")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["gen_hidden"] = list(self.gen_hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def preset(name):
    """``desk`` (default sizes), ``toy`` (acceptance experiment) or ``published``.

    ``published`` keeps the published optimizer settings and stands in dense
    layers whose widths follow the published channel counts.
    """
    if name == "desk":
        return TrainConfig()
    if name == "toy":
        return TrainConfig(epochs=300, batch=16, lr=1e-3)
    if name == "published":
        return TrainConfig(
            lr=1e-4,
            batch=64,
            epochs=500,
            gen_hidden=(512, 256, 128, 64),
            critic_hidden=(64, 32, 16, 1024),
        )
    raise ValueError(f"unknown preset {name!r}")
