"""Experiment configuration: strict JSON parsing, validation and tuned presets."""
import copy
import json
from dataclasses import asdict, dataclass, field, fields

from .data import AugmentConfig
from .errors import ConfigError, TargetPropError
from .layers import INPUT_SHAPES, plan_network, resolve_architecture
from .optim import SCHEDULES, AdamConfig
from .rules import LearningRule

DATASETS = ("mnist", "cifar10")


@dataclass
class RuleConfig:
    name: str = "bp"
    alpha: float = 0.1
    sigma: float = 0.1
    alpha_mix: float = 1.0
    z_size: int = 0
    inverse_loss_mode: str = None

    def build(self):
        return LearningRule(
            self.name,
            alpha=self.alpha,
            sigma=self.sigma,
            inverse_loss_mode=self.inverse_loss_mode,
            alpha_mix=self.alpha_mix,
            z_size=self.z_size,
        )


@dataclass
class ExperimentConfig:
    dataset: str = "mnist"
    architecture: object = "mnist_fc"
    rule: RuleConfig = field(default_factory=RuleConfig)
    schedule: str = "parallel"
    forward_adam: AdamConfig = field(default_factory=AdamConfig)
    inverse_adam: AdamConfig = field(default_factory=AdamConfig)
    epochs: int = 50
    batch_size: int = 128
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    data_paths: dict = field(default_factory=dict)
    output_dir: str = "runs/experiment"
    train_subset: int = None
    test_subset: int = None
    record_wall_time: bool = True

    def learning_rule(self):
        return self.rule.build()

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw):
        cfg = _build(cls, raw, "")
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def replace(self, **changes):
        new = copy.deepcopy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        return new

    def validate(self):
        """Check field values and rule/architecture compatibility before any work."""
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset: must be one of {DATASETS}, got {self.dataset!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule: must be one of {SCHEDULES}, got {self.schedule!r}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs: must be a non-negative integer, got {self.epochs!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"batch_size: must be a positive integer, got {self.batch_size!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        for name in ("train_subset", "test_subset"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{name}: must be a positive integer or null, got {v!r}")
        try:
            rule = self.learning_rule()
        except TargetPropError as exc:
            raise ConfigError(f"rule: {exc}") from None
        try:
            arch = resolve_architecture(self.architecture)
            plans = plan_network(arch, aux_size=rule.aux_size)
        except TargetPropError as exc:
            raise ConfigError(f"architecture: {exc}") from None
        if tuple(arch["input_shape"]) != INPUT_SHAPES[self.dataset]:
            raise ConfigError(
                f"architecture: input shape {tuple(arch['input_shape'])} does not match {self.dataset} {INPUT_SHAPES[self.dataset]}"
            )
        classifier = plans[-1].activation == "softmax"
        if rule.kind == "ao_sdtp" and rule.z_size < 1:
            raise ConfigError("rule.z_size: ao_sdtp needs at least one auxiliary output unit")
        if rule.kind == "ao_sdtp" and not classifier:
            raise ConfigError("rule: ao_sdtp needs a softmax classifier output layer")
        if rule.kind in ("fa", "dfa", "bp") and len(plans) < 1:
            raise ConfigError("architecture: empty network")
        if rule.uses_targets and len(plans) < 2:
            raise ConfigError("architecture: target propagation needs at least two layers")
        if self.augment.enabled and self.dataset != "cifar10":
            raise ConfigError("augment: augmentation is only defined for cifar10")
        unknown = set(self.data_paths) - set(DATASETS)
        if unknown:
            raise ConfigError(f"data_paths: unknown keys {sorted(unknown)}")


_NESTED = {"rule": RuleConfig, "forward_adam": AdamConfig, "inverse_adam": AdamConfig, "augment": AugmentConfig}


def _build(cls, raw, prefix):
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object, got {type(raw).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}: unknown field")
    kwargs = {}
    for key, value in raw.items():
        sub = _NESTED.get(key) if cls is ExperimentConfig else None
        kwargs[key] = _build(sub, value, f"{prefix}{key}.") if sub else value
    try:
        return cls(**kwargs)
    except TargetPropError as exc:
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: {exc}") from None


# ----------------------------------------------------------------------------
# Best hyperparameters reported for the MNIST and CIFAR searches.
# Keys: (dataset, "fc" | "lc", method). Adam tuples are (lr, beta1, beta2, eps).

TUNED = {
    ("mnist", "fc", "dtp_parallel"): dict(model=(0.000757, 0.99, 0.95, 1e-3), inverse=(0.000768, 0.99, 0.999, 1e-4), alpha=0.15008, sigma=0.36133),
    ("mnist", "fc", "dtp_alternating"): dict(model=(0.000308, 0.99, 0.99, 1e-4), inverse=(0.004593, 0.99, 0.999, 1e-4), alpha=0.231758, sigma=0.220444),
    ("mnist", "fc", "sdtp_parallel"): dict(model=(0.000402, 0.99, 0.999, 1e-8), inverse=(0.001101, 0.99, 0.95, 1e-6), sigma=0.213995),
    ("mnist", "fc", "sdtp_alternating"): dict(model=(0.000301, 0.9, 0.95, 1e-4), inverse=(0.009572, 0.9, 0.95, 1e-3), sigma=0.118267),
    ("mnist", "fc", "bp"): dict(model=(0.000152, 0.9, 0.999, 1e-8)),
    ("mnist", "fc", "fa"): dict(model=(0.000168, 0.9, 0.999, 1e-4)),
    ("mnist", "fc", "dfa"): dict(model=(0.001649, 0.9, 0.95, 1e-3)),
    ("mnist", "lc", "dtp_parallel"): dict(model=(0.000905, 0.9, 0.99, 1e-4), inverse=(0.001239, 0.9, 0.999, 1e-4), alpha=0.116131, sigma=0.099236),
    ("mnist", "lc", "dtp_alternating"): dict(model=(0.001481, 0.9, 0.99, 1e-4), inverse=(0.000137, 0.9, 0.999, 1e-6), alpha=0.310892, sigma=0.366964),
    ("mnist", "lc", "sdtp_parallel"): dict(model=(0.000145, 0.9, 0.99, 1e-6), inverse=(0.001652, 0.9, 0.999, 1e-4), sigma=0.061555),
    ("mnist", "lc", "sdtp_alternating"): dict(model=(0.000651, 0.9, 0.99, 1e-4), inverse=(0.003741, 0.9, 0.99, 1e-4), sigma=0.134739),
    ("mnist", "lc", "bp"): dict(model=(0.000133, 0.9, 0.99, 1e-8)),
    ("mnist", "lc", "bp_convnet"): dict(model=(0.000297, 0.9, 0.99, 1e-8)),
    ("mnist", "lc", "fa"): dict(model=(0.000219, 0.9, 0.999, 1e-6)),
    ("mnist", "lc", "dfa"): dict(model=(0.002462, 0.9, 0.99, 1e-4)),
    ("cifar10", "fc", "dtp_parallel"): dict(model=(0.000012, 0.9, 0.999, 1e-8), inverse=(0.000039, 0.9, 0.99, 1e-6), alpha=0.125693, sigma=0.169783),
    ("cifar10", "fc", "dtp_alternating"): dict(model=(0.000013, 0.9, 0.999, 1e-8), inverse=(0.000114, 0.9, 0.99, 1e-4), alpha=0.172085, sigma=0.134811),
    ("cifar10", "fc", "sdtp_parallel"): dict(model=(0.000129, 0.9, 0.99, 1e-6), inverse=(0.000011, 0.9, 0.99, 1e-6), sigma=0.273341),
    ("cifar10", "fc", "sdtp_alternating"): dict(model=(0.000041, 0.9, 0.99, 1e-4), inverse=(0.000014, 0.9, 0.99, 1e-8), sigma=0.125678),
    ("cifar10", "fc", "bp"): dict(model=(0.000019, 0.9, 0.999, 1e-6)),
    ("cifar10", "fc", "fa"): dict(model=(0.000025, 0.9, 0.99, 1e-4)),
    ("cifar10", "fc", "dfa"): dict(model=(0.000050, 0.9, 0.99, 1e-8)),
    ("cifar10", "lc", "dtp_parallel"): dict(model=(0.000032, 0.9, 0.99, 1e-6), inverse=(0.000852, 0.9, 0.999, 1e-4), alpha=0.189828, sigma=0.146728),
    ("cifar10", "lc", "dtp_alternating"): dict(model=(0.000036, 0.9, 0.99, 1e-8), inverse=(0.000389, 0.9, 0.999, 1e-8), alpha=0.208141, sigma=0.094869),
    ("cifar10", "lc", "sdtp_parallel"): dict(model=(0.000020, 0.9, 0.99, 1e-4), inverse=(0.000261, 0.9, 0.999, 1e-6), sigma=0.299769),
    ("cifar10", "lc", "sdtp_alternating"): dict(model=(0.000109, 0.9, 0.99, 1e-4), inverse=(0.000011, 0.9, 0.99, 1e-8), sigma=0.023804),
    ("cifar10", "lc", "bp"): dict(model=(0.000044, 0.9, 0.999, 1e-6)),
    ("cifar10", "lc", "bp_convnet"): dict(model=(0.000133, 0.9, 0.99, 1e-4)),
    ("cifar10", "lc", "fa"): dict(model=(0.000022, 0.9, 0.999, 1e-8)),
    ("cifar10", "lc", "dfa"): dict(model=(0.000040, 0.9, 0.999, 1e-8)),
}

# Entries re-searched on this code base. The reported MNIST FC SDTP-parallel
# row (beta1 0.99, inverse beta2 0.95) diverges after one epoch here: lower-layer
# targets drift and the inverses turn expansive. The replacement comes from a
# 24-trial search inside the declared ranges (5 epochs, 20k images) followed by
# a forward learning rate raised to the reported 4.02e-4.
RETUNED = {
    ("mnist", "fc", "sdtp_parallel"): dict(
        model=(0.000402, 0.9, 0.99, 1e-8), inverse=(0.000205556985420218, 0.9, 0.99, 1e-4), sigma=0.08040225468620936
    ),
}


def tuned_config(dataset, kind, rule, schedule="parallel", reported=False, **overrides):
    """ExperimentConfig seeded with the tuned values for ``rule``.

    ``ao_sdtp`` has no tuned entry of its own and borrows the SDTP values
    for the same schedule. ``reported=True`` skips :data:`RETUNED` and uses
    the original table row.
    """
    method = rule if rule in ("bp", "fa", "dfa") else f"{'sdtp' if rule == 'ao_sdtp' else rule}_{schedule}"
    key = (dataset, kind, method)
    if key not in TUNED:
        raise ConfigError(f"no tuned hyperparameters for {key}")
    entry = TUNED[key] if reported else RETUNED.get(key, TUNED[key])
    arch = f"{'mnist' if dataset == 'mnist' else 'cifar'}_{kind}"
    rule_cfg = RuleConfig(name=rule, alpha=entry.get("alpha", 0.1), sigma=entry.get("sigma", 0.1))
    if rule == "ao_sdtp":
        rule_cfg.z_size = 512
    inverse = entry.get("inverse", entry["model"])
    cfg = ExperimentConfig(
        dataset=dataset,
        architecture=arch,
        rule=rule_cfg,
        schedule=schedule,
        forward_adam=AdamConfig(*entry["model"]),
        inverse_adam=AdamConfig(*inverse),
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    cfg.validate()
    return cfg
