"""Target propagation, feedback alignment and backprop on dense and locally-connected networks."""
from .config import ExperimentConfig, RuleConfig, tuned_config
from .data import AugmentConfig, Dataset, load_cifar10, load_mnist, one_hot
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    ParameterError,
    TargetPropError,
)
from .layers import Network, build_network, forward_pass
from .optim import Adam, AdamConfig, evaluate, random_search, train_epoch
from .rules import LearningRule, compute_targets
from .tensor import SeededRng

__version__ = "0.1.0"
