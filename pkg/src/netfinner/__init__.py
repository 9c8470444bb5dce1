"""Exact simulation and certification of Bell tests on networks with failing sources."""

from .classical import ClassicalNetworkModel, output_distribution
from .distribution import FAIL, OutcomeDistribution, conditional_on_conclusive, marginal
from .errors import (
    DistributionError,
    FormatError,
    ModelError,
    NetfinnerError,
    NetworkError,
    NotFairSamplingError,
    OptimizationError,
    ValidationFailed,
)
from .failing import FailureProbabilities, flag_qubit_model, overlay_distribution
from .fairsampling import decompose, postselect_transform, product_test
from .finner import finner_check, g_oracle, rigidity_verify
from .network import FractionalIndependentSet, NetworkGraph, dress_inputs, validate
from .quantum import (
    PartyPOVM,
    QuantumNetworkModel,
    SourceState,
    joint_distribution,
    schmidt_decompose,
)
