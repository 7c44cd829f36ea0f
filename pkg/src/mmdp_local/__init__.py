"""Local-policy search for weakly coupled multi-agent average-reward MDPs."""
from .errors import *  # noqa: F401,F403
from .factored import (
    DeltaEstimate,
    FactoredSpec,
    LocalPolicySet,
    build_ti_surrogate,
    decode_joint,
    encode_joint,
    measure_delta,
)
from .local_search import SearchConfig, SearchTrace, evaluate_on_joint, run_algorithm1
from .markov import (
    ErgodicityReport,
    StationaryDistribution,
    ergodicity_coefficient,
    estimate_lambda_bar,
    group_inverse,
    stationary_distribution,
    total_variation,
)
from .mdp import GainBias, JointMDP, average_reward, relative_value_iteration, validate_mdp
from .scenarios import GridConfig, PatrolConfig, build_grid, build_patrol

__version__ = "0.1.0"
